// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctbg/numcore/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "ctbg/error.hpp"
#include "json.hpp"

namespace ctbg {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written in host order, which must be little-endian");

template <class T>
constexpr const char* dtype_name() {
  return std::is_same_v<T, float> ? "f32" : "f64";
}

nlohmann::json read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open checkpoint manifest " + manifest.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest.string() + ": " + e.what());
  }
  if (j.value("version", "") != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version in " + manifest.string());
  }
  return j;
}

template <class Src, class Dst>
void copy_payload(const std::vector<char>& bytes, std::size_t offset, std::vector<Dst>& out) {
  if (offset + out.size() * sizeof(Src) > bytes.size()) throw IoError("checkpoint payload truncated");
  for (std::size_t i = 0; i < out.size(); ++i) {
    Src v;
    std::memcpy(&v, bytes.data() + offset + i * sizeof(Src), sizeof(Src));
    out[i] = static_cast<Dst>(v);
  }
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& manifest, const ParameterStore<T>& params,
                     const std::string& metadata_json) {
  auto payload = manifest;
  payload.replace_extension(".bin");

  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["dtype"] = dtype_name<T>();
  j["payload"] = payload.filename().string();
  j["metadata"] = nlohmann::json::parse(metadata_json);
  auto& entries = j["params"] = nlohmann::json::array();

  std::ofstream bin(payload, std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write checkpoint payload " + payload.string());
  std::size_t offset = 0;
  for (const auto& p : params) {
    entries.push_back({{"name", p.name}, {"shape", p.value.shape}, {"offset", offset}});
    const auto bytes = p.value.data.size() * sizeof(T);
    bin.write(reinterpret_cast<const char*>(p.value.data.data()), static_cast<std::streamsize>(bytes));
    offset += bytes;
  }
  if (!bin) throw IoError("failed writing checkpoint payload " + payload.string());

  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint manifest " + manifest.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing checkpoint manifest " + manifest.string());
}

template <class T>
std::string load_checkpoint(const std::filesystem::path& manifest, ParameterStore<T>& params) {
  const auto j = read_manifest(manifest);
  const auto payload = manifest.parent_path() / j.at("payload").get<std::string>();
  std::ifstream bin(payload, std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint payload " + payload.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  const std::string dtype = j.at("dtype").get<std::string>();
  if (dtype != "f32" && dtype != "f64") throw IoError("unknown checkpoint dtype " + dtype);

  std::size_t restored = 0;
  for (const auto& e : j.at("params")) {
    const auto name = e.at("name").get<std::string>();
    auto* p = params.find(name);
    if (p == nullptr) throw IoError("checkpoint parameter not in model: " + name);
    if (e.at("shape").get<Shape>() != p->value.shape) {
      throw IoError("checkpoint shape mismatch for " + name);
    }
    const auto offset = e.at("offset").get<std::size_t>();
    if (dtype == "f32") {
      copy_payload<float>(bytes, offset, p->value.data);
    } else {
      copy_payload<double>(bytes, offset, p->value.data);
    }
    ++restored;
  }
  if (restored != params.size()) throw IoError("checkpoint is missing model parameters");
  return j.value("metadata", nlohmann::json::object()).dump();
}

std::string read_checkpoint_metadata(const std::filesystem::path& manifest) {
  return read_manifest(manifest).value("metadata", nlohmann::json::object()).dump();
}

template void save_checkpoint<float>(const std::filesystem::path&, const ParameterStore<float>&,
                                     const std::string&);
template void save_checkpoint<double>(const std::filesystem::path&, const ParameterStore<double>&,
                                      const std::string&);
template std::string load_checkpoint<float>(const std::filesystem::path&, ParameterStore<float>&);
template std::string load_checkpoint<double>(const std::filesystem::path&, ParameterStore<double>&);

}  // namespace ctbg
