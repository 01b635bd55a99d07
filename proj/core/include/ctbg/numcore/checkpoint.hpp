// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "ctbg/numcore/tensor.hpp"

namespace ctbg {

inline constexpr const char* kCheckpointVersion = "ctbg-ckpt-1";

/// Writes `<manifest>` (JSON: version, dtype, payload file name, per-parameter
/// name/shape/byte offset, plus caller metadata under "metadata") and a
/// sibling `.bin` payload of little-endian raw floats.
template <class T>
void save_checkpoint(const std::filesystem::path& manifest, const ParameterStore<T>& params,
                     const std::string& metadata_json = "{}");

/// Restores every parameter of `params` by name; shapes must match. Payloads
/// stored in the other float width are converted. Returns the metadata JSON.
template <class T>
std::string load_checkpoint(const std::filesystem::path& manifest, ParameterStore<T>& params);

/// Metadata JSON of a checkpoint manifest without touching the payload.
std::string read_checkpoint_metadata(const std::filesystem::path& manifest);

}  // namespace ctbg
