// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "ctbg/dreamer.hpp"
#include "ctbg/synthgen.hpp"

namespace ctbg {

/// d=8, two heads, one decoder layer.
ModelConfig micro_model_config();

/// Three units: a two-unit block and a singleton.
Scene micro_scene();

struct GradCheckConfig {
  std::uint64_t seed = 3;
  double param_scale = 0.5;  // parameters are redrawn uniform(+-param_scale)
  double step = 1e-4;        // central-difference step (Richardson-extrapolated)
  double tolerance = 1e-5;
  double abs_floor = 1e-6;   // denominator floor of the relative error
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  bool passed = false;
};

/// Compares every parameter's reverse-mode gradient of the overall loss with
/// finite differences on the micro model in double precision.
GradCheckReport grad_check(const GradCheckConfig& cfg = {});

}  // namespace ctbg
