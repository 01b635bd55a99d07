// Copyright 2026 The ctbg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace ctbg::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadArguments = 2,
  kIoError = 3,
  kNumericError = 4,
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name. Errors go to stderr as one JSON line.
int run(const std::vector<std::string>& args);

}  // namespace ctbg::cli
