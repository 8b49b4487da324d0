// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geomark::cli {

// Runs one CLI invocation. args excludes the program name. Exit codes:
// 0 success, 1 validation/parameter/usage errors, 2 I/O errors. Every
// subcommand is deterministic given its flags and --seed; artifacts land
// under --out together with a manifest.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geomark::cli
