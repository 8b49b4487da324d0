// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace geomark {

// Shortest round-trip decimal form (via std::to_chars); deterministic,
// used for every number that lands in a CSV or report.
std::string format_double(double value);

// Threshold labels keep one decimal for integral values: 1 -> "1.0".
std::string format_threshold(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::string read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace geomark
