// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/util.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geomark/errors.hpp"

namespace geomark {

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) {
        throw ParameterError("format_double: unrepresentable value");
    }
    return std::string(buf.data(), ptr);
}

std::string format_threshold(double value) {
    if (std::isfinite(value) && value == std::floor(value)) {
        return format_double(value) + ".0";
    }
    return format_double(value);
}

namespace {

std::string read_file_impl(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) {
        throw IoError("cannot open for reading: " + path.string());
    }
    std::ostringstream out;
    out << in.rdbuf();
    if (in.bad()) {
        throw IoError("read failure: " + path.string());
    }
    return std::move(out).str();
}

void write_file_impl(const std::filesystem::path& path, std::string_view content,
                     std::ios::openmode mode) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory: " + path.parent_path().string());
        }
    }
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError("write failure: " + path.string());
    }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
    return read_file_impl(path, std::ios::in);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    write_file_impl(path, content, std::ios::out);
}

std::string read_binary_file(const std::filesystem::path& path) {
    return read_file_impl(path, std::ios::in | std::ios::binary);
}

void write_binary_file(const std::filesystem::path& path, std::string_view bytes) {
    write_file_impl(path, bytes, std::ios::out | std::ios::binary);
}

}  // namespace geomark
