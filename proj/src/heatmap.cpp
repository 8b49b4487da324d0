// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include "geomark/errors.hpp"
#include "geomark/util.hpp"

namespace geomark {

HeatmapStack HeatmapStack::zeros(int width, int height, int channels, HeatmapRole role) {
    if (width <= 0 || height <= 0 || channels <= 0) {
        throw ParameterError("heatmap stack dimensions must be positive");
    }
    HeatmapStack stack;
    stack.width = width;
    stack.height = height;
    stack.channels = channels;
    stack.role = role;
    stack.values.assign(static_cast<size_t>(width) * height * channels, 0.0);
    return stack;
}

HeatmapStack encode_gaussian(const LandmarkSet& coords, int width, int height, double sigma) {
    if (!(sigma > 0.0)) {
        throw ParameterError("encode_gaussian: sigma must be positive");
    }
    auto stack = HeatmapStack::zeros(width, height, kNumLandmarks, HeatmapRole::Target);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    for (int c = 0; c < kNumLandmarks; ++c) {
        const Point2 center = coords.coords[static_cast<size_t>(c)];
        auto channel = stack.channel(c);
        size_t idx = 0;
        for (int y = 0; y < height; ++y) {
            const double dy = static_cast<double>(y) - center.y;
            for (int x = 0; x < width; ++x, ++idx) {
                const double dx = static_cast<double>(x) - center.x;
                channel[idx] = std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
            }
        }
    }
    return stack;
}

Point2 argmax_point(std::span<const double> channel, int width, int height) {
    // Row-major scan with strict ">" keeps the first maximum, which is the
    // lowest row then lowest column tie-break.
    double best = -std::numeric_limits<double>::infinity();
    int best_x = 0;
    int best_y = 0;
    size_t idx = 0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x, ++idx) {
            if (channel[idx] > best) {
                best = channel[idx];
                best_x = x;
                best_y = y;
            }
        }
    }
    return {static_cast<double>(best_x), static_cast<double>(best_y)};
}

LandmarkSet decode_argmax(const HeatmapStack& stack) {
    if (stack.channels != kNumLandmarks) {
        throw DimensionError("decode_argmax: expected a 16-channel stack");
    }
    LandmarkSet out;
    for (int c = 0; c < kNumLandmarks; ++c) {
        out.coords[static_cast<size_t>(c)] = argmax_point(stack.channel(c), stack.width,
                                                          stack.height);
    }
    return out;
}

ProbabilityMap softmax_probabilities(std::span<const double> logits, int width, int height,
                                     double temperature) {
    if (!(temperature > 0.0)) {
        throw ParameterError("softmax: temperature must be positive");
    }
    if (logits.size() != static_cast<size_t>(width) * height) {
        throw DimensionError("softmax: logits size does not match lattice");
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double v : logits) {
        if (!std::isfinite(v)) {
            throw ValidationError("softmax: non-finite logit");
        }
        max_logit = std::max(max_logit, v);
    }
    ProbabilityMap map;
    map.width = width;
    map.height = height;
    map.temperature = temperature;
    map.values.resize(logits.size());
    const double inv_t = 1.0 / temperature;
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double e = std::exp((logits[i] - max_logit) * inv_t);
        map.values[i] = e;
        sum += e;
    }
    const double inv_sum = 1.0 / sum;
    for (double& v : map.values) {
        v *= inv_sum;
    }
    return map;
}

Point2 soft_argmax(const ProbabilityMap& probabilities) {
    double ex = 0.0;
    double ey = 0.0;
    size_t idx = 0;
    for (int y = 0; y < probabilities.height; ++y) {
        for (int x = 0; x < probabilities.width; ++x, ++idx) {
            const double m = probabilities.values[idx];
            ex += m * static_cast<double>(x);
            ey += m * static_cast<double>(y);
        }
    }
    // The expectation lies in the pixel hull by construction; clamp the
    // last-ulp rounding excess so the contract holds bit-for-bit.
    ex = std::clamp(ex, 0.0, static_cast<double>(probabilities.width - 1));
    ey = std::clamp(ey, 0.0, static_cast<double>(probabilities.height - 1));
    return {ex, ey};
}

Point2 soft_argmax(std::span<const double> logits, int width, int height, double temperature) {
    return soft_argmax(softmax_probabilities(logits, width, height, temperature));
}

LandmarkSet decode_soft_argmax(const HeatmapStack& stack, double temperature) {
    if (stack.channels != kNumLandmarks) {
        throw DimensionError("decode_soft_argmax: expected a 16-channel stack");
    }
    LandmarkSet out;
    for (int c = 0; c < kNumLandmarks; ++c) {
        out.coords[static_cast<size_t>(c)] =
            soft_argmax(stack.channel(c), stack.width, stack.height, temperature);
    }
    return out;
}

SoftArgmaxJacobian soft_argmax_jacobian(std::span<const double> logits, int width, int height,
                                        double temperature) {
    const ProbabilityMap map = softmax_probabilities(logits, width, height, temperature);
    const Point2 p = soft_argmax(map);
    SoftArgmaxJacobian jac;
    jac.width = width;
    jac.height = height;
    jac.point = p;
    jac.dx.resize(map.values.size());
    jac.dy.resize(map.values.size());
    const double inv_t = 1.0 / temperature;
    size_t idx = 0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x, ++idx) {
            const double m = map.values[idx] * inv_t;
            jac.dx[idx] = m * (static_cast<double>(x) - p.x);
            jac.dy[idx] = m * (static_cast<double>(y) - p.y);
        }
    }
    return jac;
}

namespace {

constexpr char kMagic[4] = {'G', 'H', 'M', 'P'};
constexpr std::uint32_t kGhmpVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32(std::string_view bytes, size_t offset) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 3])) << 24);
}

void append_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

double read_f64(std::string_view bytes, size_t offset) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | static_cast<unsigned char>(bytes[offset + static_cast<size_t>(i)]);
    }
    return std::bit_cast<double>(bits);
}

}  // namespace

std::string ghmp_bytes(const HeatmapStack& stack) {
    std::string out;
    out.reserve(21 + stack.size() * 8);
    out.append(kMagic, 4);
    append_u32(out, kGhmpVersion);
    append_u32(out, static_cast<std::uint32_t>(stack.width));
    append_u32(out, static_cast<std::uint32_t>(stack.height));
    append_u32(out, static_cast<std::uint32_t>(stack.channels));
    out.push_back(static_cast<char>(stack.role));
    for (double v : stack.values) {
        append_f64(out, v);
    }
    return out;
}

HeatmapStack parse_ghmp(std::string_view bytes) {
    constexpr size_t kHeaderSize = 4 + 4 * 4 + 1;
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw ParseError("not a GHMP container");
    }
    const std::uint32_t version = read_u32(bytes, 4);
    if (version != kGhmpVersion) {
        throw ParseError("unsupported GHMP version " + std::to_string(version));
    }
    HeatmapStack stack;
    stack.width = static_cast<int>(read_u32(bytes, 8));
    stack.height = static_cast<int>(read_u32(bytes, 12));
    stack.channels = static_cast<int>(read_u32(bytes, 16));
    const auto role = static_cast<unsigned>(static_cast<unsigned char>(bytes[20]));
    if (role > 2) {
        throw ParseError("invalid GHMP role byte");
    }
    stack.role = static_cast<HeatmapRole>(role);
    if (stack.width <= 0 || stack.height <= 0 || stack.channels <= 0) {
        throw ParseError("invalid GHMP dimensions");
    }
    const size_t count = stack.size();
    if (bytes.size() != kHeaderSize + count * 8) {
        throw ParseError("GHMP payload size mismatch");
    }
    stack.values.resize(count);
    for (size_t i = 0; i < count; ++i) {
        stack.values[i] = read_f64(bytes, kHeaderSize + i * 8);
    }
    return stack;
}

void save_ghmp(const std::filesystem::path& path, const HeatmapStack& stack) {
    write_binary_file(path, ghmp_bytes(stack));
}

HeatmapStack load_ghmp(const std::filesystem::path& path) {
    try {
        return parse_ghmp(read_binary_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

double lattice_scale(int image_width, int image_height, int hm_width, int hm_height) {
    if (image_width <= 0 || image_height <= 0 || hm_width <= 0 || hm_height <= 0) {
        throw ParameterError("lattice_scale: dimensions must be positive");
    }
    return std::min(static_cast<double>(hm_width) / image_width,
                    static_cast<double>(hm_height) / image_height);
}

}  // namespace geomark
