// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Conversions between landmark coordinates and per-landmark heatmaps:
// Gaussian target encoding, hard argmax decoding, and differentiable
// soft-argmax decoding with temperature.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geomark/landmarks.hpp"

namespace geomark {

enum class HeatmapRole : std::uint8_t {
    Logits = 0,
    Probabilities = 1,
    Target = 2,
};

// A set of scalar grids over one W x H pixel lattice, channel-major,
// row-major within a channel (index = c*W*H + y*W + x). Pixel centers sit
// at integer coordinates; p = (column x, row y).
struct HeatmapStack {
    int width = 0;
    int height = 0;
    int channels = 0;
    HeatmapRole role = HeatmapRole::Logits;
    std::vector<double> values;

    static HeatmapStack zeros(int width, int height, int channels, HeatmapRole role);

    size_t pixels_per_channel() const { return static_cast<size_t>(width) * height; }
    size_t size() const { return pixels_per_channel() * static_cast<size_t>(channels); }

    std::span<double> channel(int c) {
        return {values.data() + static_cast<size_t>(c) * pixels_per_channel(),
                pixels_per_channel()};
    }
    std::span<const double> channel(int c) const {
        return {values.data() + static_cast<size_t>(c) * pixels_per_channel(),
                pixels_per_channel()};
    }

    double& at(int c, int x, int y) {
        return values[static_cast<size_t>(c) * pixels_per_channel() +
                      static_cast<size_t>(y) * width + static_cast<size_t>(x)];
    }
    double at(int c, int x, int y) const {
        return values[static_cast<size_t>(c) * pixels_per_channel() +
                      static_cast<size_t>(y) * width + static_cast<size_t>(x)];
    }
};

// Temperature-scaled softmax of one channel; entries sum to 1.
struct ProbabilityMap {
    int width = 0;
    int height = 0;
    double temperature = 0.0;
    std::vector<double> values;
};

// Per-pixel partial derivatives of the soft-argmax point of one channel.
struct SoftArgmaxJacobian {
    int width = 0;
    int height = 0;
    Point2 point;            // the soft-argmax this Jacobian belongs to
    std::vector<double> dx;  // d x-hat / d H(q)
    std::vector<double> dy;  // d y-hat / d H(q)
};

// One unnormalized Gaussian bump per landmark:
// G(p) = exp(-|p - coord|^2 / (2 sigma^2)), peak value 1 when the landmark
// coincides with a pixel center. sigma <= 0 is a parameter error.
HeatmapStack encode_gaussian(const LandmarkSet& coords, int width, int height, double sigma);

// Coordinates of the per-channel maximum pixel. Ties break to the lowest
// row, then lowest column. Requires a 16-channel stack.
LandmarkSet decode_argmax(const HeatmapStack& stack);
Point2 argmax_point(std::span<const double> channel, int width, int height);

// M(p) = exp(H(p)/T) / sum_q exp(H(q)/T), computed with the per-channel
// maximum subtracted first so large logits at small T stay finite.
ProbabilityMap softmax_probabilities(std::span<const double> logits, int width, int height,
                                     double temperature);

// Expected pixel coordinate under softmax_probabilities; always inside
// [0, W-1] x [0, H-1].
Point2 soft_argmax(std::span<const double> logits, int width, int height, double temperature);
Point2 soft_argmax(const ProbabilityMap& probabilities);

// Per-channel soft-argmax over a 16-channel stack.
LandmarkSet decode_soft_argmax(const HeatmapStack& stack, double temperature);

// Analytic gradient of the soft-argmax point:
// d p-hat / d H(q) = (1/T) M(q) (q - p-hat).
SoftArgmaxJacobian soft_argmax_jacobian(std::span<const double> logits, int width, int height,
                                        double temperature);

// Flat binary container: magic "GHMP", u32 version, u32 W, u32 H,
// u32 channels, u8 role, then row-major little-endian f64 per channel.
std::string ghmp_bytes(const HeatmapStack& stack);
HeatmapStack parse_ghmp(std::string_view bytes);
void save_ghmp(const std::filesystem::path& path, const HeatmapStack& stack);
HeatmapStack load_ghmp(const std::filesystem::path& path);

// Uniform scale factor mapping image-space coordinates onto a heatmap
// lattice. Uniform (not anisotropic) so angles, and with them the
// geometric construction, survive the mapping exactly.
double lattice_scale(int image_width, int image_height, int hm_width, int hm_height);

}  // namespace geomark
