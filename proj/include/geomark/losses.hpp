// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Heatmap MSE, the soft-argmax-coupled geometric loss, and their
// lambda-weighted combination with a unified gradient w.r.t. logits.

#pragma once

#include "geomark/geometry.hpp"
#include "geomark/heatmap.hpp"
#include "geomark/landmarks.hpp"

namespace geomark {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kDefaultLambda = 1e-5;
inline constexpr double kDefaultSigma = 2.0;

struct LossBreakdown {
    double mse = 0.0;
    double geo = 0.0;
    double lambda = 0.0;
    double total = 0.0;  // mse + lambda * geo, computed exactly that way
};

// Mean over all channels and pixels of (pred - target)^2.
double mse_heatmap(const HeatmapStack& pred, const HeatmapStack& target);

// d mse / d pred(p) = 2 (pred(p) - target(p)) / N, N = channels * W * H.
HeatmapStack mse_heatmap_grad(const HeatmapStack& pred, const HeatmapStack& target);

struct TotalLossResult {
    LossBreakdown breakdown;
    HeatmapStack grad;      // d total / d logits
    LandmarkSet decoded;    // soft-argmax of the predicted logits
    bool geo_degenerate = false;  // geo term fell back to 0 value / 0 gradient
};

// Builds Gaussian targets from target_coords, evaluates the MSE against
// the predicted logits, decodes predicted coordinates with soft-argmax at
// temperature T and evaluates the geometric loss on them. The gradient is
// mse_grad + lambda * (geometric gradient composed with the soft-argmax
// Jacobian). A degenerate line fit contributes value 0 and gradient 0 and
// raises the geo_degenerate flag; library-level geometry stays strict.
TotalLossResult total_loss(const HeatmapStack& pred, const LandmarkSet& target_coords,
                           const LineGroupSchema& schema, double temperature, double sigma,
                           double lambda);

// Same computation against an already-encoded target stack; the trainer
// caches targets across epochs with this.
TotalLossResult total_loss_with_target(const HeatmapStack& pred, const HeatmapStack& target,
                                       const LineGroupSchema& schema, double temperature,
                                       double lambda);

}  // namespace geomark
