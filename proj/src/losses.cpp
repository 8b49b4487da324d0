// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/losses.hpp"

#include <cmath>

#include "geomark/errors.hpp"

namespace geomark {

namespace {

void require_same_shape(const HeatmapStack& a, const HeatmapStack& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw DimensionError(std::string(what) + ": shape mismatch");
    }
}

}  // namespace

double mse_heatmap(const HeatmapStack& pred, const HeatmapStack& target) {
    require_same_shape(pred, target, "mse_heatmap");
    double sum = 0.0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const double d = pred.values[i] - target.values[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.values.size());
}

HeatmapStack mse_heatmap_grad(const HeatmapStack& pred, const HeatmapStack& target) {
    require_same_shape(pred, target, "mse_heatmap_grad");
    HeatmapStack grad = HeatmapStack::zeros(pred.width, pred.height, pred.channels,
                                            HeatmapRole::Logits);
    const double scale = 2.0 / static_cast<double>(pred.values.size());
    for (size_t i = 0; i < pred.values.size(); ++i) {
        grad.values[i] = scale * (pred.values[i] - target.values[i]);
    }
    return grad;
}

TotalLossResult total_loss(const HeatmapStack& pred, const LandmarkSet& target_coords,
                           const LineGroupSchema& schema, double temperature, double sigma,
                           double lambda) {
    if (!(sigma > 0.0)) {
        throw ParameterError("total_loss: sigma must be positive");
    }
    if (pred.width <= 0 || pred.height <= 0) {
        throw DimensionError("total_loss: empty prediction stack");
    }
    const HeatmapStack target = encode_gaussian(target_coords, pred.width, pred.height, sigma);
    return total_loss_with_target(pred, target, schema, temperature, lambda);
}

TotalLossResult total_loss_with_target(const HeatmapStack& pred, const HeatmapStack& target,
                                       const LineGroupSchema& schema, double temperature,
                                       double lambda) {
    if (!(temperature > 0.0)) {
        throw ParameterError("total_loss: temperature must be positive");
    }
    if (lambda < 0.0) {
        throw ParameterError("total_loss: lambda must be nonnegative");
    }
    if (pred.channels != kNumLandmarks) {
        throw DimensionError("total_loss: expected a 16-channel stack");
    }

    TotalLossResult result;
    result.breakdown.mse = mse_heatmap(pred, target);
    result.breakdown.lambda = lambda;
    result.grad = mse_heatmap_grad(pred, target);

    // Decode every channel once; the Jacobian arrays are only needed for
    // the geo gradient chain, so lambda = 0 skips them.
    std::array<SoftArgmaxJacobian, kNumLandmarks> jacobians;
    for (int c = 0; c < kNumLandmarks; ++c) {
        if (lambda > 0.0) {
            jacobians[static_cast<size_t>(c)] =
                soft_argmax_jacobian(pred.channel(c), pred.width, pred.height, temperature);
            result.decoded.coords[static_cast<size_t>(c)] = jacobians[static_cast<size_t>(c)].point;
        } else {
            result.decoded.coords[static_cast<size_t>(c)] =
                soft_argmax(pred.channel(c), pred.width, pred.height, temperature);
        }
    }

    double geo = 0.0;
    if (lambda > 0.0) {
        try {
            geo = geometric_loss(result.decoded, schema).total;
            const LandmarkGradient coord_grad = geometric_loss_grad(result.decoded, schema);
            const size_t n = pred.pixels_per_channel();
            for (int c = 0; c < kNumLandmarks; ++c) {
                const Point2 g = coord_grad[static_cast<size_t>(c)];
                if (g.x == 0.0 && g.y == 0.0) continue;
                const auto& jac = jacobians[static_cast<size_t>(c)];
                double* out = result.grad.values.data() + static_cast<size_t>(c) * n;
                for (size_t q = 0; q < n; ++q) {
                    out[q] += lambda * (g.x * jac.dx[q] + g.y * jac.dy[q]);
                }
            }
        } catch (const DegenerateDirectionError&) {
            // Early-training decodes can collapse onto a point or an
            // isotropic blob; the sample then trains on MSE alone.
            geo = 0.0;
            result.geo_degenerate = true;
        }
    }
    result.breakdown.geo = geo;
    result.breakdown.total = result.breakdown.mse + lambda * geo;
    return result;
}

}  // namespace geomark
