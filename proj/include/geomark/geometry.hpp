// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Orthogonal line fitting over landmark groups, the combined
// perpendicularity/parallelism loss on the fitted unit directions, and
// its exact gradient with respect to the landmark coordinates.

#pragma once

#include <array>
#include <span>

#include "geomark/landmarks.hpp"

namespace geomark {

// Canonical line direction: theta in (-pi/2, pi/2], vector (cos, sin).
// Fitted lines have no intrinsic sign; canonicalization (cos >= 0, and
// sin = 1 when cos = 0) makes the signed dot products of the loss a
// well-defined function of the landmarks.
struct UnitDirection {
    double theta = 0.0;
    double vx = 1.0;
    double vy = 0.0;
};

struct FitTolerances {
    double eps_iso = 1e-9;   // anisotropy threshold, relative to trace(S)
    double eps_abs = 1e-12;  // absolute spread threshold on trace(S)
};

// Direction of the first principal axis of the centered second-moment
// matrix S = [[Sxx, Sxy], [Sxy, Syy]]:
//   theta = 1/2 atan2(2 Sxy, Sxx - Syy), canonicalized.
// Total least squares, not ordinate regression: near-vertical axes are
// routine here and y-on-x fitting is singular for them. For n = 2 this is
// the segment direction up to canonical sign.
UnitDirection fit_direction(std::span<const Point2> points,
                            const FitTolerances& tol = {});

struct GeoLossValue {
    double total = 0.0;
    std::array<double, 3> perpendicular_terms{};  // raw dots v_perp . v_j
    std::array<double, 3> parallel_terms{};       // 1 - |v_j . v_k|, pairs (1,2) (1,3) (2,3)
};

// Loss over already-fitted unit directions:
//   total = ( sum_j f(v_perp . v_j) + sum_{j<k} (1 - |v_j . v_k|) ) / 6
// where f is identity, |.| or (.)^2 per LossMode.
GeoLossValue geometric_loss_from_directions(const UnitDirection& axis,
                                            const std::array<UnitDirection, 3>& levels,
                                            LossMode mode);

// Fits the axis and level-line directions from the landmark set per the
// schema, then evaluates the loss. Degenerate fits throw.
GeoLossValue geometric_loss(const LandmarkSet& landmarks, const LineGroupSchema& schema,
                            const FitTolerances& tol = {});

using LandmarkGradient = std::array<Point2, kNumLandmarks>;

// Exact gradient via the chain  points -> S -> theta -> v -> dots -> loss.
// Landmarks outside every line group receive zero gradient. The atan2
// form gives closed-form partials, so no iterative solver is involved.
LandmarkGradient geometric_loss_grad(const LandmarkSet& landmarks, const LineGroupSchema& schema,
                                     const FitTolerances& tol = {});

// Wraps an angle difference into (-pi/2, pi/2]; directions are lines, so
// angles compare modulo pi.
double direction_angle_difference(double a, double b);

}  // namespace geomark
