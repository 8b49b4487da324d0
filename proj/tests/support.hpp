// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles, independent of the library paths they check.

#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "geomark/landmarks.hpp"
#include "geomark/rng.hpp"
#include "geomark/synth.hpp"

namespace geomark::testsupport {

// Exhaustive-search orthogonal regression: walks theta over
// [-pi/2, pi/2) in fixed steps and minimizes the summed squared
// orthogonal distance to the centroid line, recomputed from raw points.
// Shares nothing with fit_direction beyond the problem statement.
inline double brute_force_fit_angle(std::span<const Point2> points, double step = 1e-5) {
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : points) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());

    const double half_pi = std::numbers::pi / 2.0;
    double best_theta = 0.0;
    double best_residual = std::numeric_limits<double>::infinity();
    for (double theta = -half_pi; theta < half_pi; theta += step) {
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        double residual = 0.0;
        for (const auto& p : points) {
            const double dx = p.x - mx;
            const double dy = p.y - my;
            const double along = dx * c + dy * s;
            residual += dx * dx + dy * dy - along * along;
        }
        if (residual < best_residual) {
            best_residual = residual;
            best_theta = theta;
        }
    }
    return best_theta;
}

inline double angle_diff_mod_pi(double a, double b) {
    double d = a - b;
    const double pi = std::numbers::pi;
    while (d > pi / 2.0) d -= pi;
    while (d <= -pi / 2.0) d += pi;
    return d;
}

// Random point set rejected while nearly isotropic, so a unique direction
// exists well above the fit's degeneracy thresholds.
inline std::vector<Point2> random_non_degenerate_points(Xoshiro256pp& rng, int n) {
    while (true) {
        std::vector<Point2> points;
        points.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            points.push_back({rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)});
        }
        double mx = 0.0, my = 0.0;
        for (const auto& p : points) {
            mx += p.x;
            my += p.y;
        }
        mx /= n;
        my /= n;
        double sxx = 0.0, syy = 0.0, sxy = 0.0;
        for (const auto& p : points) {
            const double dx = p.x - mx;
            const double dy = p.y - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        const double trace = sxx + syy;
        const double aniso = std::hypot(sxx - syy, 2.0 * sxy);
        if (trace > 1.0 && aniso > 1e-3 * trace) {
            return points;
        }
    }
}

// A compact, fully specified exact configuration used across tests.
inline ToothConfigParams reference_params() {
    ToothConfigParams params;
    params.axis_angle = 1.38;  // near-vertical, slightly tilted
    params.root_length = 120.0;
    params.crown_offset = 60.0;
    params.apex = {480.0, 400.0};
    params.half_widths = {
        {LandmarkId::AB_AP, -45.0}, {LandmarkId::PB_AP, 40.0},  {LandmarkId::AB_13, -50.0},
        {LandmarkId::AR_13, -15.0}, {LandmarkId::PR_13, 18.0},  {LandmarkId::PB_13, 48.0},
        {LandmarkId::AB_12, -55.0}, {LandmarkId::AR_12, -20.0}, {LandmarkId::PR_12, 22.0},
        {LandmarkId::PB_12, 52.0},
    };
    params.lateral_offsets = {
        {LandmarkId::CEJ_A, -25.0},
        {LandmarkId::CEJ_P, 24.0},
        {LandmarkId::A_crest, -38.0},
        {LandmarkId::P_crest, 36.0},
    };
    return params;
}

}  // namespace geomark::testsupport
