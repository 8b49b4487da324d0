// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/geometry.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "geomark/errors.hpp"

namespace geomark {

namespace {

constexpr double kPi = std::numbers::pi;

double canonicalize_angle(double theta) {
    while (theta > kPi / 2.0) theta -= kPi;
    while (theta <= -kPi / 2.0) theta += kPi;
    return theta;
}

// Centered second moments plus everything the gradient chain reuses.
struct MomentFit {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double u = 0.0;       // 2 Sxy
    double w = 0.0;       // Sxx - Syy
    double norm2 = 0.0;   // u^2 + w^2
    UnitDirection dir;
};

MomentFit fit_moments(std::span<const Point2> points, const FitTolerances& tol) {
    if (points.size() < 2) {
        throw DimensionError("fit_direction: need at least 2 points");
    }
    double mx = 0.0;
    double my = 0.0;
    for (const Point2& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError("fit_direction: non-finite point");
        }
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());

    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const Point2& p : points) {
        const double dx = p.x - mx;
        const double dy = p.y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }

    const double trace = sxx + syy;
    const double u = 2.0 * sxy;
    const double w = sxx - syy;
    const double aniso = std::hypot(w, u);
    if (trace <= tol.eps_abs || aniso <= tol.eps_iso * trace) {
        throw DegenerateDirectionError("fit_direction: direction is degenerate");
    }

    MomentFit fit;
    fit.mean_x = mx;
    fit.mean_y = my;
    fit.u = u;
    fit.w = w;
    fit.norm2 = u * u + w * w;
    const double theta = canonicalize_angle(0.5 * std::atan2(u, w));
    fit.dir = {theta, std::cos(theta), std::sin(theta)};
    return fit;
}

double perpendicular_contribution(double dot, LossMode mode) {
    switch (mode) {
        case LossMode::Raw: return dot;
        case LossMode::Absolute: return std::abs(dot);
        case LossMode::Squared: return dot * dot;
    }
    return dot;
}

// d f(dot) / d dot; the subgradient 0 is used at the |.| kink.
double perpendicular_slope(double dot, LossMode mode) {
    switch (mode) {
        case LossMode::Raw: return 1.0;
        case LossMode::Absolute: return dot > 0.0 ? 1.0 : (dot < 0.0 ? -1.0 : 0.0);
        case LossMode::Squared: return 2.0 * dot;
    }
    return 1.0;
}

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<Point2> gather(const LandmarkSet& landmarks, std::span<const LandmarkId> ids) {
    std::vector<Point2> points;
    points.reserve(ids.size());
    for (LandmarkId id : ids) {
        points.push_back(landmarks[id]);
    }
    return points;
}

void validate_schema(const LineGroupSchema& schema) {
    if (schema.axis[0] == schema.axis[1]) {
        throw ValidationError("line group schema: axis members must be distinct");
    }
    for (const auto& line : schema.level_lines) {
        if (line.size() < 2) {
            throw ValidationError("line group schema: every level line needs >= 2 members");
        }
    }
}

}  // namespace

UnitDirection fit_direction(std::span<const Point2> points, const FitTolerances& tol) {
    return fit_moments(points, tol).dir;
}

GeoLossValue geometric_loss_from_directions(const UnitDirection& axis,
                                            const std::array<UnitDirection, 3>& levels,
                                            LossMode mode) {
    GeoLossValue value;
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double dot = axis.vx * levels[static_cast<size_t>(j)].vx +
                           axis.vy * levels[static_cast<size_t>(j)].vy;
        value.perpendicular_terms[static_cast<size_t>(j)] = dot;
        sum += perpendicular_contribution(dot, mode);
    }
    int pair = 0;
    for (int j = 0; j < 3; ++j) {
        for (int k = j + 1; k < 3; ++k, ++pair) {
            const double dot = levels[static_cast<size_t>(j)].vx * levels[static_cast<size_t>(k)].vx +
                               levels[static_cast<size_t>(j)].vy * levels[static_cast<size_t>(k)].vy;
            value.parallel_terms[static_cast<size_t>(pair)] = 1.0 - std::abs(dot);
            sum += value.parallel_terms[static_cast<size_t>(pair)];
        }
    }
    value.total = sum / 6.0;
    return value;
}

GeoLossValue geometric_loss(const LandmarkSet& landmarks, const LineGroupSchema& schema,
                            const FitTolerances& tol) {
    validate_schema(schema);
    const std::array<Point2, 2> axis_points = {landmarks[schema.axis[0]],
                                               landmarks[schema.axis[1]]};
    const UnitDirection axis = fit_direction(axis_points, tol);
    std::array<UnitDirection, 3> levels;
    for (size_t j = 0; j < 3; ++j) {
        const auto points = gather(landmarks, schema.level_lines[j]);
        levels[j] = fit_direction(points, tol);
    }
    return geometric_loss_from_directions(axis, levels, schema.loss_mode);
}

LandmarkGradient geometric_loss_grad(const LandmarkSet& landmarks, const LineGroupSchema& schema,
                                     const FitTolerances& tol) {
    validate_schema(schema);

    // Group 0 is the axis, groups 1..3 the level lines.
    struct Group {
        std::vector<LandmarkId> members;
        MomentFit fit;
    };
    std::array<Group, 4> groups;
    groups[0].members = {schema.axis[0], schema.axis[1]};
    for (size_t j = 0; j < 3; ++j) {
        groups[j + 1].members = schema.level_lines[j];
    }
    for (auto& group : groups) {
        const auto points = gather(landmarks, group.members);
        group.fit = fit_moments(points, tol);
    }

    const UnitDirection& axis = groups[0].fit.dir;
    std::array<double, 3> perp_dots{};
    for (size_t j = 0; j < 3; ++j) {
        const UnitDirection& level = groups[j + 1].fit.dir;
        perp_dots[j] = axis.vx * level.vx + axis.vy * level.vy;
    }

    // dL/d theta per group. d(v_a . v_b)/d theta_a = v_a' . v_b with
    // v' = (-sin, cos); the 1/6 normalization is applied at the end.
    std::array<double, 4> dloss_dtheta{};
    for (size_t j = 0; j < 3; ++j) {
        const UnitDirection& level = groups[j + 1].fit.dir;
        const double slope = perpendicular_slope(perp_dots[j], schema.loss_mode);
        dloss_dtheta[0] += slope * (-axis.vy * level.vx + axis.vx * level.vy);
        dloss_dtheta[j + 1] += slope * (-level.vy * axis.vx + level.vx * axis.vy);
    }
    for (size_t j = 0; j < 3; ++j) {
        for (size_t k = j + 1; k < 3; ++k) {
            const UnitDirection& vj = groups[j + 1].fit.dir;
            const UnitDirection& vk = groups[k + 1].fit.dir;
            const double dot = vj.vx * vk.vx + vj.vy * vk.vy;
            const double slope = -sign_or_zero(dot);  // d(1 - |dot|)/d dot
            dloss_dtheta[j + 1] += slope * (-vj.vy * vk.vx + vj.vx * vk.vy);
            dloss_dtheta[k + 1] += slope * (-vk.vy * vj.vx + vk.vx * vj.vy);
        }
    }

    LandmarkGradient grad{};
    for (size_t g = 0; g < groups.size(); ++g) {
        const MomentFit& fit = groups[g].fit;
        const double scale = dloss_dtheta[g] / 6.0;
        if (scale == 0.0) continue;
        for (LandmarkId id : groups[g].members) {
            const Point2 p = landmarks[id];
            const double cx = p.x - fit.mean_x;
            const double cy = p.y - fit.mean_y;
            // theta = 1/2 atan2(u, w) with dSxx/dx = 2cx, dSyy/dy = 2cy,
            // dSxy/dx = cy, dSxy/dy = cx (centering terms cancel).
            const double dtheta_dx = (fit.w * cy - fit.u * cx) / fit.norm2;
            const double dtheta_dy = (fit.w * cx + fit.u * cy) / fit.norm2;
            grad[static_cast<size_t>(index_of(id))].x += scale * dtheta_dx;
            grad[static_cast<size_t>(index_of(id))].y += scale * dtheta_dy;
        }
    }
    return grad;
}

double direction_angle_difference(double a, double b) {
    return canonicalize_angle(a - b);
}

}  // namespace geomark
