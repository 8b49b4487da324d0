// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation: mean radial error, successful detection rate at millimeter
// thresholds, their average, and the geometric residual diagnostic.

#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "geomark/landmarks.hpp"

namespace geomark {

inline constexpr std::array<double, 3> kDefaultThresholdsMm = {0.5, 1.0, 2.0};

struct MetricsReport {
    double mre_mm = 0.0;
    std::vector<std::pair<double, double>> sdr;  // (threshold mm, percent), ascending
    double sdr_average = 0.0;                    // arithmetic mean of the SDR values
    double geometric_residual = 0.0;             // absolute-mode loss on predicted sets
    std::array<double, kNumLandmarks> per_landmark_mre_mm{};
    long n_points = 0;
    long n_degenerate = 0;  // predicted sets skipped by the residual
};

// Mean over the 16 landmarks of spacing * |pred_k - gt_k|.
double mre(const LandmarkSet& pred, const LandmarkSet& gt, double spacing_mm_per_px);

// 100 * #(landmark predictions with spacing * distance <= threshold)
//     / (16 * #images). The boundary counts as detected.
double sdr(std::span<const LandmarkSet> preds, std::span<const LandmarkSet> gts,
           std::span<const double> spacings_mm_per_px, double threshold_mm);

// Pairs records by image_id (one-to-one, order-independent) and
// aggregates every metric over all landmark instances. Spacing comes from
// the ground-truth record of each pair.
MetricsReport evaluate_corpus(std::span<const AnnotationRecord> preds,
                              std::span<const AnnotationRecord> gts,
                              std::span<const double> thresholds_mm);

// CSV bodies emitted by the eval subcommand.
std::string metrics_csv(const MetricsReport& report);
std::string per_landmark_csv(const MetricsReport& report);

}  // namespace geomark
