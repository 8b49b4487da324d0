// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "geomark/errors.hpp"
#include "geomark/geometry.hpp"
#include "geomark/util.hpp"

namespace geomark {

double mre(const LandmarkSet& pred, const LandmarkSet& gt, double spacing_mm_per_px) {
    if (!(spacing_mm_per_px > 0.0)) {
        throw ParameterError("mre: spacing must be positive");
    }
    double sum = 0.0;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const Point2 d = pred.coords[static_cast<size_t>(i)] - gt.coords[static_cast<size_t>(i)];
        sum += spacing_mm_per_px * std::hypot(d.x, d.y);
    }
    return sum / static_cast<double>(kNumLandmarks);
}

double sdr(std::span<const LandmarkSet> preds, std::span<const LandmarkSet> gts,
           std::span<const double> spacings_mm_per_px, double threshold_mm) {
    if (preds.size() != gts.size() || preds.size() != spacings_mm_per_px.size()) {
        throw DimensionError("sdr: sequence lengths differ");
    }
    if (!(threshold_mm > 0.0)) {
        throw ParameterError("sdr: threshold must be positive");
    }
    if (preds.empty()) {
        throw DimensionError("sdr: empty corpus");
    }
    long hits = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        for (int k = 0; k < kNumLandmarks; ++k) {
            const Point2 d = preds[i].coords[static_cast<size_t>(k)] -
                             gts[i].coords[static_cast<size_t>(k)];
            if (spacings_mm_per_px[i] * std::hypot(d.x, d.y) <= threshold_mm) {
                ++hits;
            }
        }
    }
    return 100.0 * static_cast<double>(hits) /
           (static_cast<double>(kNumLandmarks) * static_cast<double>(preds.size()));
}

MetricsReport evaluate_corpus(std::span<const AnnotationRecord> preds,
                              std::span<const AnnotationRecord> gts,
                              std::span<const double> thresholds_mm) {
    if (preds.size() != gts.size()) {
        throw PairingError("evaluate_corpus: prediction and ground-truth counts differ (" +
                           std::to_string(preds.size()) + " vs " + std::to_string(gts.size()) +
                           ")");
    }
    if (preds.empty()) {
        throw PairingError("evaluate_corpus: empty corpus");
    }
    if (thresholds_mm.empty()) {
        throw ParameterError("evaluate_corpus: no thresholds");
    }

    std::map<std::string, const AnnotationRecord*> gt_by_id;
    for (const auto& rec : gts) {
        if (!gt_by_id.emplace(rec.image_id, &rec).second) {
            throw PairingError("evaluate_corpus: duplicate ground-truth image_id '" +
                               rec.image_id + "'");
        }
    }

    // Matched pairs sorted by image_id: aggregation order is then
    // independent of input file order, bit for bit.
    std::map<std::string, const AnnotationRecord*> pred_by_id;
    std::vector<std::string> unmatched;
    for (const auto& rec : preds) {
        if (!pred_by_id.emplace(rec.image_id, &rec).second) {
            throw PairingError("evaluate_corpus: duplicate prediction image_id '" + rec.image_id +
                               "'");
        }
        if (!gt_by_id.contains(rec.image_id)) {
            unmatched.push_back(rec.image_id);
        }
    }
    for (const auto& [id, rec] : gt_by_id) {
        (void)rec;
        if (!pred_by_id.contains(id)) {
            unmatched.push_back(id);
        }
    }
    if (!unmatched.empty()) {
        std::sort(unmatched.begin(), unmatched.end());
        std::string msg = "evaluate_corpus: unmatched image_ids:";
        for (const auto& id : unmatched) {
            msg += " '" + id + "'";
        }
        throw PairingError(msg);
    }

    std::vector<double> sorted_thresholds(thresholds_mm.begin(), thresholds_mm.end());
    std::sort(sorted_thresholds.begin(), sorted_thresholds.end());

    MetricsReport report;
    std::vector<long> hits(sorted_thresholds.size(), 0);
    std::array<double, kNumLandmarks> per_landmark_sum{};
    double distance_sum = 0.0;
    double residual_sum = 0.0;
    long residual_count = 0;

    LineGroupSchema residual_schema = line_groups_default();
    residual_schema.loss_mode = LossMode::Absolute;

    for (const auto& [id, gt_rec] : gt_by_id) {
        const AnnotationRecord* pred_rec = pred_by_id.at(id);
        const double spacing = gt_rec->spacing_mm_per_px;
        for (int k = 0; k < kNumLandmarks; ++k) {
            const Point2 d = pred_rec->landmarks.coords[static_cast<size_t>(k)] -
                             gt_rec->landmarks.coords[static_cast<size_t>(k)];
            const double dist_mm = spacing * std::hypot(d.x, d.y);
            distance_sum += dist_mm;
            per_landmark_sum[static_cast<size_t>(k)] += dist_mm;
            for (size_t t = 0; t < sorted_thresholds.size(); ++t) {
                if (dist_mm <= sorted_thresholds[t]) {
                    ++hits[t];
                }
            }
        }
        try {
            residual_sum += geometric_loss(pred_rec->landmarks, residual_schema).total;
            ++residual_count;
        } catch (const DegenerateDirectionError&) {
            ++report.n_degenerate;
        }
    }

    const long n_images = static_cast<long>(gt_by_id.size());
    report.n_points = n_images * kNumLandmarks;
    report.mre_mm = distance_sum / static_cast<double>(report.n_points);
    for (int k = 0; k < kNumLandmarks; ++k) {
        report.per_landmark_mre_mm[static_cast<size_t>(k)] =
            per_landmark_sum[static_cast<size_t>(k)] / static_cast<double>(n_images);
    }
    double sdr_sum = 0.0;
    for (size_t t = 0; t < sorted_thresholds.size(); ++t) {
        const double pct = 100.0 * static_cast<double>(hits[t]) /
                           static_cast<double>(report.n_points);
        report.sdr.emplace_back(sorted_thresholds[t], pct);
        sdr_sum += pct;
    }
    report.sdr_average = sdr_sum / static_cast<double>(sorted_thresholds.size());
    report.geometric_residual =
        residual_count > 0 ? residual_sum / static_cast<double>(residual_count) : 0.0;
    return report;
}

std::string metrics_csv(const MetricsReport& report) {
    std::string out = "metric,value\n";
    for (const auto& [threshold, pct] : report.sdr) {
        out += "sdr_" + format_threshold(threshold) + "," + format_double(pct) + "\n";
    }
    out += "sdr_average," + format_double(report.sdr_average) + "\n";
    out += "mre_mm," + format_double(report.mre_mm) + "\n";
    out += "geometric_residual," + format_double(report.geometric_residual) + "\n";
    out += "n_points," + std::to_string(report.n_points) + "\n";
    out += "n_degenerate," + std::to_string(report.n_degenerate) + "\n";
    return out;
}

std::string per_landmark_csv(const MetricsReport& report) {
    std::string out = "landmark,mre_mm\n";
    for (int k = 0; k < kNumLandmarks; ++k) {
        out += std::string(kLandmarkNames[static_cast<size_t>(k)]) + "," +
               format_double(report.per_landmark_mre_mm[static_cast<size_t>(k)]) + "\n";
    }
    return out;
}

}  // namespace geomark
