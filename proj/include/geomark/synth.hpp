// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic 16-landmark tooth-like configurations that satisfy the
// perpendicularity/parallelism construction exactly, plus controlled
// perturbations. The real corpus is unavailable, so these configurations
// are the known-zero oracle for every geometric claim.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "geomark/landmarks.hpp"

namespace geomark {

struct ToothConfigParams {
    double axis_angle = 0.0;    // direction CP -> AP, radians
    double root_length = 0.0;   // px, AP to the CEJ level
    double crown_offset = 0.0;  // px, CP beyond the CEJ level
    Point2 apex;                // AP position

    // Signed offset (px) along the level line, per non-anchor member.
    // Negative = labial (A) side, positive = lingual (P) side. AP sits at
    // offset 0 on the root-apex line implicitly.
    std::map<LandmarkId, double> half_widths;

    // CEJ/crest placement carries no geometric constraint; fractions are
    // along the axis from AP toward CP in units of root_length.
    double cej_fraction = 1.0;
    double crest_fraction = 0.9;
    std::map<LandmarkId, double> lateral_offsets;  // CEJ_A/CEJ_P/A_crest/P_crest

    double noise_sigma = 0.0;  // px, used by generate_dataset
    std::uint64_t seed = 0;
};

// The ten level-line members that require a half_widths entry.
extern const std::array<LandmarkId, 10> kHalfWidthMembers;
// The four unconstrained lateral points.
extern const std::array<LandmarkId, 4> kLateralMembers;

// Exact construction: level lines perpendicular to the axis at the apex
// and at 1/3 and 1/2 of the root length; absolute-mode geometric loss is
// zero analytically.
LandmarkSet generate_tooth_config(const ToothConfigParams& params);

// Adds independent zero-mean Gaussian noise (stddev noise_sigma px) per
// coordinate from the seeded portable generator. noise_sigma = 0 returns
// the input bit-exactly.
LandmarkSet perturb(const LandmarkSet& set, double noise_sigma, std::uint64_t seed);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

// Uniform sampling ranges for randomized configurations. Defaults keep
// every landmark inside the default 957x555 canvas with margin to spare.
struct ParamRanges {
    Range axis_angle{1.221, 1.921};   // ~70..110 degrees, near-vertical axis
    Range root_length{80.0, 160.0};
    Range crown_offset{40.0, 80.0};
    Range apex_x{300.0, 650.0};
    Range apex_y{300.0, 480.0};
    Range bone_half_width{30.0, 60.0};   // AB_*/PB_* offsets
    Range root_half_width{10.0, 25.0};   // AR_*/PR_* offsets
    Range cej_offset{15.0, 35.0};
    Range crest_offset{25.0, 50.0};
};

// Default ranges shrunk uniformly onto a different canvas (angles are
// left alone). Identity at 957x555.
ParamRanges default_ranges_for(int width, int height);

ToothConfigParams sample_tooth_params(const ParamRanges& ranges, std::uint64_t seed);

struct DatasetSpec {
    int n_images = 347;
    std::array<int, 3> split = {36, 149, 162};  // train / val / test
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    int width = 957;
    int height = 555;
    double spacing_mm_per_px = 0.1;
    ParamRanges ranges;
};

struct DatasetFiles {
    std::filesystem::path train;
    std::filesystem::path val;
    std::filesystem::path test;
};

// Writes train/val/test annotation files (records wrapped with a "_meta"
// header carrying generator version, seed, noise_sigma and rng name).
// Deterministic: the same spec produces byte-identical files.
DatasetFiles generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// In-memory variant used by tests and the trainer pilot paths.
std::vector<AnnotationRecord> generate_records(const DatasetSpec& spec, int first_index,
                                               int count);

}  // namespace geomark
