// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include "geomark/synth.hpp"

#include <cmath>
#include <json.hpp>

#include "geomark/errors.hpp"
#include "geomark/rng.hpp"
#include "geomark/util.hpp"
#include "geomark/version.hpp"

namespace geomark {

using nlohmann::ordered_json;

const std::array<LandmarkId, 10> kHalfWidthMembers = {
    LandmarkId::AB_AP, LandmarkId::PB_AP, LandmarkId::AB_13, LandmarkId::AR_13,
    LandmarkId::PR_13, LandmarkId::PB_13, LandmarkId::AB_12, LandmarkId::AR_12,
    LandmarkId::PR_12, LandmarkId::PB_12,
};

const std::array<LandmarkId, 4> kLateralMembers = {
    LandmarkId::CEJ_A, LandmarkId::CEJ_P, LandmarkId::A_crest, LandmarkId::P_crest,
};

namespace {

void validate_params(const ToothConfigParams& params) {
    if (!(params.root_length > 0.0) || !(params.crown_offset > 0.0)) {
        throw ParameterError("tooth config: root_length and crown_offset must be positive");
    }
    if (!(params.noise_sigma >= 0.0)) {
        throw ParameterError("tooth config: noise_sigma must be nonnegative");
    }
    for (LandmarkId id : kHalfWidthMembers) {
        const auto it = params.half_widths.find(id);
        if (it == params.half_widths.end()) {
            throw ParameterError("tooth config: missing half width for '" +
                                 std::string(name_of(id)) + "'");
        }
        if (!(std::abs(it->second) > 0.0)) {
            throw ParameterError("tooth config: half width for '" + std::string(name_of(id)) +
                                 "' must be nonzero");
        }
    }
    for (LandmarkId id : kLateralMembers) {
        if (!params.lateral_offsets.contains(id)) {
            throw ParameterError("tooth config: missing lateral offset for '" +
                                 std::string(name_of(id)) + "'");
        }
    }
    // Offsets within one line must be distinct or the fit degenerates.
    const std::array<std::array<LandmarkId, 2>, 1> apex_line = {
        {{LandmarkId::AB_AP, LandmarkId::PB_AP}}};
    (void)apex_line;
    const auto distinct = [&](std::initializer_list<LandmarkId> ids) {
        std::vector<double> offsets;
        for (LandmarkId id : ids) offsets.push_back(params.half_widths.at(id));
        for (size_t i = 0; i < offsets.size(); ++i) {
            for (size_t j = i + 1; j < offsets.size(); ++j) {
                if (offsets[i] == offsets[j]) {
                    throw ParameterError("tooth config: duplicate member offsets within a line");
                }
            }
        }
    };
    distinct({LandmarkId::AB_AP, LandmarkId::PB_AP});
    distinct({LandmarkId::AB_13, LandmarkId::AR_13, LandmarkId::PR_13, LandmarkId::PB_13});
    distinct({LandmarkId::AB_12, LandmarkId::AR_12, LandmarkId::PR_12, LandmarkId::PB_12});
}

}  // namespace

LandmarkSet generate_tooth_config(const ToothConfigParams& params) {
    validate_params(params);

    const double ca = std::cos(params.axis_angle);  // axis direction CP -> AP is (ca, sa)
    const double sa = std::sin(params.axis_angle);
    const Point2 crown_dir{-ca, -sa};  // AP -> CP
    const Point2 perp_dir{-sa, ca};    // level-line direction

    const Point2 ap = params.apex;
    const Point2 cp = ap + (params.root_length + params.crown_offset) * crown_dir;

    LandmarkSet set;
    set[LandmarkId::AP] = ap;
    set[LandmarkId::CP] = cp;

    const auto place = [&](LandmarkId id, double level_fraction) {
        const Point2 anchor = ap + (level_fraction * params.root_length) * crown_dir;
        set[id] = anchor + params.half_widths.at(id) * perp_dir;
    };
    place(LandmarkId::AB_AP, 0.0);
    place(LandmarkId::PB_AP, 0.0);
    place(LandmarkId::AB_13, 1.0 / 3.0);
    place(LandmarkId::AR_13, 1.0 / 3.0);
    place(LandmarkId::PR_13, 1.0 / 3.0);
    place(LandmarkId::PB_13, 1.0 / 3.0);
    place(LandmarkId::AB_12, 0.5);
    place(LandmarkId::AR_12, 0.5);
    place(LandmarkId::PR_12, 0.5);
    place(LandmarkId::PB_12, 0.5);

    const Point2 cej_anchor = ap + (params.cej_fraction * params.root_length) * crown_dir;
    const Point2 crest_anchor = ap + (params.crest_fraction * params.root_length) * crown_dir;
    set[LandmarkId::CEJ_A] = cej_anchor + params.lateral_offsets.at(LandmarkId::CEJ_A) * perp_dir;
    set[LandmarkId::CEJ_P] = cej_anchor + params.lateral_offsets.at(LandmarkId::CEJ_P) * perp_dir;
    set[LandmarkId::A_crest] =
        crest_anchor + params.lateral_offsets.at(LandmarkId::A_crest) * perp_dir;
    set[LandmarkId::P_crest] =
        crest_anchor + params.lateral_offsets.at(LandmarkId::P_crest) * perp_dir;
    return set;
}

LandmarkSet perturb(const LandmarkSet& set, double noise_sigma, std::uint64_t seed) {
    if (!(noise_sigma >= 0.0)) {
        throw ParameterError("perturb: noise_sigma must be nonnegative");
    }
    if (noise_sigma == 0.0) {
        return set;
    }
    Xoshiro256pp rng(seed);
    LandmarkSet out = set;
    for (auto& p : out.coords) {
        p.x += rng.normal(0.0, noise_sigma);
        p.y += rng.normal(0.0, noise_sigma);
    }
    return out;
}

ParamRanges default_ranges_for(int width, int height) {
    if (width <= 0 || height <= 0) {
        throw ParameterError("default_ranges_for: canvas must be positive");
    }
    const double s = std::min(static_cast<double>(width) / 957.0,
                              static_cast<double>(height) / 555.0);
    ParamRanges ranges;
    const auto scale = [s](Range& r) {
        r.lo *= s;
        r.hi *= s;
    };
    scale(ranges.root_length);
    scale(ranges.crown_offset);
    scale(ranges.apex_x);
    scale(ranges.apex_y);
    scale(ranges.bone_half_width);
    scale(ranges.root_half_width);
    scale(ranges.cej_offset);
    scale(ranges.crest_offset);
    return ranges;
}

ToothConfigParams sample_tooth_params(const ParamRanges& ranges, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    const auto draw = [&](const Range& r) { return rng.uniform(r.lo, r.hi); };

    ToothConfigParams params;
    params.axis_angle = draw(ranges.axis_angle);
    params.root_length = draw(ranges.root_length);
    params.crown_offset = draw(ranges.crown_offset);
    params.apex = {draw(ranges.apex_x), draw(ranges.apex_y)};
    params.seed = seed;

    // Bone points sit outside root points on each side, so the ranges
    // being disjoint keeps offsets within a line distinct.
    params.half_widths[LandmarkId::AB_AP] = -draw(ranges.bone_half_width);
    params.half_widths[LandmarkId::PB_AP] = draw(ranges.bone_half_width);
    params.half_widths[LandmarkId::AB_13] = -draw(ranges.bone_half_width);
    params.half_widths[LandmarkId::AR_13] = -draw(ranges.root_half_width);
    params.half_widths[LandmarkId::PR_13] = draw(ranges.root_half_width);
    params.half_widths[LandmarkId::PB_13] = draw(ranges.bone_half_width);
    params.half_widths[LandmarkId::AB_12] = -draw(ranges.bone_half_width);
    params.half_widths[LandmarkId::AR_12] = -draw(ranges.root_half_width);
    params.half_widths[LandmarkId::PR_12] = draw(ranges.root_half_width);
    params.half_widths[LandmarkId::PB_12] = draw(ranges.bone_half_width);

    params.lateral_offsets[LandmarkId::CEJ_A] = -draw(ranges.cej_offset);
    params.lateral_offsets[LandmarkId::CEJ_P] = draw(ranges.cej_offset);
    params.lateral_offsets[LandmarkId::A_crest] = -draw(ranges.crest_offset);
    params.lateral_offsets[LandmarkId::P_crest] = draw(ranges.crest_offset);
    return params;
}

std::vector<AnnotationRecord> generate_records(const DatasetSpec& spec, int first_index,
                                               int count) {
    std::vector<AnnotationRecord> records;
    records.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int global_index = first_index + i;
        const std::uint64_t record_seed = mix_seed(spec.seed, static_cast<std::uint64_t>(global_index));
        ToothConfigParams params = sample_tooth_params(spec.ranges, record_seed);
        params.noise_sigma = spec.noise_sigma;
        const LandmarkSet exact = generate_tooth_config(params);

        LandmarkSet placed = exact;
        bool ok = validate_landmark_set(placed, spec.width, spec.height).ok();
        if (spec.noise_sigma > 0.0) {
            // Resample the whole record's noise until it stays inside the
            // canvas; deterministic because retries derive their own seeds.
            ok = false;
            for (int retry = 0; retry < 1000; ++retry) {
                placed = perturb(exact, spec.noise_sigma,
                                 mix_seed(record_seed, 1000 + static_cast<std::uint64_t>(retry)));
                if (validate_landmark_set(placed, spec.width, spec.height).ok()) {
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            throw ValidationError("generate_records: could not keep record " +
                                  std::to_string(global_index) + " inside the canvas");
        }

        AnnotationRecord rec;
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "synth_%06d", global_index);
        rec.image_id = id_buf;
        rec.width = spec.width;
        rec.height = spec.height;
        rec.spacing_mm_per_px = spec.spacing_mm_per_px;
        rec.landmarks = placed;
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

std::string dataset_json(const DatasetSpec& spec, std::span<const AnnotationRecord> records) {
    ordered_json meta;
    meta["generator_version"] = std::string(kToolkitVersion);
    meta["seed"] = spec.seed;
    meta["noise_sigma"] = spec.noise_sigma;
    meta["rng_name"] = kRngName;

    ordered_json doc;
    doc["_meta"] = std::move(meta);
    doc["records"] = ordered_json::parse(write_dataset(records));
    return doc.dump(2) + "\n";
}

}  // namespace

DatasetFiles generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
    if (spec.split[0] + spec.split[1] + spec.split[2] != spec.n_images) {
        throw ValidationError("generate_dataset: split counts must sum to n_images");
    }
    if (spec.n_images <= 0 || spec.split[0] < 0 || spec.split[1] < 0 || spec.split[2] < 0) {
        throw ValidationError("generate_dataset: counts must be nonnegative, n_images positive");
    }
    if (spec.width <= 0 || spec.height <= 0 || !(spec.spacing_mm_per_px > 0.0)) {
        throw ValidationError("generate_dataset: invalid image geometry");
    }

    DatasetFiles files{out_dir / "train.json", out_dir / "val.json", out_dir / "test.json"};
    const std::array<std::filesystem::path, 3> paths = {files.train, files.val, files.test};
    int first = 0;
    for (size_t part = 0; part < 3; ++part) {
        const auto records = generate_records(spec, first, spec.split[part]);
        write_text_file(paths[part], dataset_json(spec, records));
        first += spec.split[part];
    }
    return files;
}

}  // namespace geomark
