// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "geomark/errors.hpp"
#include "geomark/geometry.hpp"
#include "geomark/rng.hpp"
#include "geomark/synth.hpp"
#include "geomark/util.hpp"
#include "support.hpp"

using namespace geomark;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "geomark_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("generate_tooth_config anchors and perpendicularity") {
    SUBCASE("vertical axis: level lines horizontal, anchors at 1/3 and 1/2") {
        ToothConfigParams params = testsupport::reference_params();
        params.axis_angle = std::numbers::pi / 2;  // CP above AP, crown up
        params.root_length = 120.0;
        params.apex = {100.0, 400.0};
        const LandmarkSet set = generate_tooth_config(params);

        CHECK(set[LandmarkId::AP] == Point2{100.0, 400.0});
        // Apical-third anchor at y = 400 - 120/3, mid-root at 400 - 120/2;
        // members share the anchor's y coordinate up to fp noise.
        CHECK(set[LandmarkId::AR_13].y == doctest::Approx(360.0).epsilon(1e-12));
        CHECK(set[LandmarkId::PB_12].y == doctest::Approx(340.0).epsilon(1e-12));
        CHECK(set[LandmarkId::AB_AP].y == doctest::Approx(400.0).epsilon(1e-12));

        for (const auto& line : line_groups_default().level_lines) {
            std::vector<Point2> pts;
            for (auto id : line) pts.push_back(set[id]);
            const auto dir = fit_direction(pts);
            CHECK(std::abs(dir.vx) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(dir.vy) <= 1e-12);
        }
    }
    SUBCASE("absolute-mode loss is zero for 100 random parameter draws") {
        LineGroupSchema schema = line_groups_default();
        schema.loss_mode = LossMode::Absolute;
        for (int i = 0; i < 100; ++i) {
            const auto params = sample_tooth_params(ParamRanges{}, mix_seed(31337, i));
            const LandmarkSet set = generate_tooth_config(params);
            CHECK(geometric_loss(set, schema).total <= 1e-12);
        }
    }
    SUBCASE("parameter validation") {
        ToothConfigParams params = testsupport::reference_params();
        params.root_length = 0.0;
        CHECK_THROWS_AS(generate_tooth_config(params), ParameterError);

        params = testsupport::reference_params();
        params.half_widths.erase(LandmarkId::PB_12);
        CHECK_THROWS_AS(generate_tooth_config(params), ParameterError);

        params = testsupport::reference_params();
        params.half_widths[LandmarkId::AR_13] = params.half_widths[LandmarkId::AB_13];
        CHECK_THROWS_AS(generate_tooth_config(params), ParameterError);
    }
}

TEST_CASE("perturb") {
    const LandmarkSet base = generate_tooth_config(testsupport::reference_params());

    SUBCASE("zero noise returns the input bit-exactly") {
        CHECK(perturb(base, 0.0, 123) == base);
    }
    SUBCASE("same seed, same output bits") {
        const auto a = perturb(base, 2.0, 77);
        const auto b = perturb(base, 2.0, 77);
        CHECK(a == b);
        const auto c = perturb(base, 2.0, 78);
        CHECK(!(a == c));
    }
    SUBCASE("empirical stddev of the injected noise") {
        double sum = 0.0;
        double sum2 = 0.0;
        long n = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto noisy = perturb(base, 2.0, mix_seed(5150, i));
            for (int k = 0; k < kNumLandmarks; ++k) {
                const Point2 d = noisy.coords[static_cast<size_t>(k)] -
                                 base.coords[static_cast<size_t>(k)];
                sum += d.x + d.y;
                sum2 += d.x * d.x + d.y * d.y;
                n += 2;
            }
        }
        const double mean = sum / static_cast<double>(n);
        const double stddev = std::sqrt(sum2 / static_cast<double>(n) - mean * mean);
        CHECK(stddev >= 1.8);
        CHECK(stddev <= 2.2);
        CHECK(std::abs(mean) <= 0.05);
    }
    SUBCASE("negative sigma rejected") {
        CHECK_THROWS_AS(perturb(base, -1.0, 0), ParameterError);
    }
}

TEST_CASE("monotone residual degradation with noise") {
    LineGroupSchema schema = line_groups_default();
    schema.loss_mode = LossMode::Absolute;
    double previous = -1.0;
    for (const double sigma : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        double total = 0.0;
        for (int i = 0; i < 200; ++i) {
            const auto params = sample_tooth_params(ParamRanges{}, mix_seed(808, i));
            const auto noisy = perturb(generate_tooth_config(params), sigma, mix_seed(809, i));
            total += geometric_loss(noisy, schema).total;
        }
        const double mean_residual = total / 200.0;
        CHECK(mean_residual > previous);
        previous = mean_residual;
    }
}

TEST_CASE("generate_dataset") {
    SUBCASE("default split counts") {
        DatasetSpec spec;
        CHECK(spec.split == std::array<int, 3>{36, 149, 162});
        CHECK(spec.n_images == 347);
        CHECK(spec.width == 957);
        CHECK(spec.height == 555);
    }
    SUBCASE("three files with requested counts, all records valid") {
        const auto dir = temp_dir("gen_counts");
        DatasetSpec spec;
        spec.n_images = 9;
        spec.split = {3, 4, 2};
        spec.noise_sigma = 2.0;
        spec.seed = 99;
        const auto files = generate_dataset(spec, dir);
        const auto train = load_dataset(files.train);
        const auto val = load_dataset(files.val);
        const auto test = load_dataset(files.test);
        CHECK(train.size() == 3);
        CHECK(val.size() == 4);
        CHECK(test.size() == 2);
        for (const auto& rec : val) {
            CHECK(validate_landmark_set(rec.landmarks, rec.width, rec.height).ok());
            CHECK(rec.spacing_mm_per_px == spec.spacing_mm_per_px);
        }
        // Ids are globally consecutive across the split files.
        CHECK(train.front().image_id == "synth_000000");
        CHECK(val.front().image_id == "synth_000003");
        CHECK(test.back().image_id == "synth_000008");
    }
    SUBCASE("same seed twice produces byte-identical files") {
        const auto dir_a = temp_dir("gen_a");
        const auto dir_b = temp_dir("gen_b");
        DatasetSpec spec;
        spec.n_images = 5;
        spec.split = {2, 2, 1};
        spec.noise_sigma = 1.5;
        spec.seed = 1234;
        generate_dataset(spec, dir_a);
        generate_dataset(spec, dir_b);
        CHECK(read_text_file(dir_a / "train.json") == read_text_file(dir_b / "train.json"));
        CHECK(read_text_file(dir_a / "val.json") == read_text_file(dir_b / "val.json"));
        CHECK(read_text_file(dir_a / "test.json") == read_text_file(dir_b / "test.json"));

        spec.seed = 1235;
        const auto dir_c = temp_dir("gen_c");
        generate_dataset(spec, dir_c);
        CHECK(read_text_file(dir_a / "train.json") != read_text_file(dir_c / "train.json"));
    }
    SUBCASE("meta header records generator provenance and parses in strict mode") {
        const auto dir = temp_dir("gen_meta");
        DatasetSpec spec;
        spec.n_images = 2;
        spec.split = {1, 1, 0};
        spec.seed = 7;
        const auto files = generate_dataset(spec, dir);
        const std::string text = read_text_file(files.train);
        CHECK(text.find("\"_meta\"") != std::string::npos);
        CHECK(text.find("\"rng_name\": \"xoshiro256++/box-muller\"") != std::string::npos);
        CHECK(text.find("\"seed\": 7") != std::string::npos);
        CHECK(load_dataset(files.train, kAnnotationParseOptions).size() == 1);
    }
    SUBCASE("split must sum to n") {
        DatasetSpec spec;
        spec.n_images = 10;
        spec.split = {3, 3, 3};
        CHECK_THROWS_AS(generate_dataset(spec, temp_dir("gen_bad")), ValidationError);
    }
    SUBCASE("scaled ranges keep small canvases valid") {
        const auto dir = temp_dir("gen_small");
        DatasetSpec spec;
        spec.n_images = 6;
        spec.split = {3, 3, 0};
        spec.noise_sigma = 1.0;
        spec.width = 64;
        spec.height = 64;
        spec.spacing_mm_per_px = 1.0;
        spec.ranges = default_ranges_for(64, 64);
        const auto files = generate_dataset(spec, dir);
        for (const auto& rec : load_dataset(files.train)) {
            CHECK(validate_landmark_set(rec.landmarks, 64, 64).ok());
        }
    }
}
