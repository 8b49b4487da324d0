// Copyright (c) 2026 The geomark authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "geomark/errors.hpp"
#include "geomark/heatmap.hpp"
#include "geomark/rng.hpp"

using namespace geomark;

namespace {

LandmarkSet all_at(Point2 p) {
    LandmarkSet set;
    for (auto& c : set.coords) c = p;
    return set;
}

std::vector<double> random_logits(Xoshiro256pp& rng, int n, double lo = -10.0, double hi = 10.0) {
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("encode_gaussian peak and falloff") {
    LandmarkSet coords = all_at({3.0, 4.0});
    const auto stack = encode_gaussian(coords, 8, 8, 2.0);
    CHECK(stack.role == HeatmapRole::Target);
    CHECK(stack.at(0, 3, 4) == 1.0);  // zero distance
    // Distance 2 at sigma 2: exp(-0.5).
    CHECK(stack.at(0, 5, 4) == doctest::Approx(0.6065306597126334).epsilon(1e-12));
    CHECK(stack.at(5, 3, 2) == doctest::Approx(0.6065306597126334).epsilon(1e-12));

    CHECK_THROWS_AS(encode_gaussian(coords, 8, 8, 0.0), ParameterError);
    CHECK_THROWS_AS(encode_gaussian(coords, 8, 8, -1.0), ParameterError);
}

TEST_CASE("encode_gaussian of an out-of-grid landmark stays monotone in distance") {
    LandmarkSet coords = all_at({-7.5, -3.0});
    const auto stack = encode_gaussian(coords, 6, 6, 2.0);
    const double d_min2 = 7.5 * 7.5 + 3.0 * 3.0;
    double prev = 1.0;
    for (int x = 0; x < 6; ++x) {
        const double v = stack.at(0, x, 0);
        CHECK(v < std::exp(-d_min2 / 8.0) + 1e-15);
        CHECK(v <= prev);  // moving away along the row
        prev = v;
    }
}

TEST_CASE("decode_argmax ties break to lowest row then column") {
    auto stack = HeatmapStack::zeros(6, 6, kNumLandmarks, HeatmapRole::Logits);

    SUBCASE("single Gaussian peak decodes to the nearest pixel") {
        const auto encoded = encode_gaussian(all_at({2.4, 3.6}), 8, 8, 2.0);
        const auto decoded = decode_argmax(encoded);
        CHECK(decoded[LandmarkId::CP] == Point2{2.0, 4.0});
    }
    SUBCASE("constant channel gives (0,0)") {
        const auto decoded = decode_argmax(stack);
        CHECK(decoded[LandmarkId::AP] == Point2{0.0, 0.0});
    }
    SUBCASE("equal maxima at (3,1) and (1,3): lowest row wins") {
        stack.at(0, 3, 1) = 5.0;
        stack.at(0, 1, 3) = 5.0;
        const auto decoded = decode_argmax(stack);
        CHECK(decoded[LandmarkId::CP] == Point2{3.0, 1.0});
    }
}

TEST_CASE("softmax probabilities: frozen 1x2 example") {
    const std::vector<double> h = {0.0, 0.1};
    const auto map = softmax_probabilities(h, 2, 1, 0.1);
    // Eq: [1/(1+e), e/(1+e)]
    CHECK(map.values[0] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(map.values[1] == doctest::Approx(0.7310585786300049).epsilon(1e-12));

    const auto uniform = softmax_probabilities({std::vector<double>{0.0, 0.0}}, 2, 1, 7.0);
    CHECK(uniform.values[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(uniform.values[1] == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(softmax_probabilities(h, 2, 1, 0.0), ParameterError);
    CHECK_THROWS_AS(softmax_probabilities(h, 2, 1, -0.5), ParameterError);
    const std::vector<double> bad = {0.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(softmax_probabilities(bad, 2, 1, 0.1), ValidationError);
}

TEST_CASE("softmax shift invariance at +1000 on the 1x2 grid") {
    const std::vector<double> h = {0.0, 0.1};
    const std::vector<double> shifted = {1000.0, 1000.1};
    const auto a = softmax_probabilities(h, 2, 1, 0.1);
    const auto b = softmax_probabilities(shifted, 2, 1, 0.1);
    for (size_t i = 0; i < a.values.size(); ++i) {
        CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);
    }
}

TEST_CASE("softmax normalizes to 1 within 1e-12 on random grids") {
    Xoshiro256pp rng(2024);
    for (const int side : {3, 17, 64, 128}) {
        const auto logits = random_logits(rng, side * side);
        for (const double t : {1.0, 0.5, 0.1}) {
            const auto map = softmax_probabilities(logits, side, side, t);
            double sum = 0.0;
            for (double v : map.values) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("soft_argmax frozen examples and bounds") {
    SUBCASE("uniform grid decodes to the centroid") {
        const std::vector<double> h(12, 3.25);
        const Point2 p = soft_argmax(h, 4, 3, 0.7);
        CHECK(p.x == doctest::Approx(1.5).epsilon(1e-12));
        CHECK(p.y == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("1x2 grid example") {
        const std::vector<double> h = {0.0, 0.1};
        const Point2 p = soft_argmax(h, 2, 1, 0.1);
        CHECK(p.x == doctest::Approx(0.7310585786300049).epsilon(1e-12));
        CHECK(p.y == 0.0);
    }
    SUBCASE("always inside the pixel hull") {
        Xoshiro256pp rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const auto logits = random_logits(rng, 16 * 9);
            const Point2 p = soft_argmax(logits, 16, 9, 0.1);
            CHECK(p.x >= 0.0);
            CHECK(p.x <= 15.0);
            CHECK(p.y >= 0.0);
            CHECK(p.y <= 8.0);
        }
    }
}

TEST_CASE("soft_argmax shift invariance within 1e-10") {
    Xoshiro256pp rng(31);
    for (const double c : {1.5, -3.25, 10.0, 100.0}) {
        const auto logits = random_logits(rng, 48 * 32);
        auto shifted = logits;
        for (auto& v : shifted) v += c;
        const Point2 a = soft_argmax(logits, 48, 32, 0.1);
        const Point2 b = soft_argmax(shifted, 48, 32, 0.1);
        CHECK(std::abs(a.x - b.x) <= 1e-10);
        CHECK(std::abs(a.y - b.y) <= 1e-10);
    }
}

TEST_CASE("soft_argmax converges to argmax as T falls, margin >= 1") {
    Xoshiro256pp rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        auto logits = random_logits(rng, 32 * 32);
        // Plant the maximum off-center with margin 1 over the runner-up.
        const int px = 3 + static_cast<int>(rng.uniform01() * 8);
        const int py = 20 + static_cast<int>(rng.uniform01() * 8);
        double max_other = -1e300;
        for (double v : logits) max_other = std::max(max_other, v);
        logits[static_cast<size_t>(py) * 32 + px] = max_other + 1.0 + rng.uniform01();

        const Point2 hard = argmax_point(logits, 32, 32);
        double prev = std::numeric_limits<double>::infinity();
        for (const double t : {1.0, 0.5, 0.1, 0.01}) {
            const Point2 soft = soft_argmax(logits, 32, 32, t);
            const double dist = std::hypot(soft.x - hard.x, soft.y - hard.y);
            CHECK(dist <= prev + 1e-12);
            prev = dist;
        }
        CHECK(prev <= 1e-6);
    }
}

TEST_CASE("soft_argmax_jacobian matches the closed form and finite differences") {
    SUBCASE("1x2 frozen example") {
        const std::vector<double> h = {0.0, 0.1};
        const auto jac = soft_argmax_jacobian(h, 2, 1, 0.1);
        CHECK(jac.dx[1] == doctest::Approx(1.9661193324148185).epsilon(1e-12));
        // Central difference cross-check, step 1e-5.
        std::vector<double> probe = h;
        probe[1] = 0.1 + 1e-5;
        const double up = soft_argmax(probe, 2, 1, 0.1).x;
        probe[1] = 0.1 - 1e-5;
        const double down = soft_argmax(probe, 2, 1, 0.1).x;
        CHECK(jac.dx[1] == doctest::Approx((up - down) / 2e-5).epsilon(1e-8));
    }
    SUBCASE("row sums vanish (shift invariance)") {
        Xoshiro256pp rng(8);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> logits(24 * 24);
            for (auto& v : logits) v = rng.uniform(-10.0, 10.0);
            const auto jac = soft_argmax_jacobian(logits, 24, 24, 0.1);
            double sum_x = 0.0;
            double sum_y = 0.0;
            for (size_t i = 0; i < jac.dx.size(); ++i) {
                sum_x += jac.dx[i];
                sum_y += jac.dy[i];
            }
            CHECK(std::abs(sum_x) <= 1e-10);
            CHECK(std::abs(sum_y) <= 1e-10);
        }
    }
    SUBCASE("uniform symmetric grid has zero row sum exactly") {
        const std::vector<double> logits(5 * 5, 0.25);
        const auto jac = soft_argmax_jacobian(logits, 5, 5, 0.1);
        double sum_x = 0.0;
        for (double v : jac.dx) sum_x += v;
        CHECK(std::abs(sum_x) <= 1e-14);
    }
}

TEST_CASE("GHMP container round-trips bit-exactly and rejects junk") {
    Xoshiro256pp rng(4242);
    auto stack = HeatmapStack::zeros(7, 5, kNumLandmarks, HeatmapRole::Probabilities);
    for (auto& v : stack.values) v = rng.normal();

    const std::string bytes = ghmp_bytes(stack);
    const auto parsed = parse_ghmp(bytes);
    CHECK(parsed.width == 7);
    CHECK(parsed.height == 5);
    CHECK(parsed.channels == kNumLandmarks);
    CHECK(parsed.role == HeatmapRole::Probabilities);
    CHECK(parsed.values == stack.values);

    CHECK_THROWS_AS(parse_ghmp("nope"), ParseError);
    CHECK_THROWS_AS(parse_ghmp(bytes.substr(0, bytes.size() - 3)), ParseError);
    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_AS(parse_ghmp(wrong_magic), ParseError);
}

TEST_CASE("lattice_scale is uniform and identity for equal dims") {
    CHECK(lattice_scale(957, 555, 957, 555) == 1.0);
    CHECK(lattice_scale(957, 555, 64, 64) == doctest::Approx(64.0 / 957.0).epsilon(1e-15));
    CHECK_THROWS_AS(lattice_scale(0, 5, 4, 4), ParameterError);
}
