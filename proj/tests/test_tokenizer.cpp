// Copyright 2026 The Planlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>

#include "planlab/random.hpp"
#include "planlab/tokenizer.hpp"

using namespace planlab;

namespace {

const BoxDims kDims{4.0, 2.0};

std::vector<MotionSegment> random_segments(SplitRng& rng, int n) {
    std::vector<MotionSegment> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back({rng.uniform(0.0, 7.0), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)});
    }
    return out;
}

}  // namespace

TEST_CASE("segment_trajectory: stationary and straight tracks") {
    SUBCASE("stationary") {
        const std::vector<Pose2> poses(5, Pose2{3, 4, 0.7});
        for (const MotionSegment& s : segment_trajectory(std::span<const Pose2>(poses))) {
            CHECK(s.dx == doctest::Approx(0.0));
            CHECK(s.dy == doctest::Approx(0.0));
            CHECK(s.dheading == doctest::Approx(0.0));
        }
    }
    SUBCASE("straight +x at 10 m/s, dt 0.5") {
        std::vector<Pose2> poses;
        for (int i = 0; i < 6; ++i) poses.push_back({5.0 * i, 0, 0});
        const auto segments = segment_trajectory(std::span<const Pose2>(poses));
        CHECK(segments.size() == 5);
        for (const MotionSegment& s : segments) {
            CHECK(s.dx == doctest::Approx(5.0));
            CHECK(s.dy == doctest::Approx(0.0));
            CHECK(s.dheading == doctest::Approx(0.0));
        }
    }
    SUBCASE("fewer than 2 poses yields empty") {
        const std::vector<Pose2> one(1);
        CHECK(segment_trajectory(std::span<const Pose2>(one)).empty());
    }
}

TEST_CASE("segment_trajectory: circular arc matches analytic chord") {
    // Radius 20, speed 10 m/s, dt 0.5 -> dheading = 0.25 rad per step.
    const double radius = 20.0, speed = 10.0, dt = 0.5;
    const double dtheta = speed * dt / radius;
    std::vector<Pose2> poses;
    for (int i = 0; i < 8; ++i) {
        const double a = dtheta * i;
        poses.push_back({radius * std::sin(a), radius * (1 - std::cos(a)), a});
    }
    const double chord = 2.0 * radius * std::sin(dtheta / 2.0);
    for (const MotionSegment& s : segment_trajectory(std::span<const Pose2>(poses))) {
        CHECK(s.dheading == doctest::Approx(0.25));
        CHECK(std::hypot(s.dx, s.dy) == doctest::Approx(chord).epsilon(1e-9));
    }
}

TEST_CASE("corner_distance: identity, rigid translation, re-derivation oracle") {
    SUBCASE("identity") {
        const MotionSegment s{3.0, 0.2, 0.1};
        CHECK(corner_distance(s, s, kDims) == doctest::Approx(0.0));
    }
    SUBCASE("pure translation gives exactly the offset") {
        const MotionSegment a{2.0, 0.5, 0.0};
        const MotionSegment b{3.0, -0.7, 0.0};
        const double expected = std::hypot(3.0 - 2.0, -0.7 - 0.5);
        CHECK(corner_distance(a, b, kDims) == doctest::Approx(expected));
    }
    SUBCASE("matches direct 4-corner computation on random pairs") {
        SplitRng rng(11);
        for (int i = 0; i < 300; ++i) {
            const MotionSegment a{rng.uniform(-3, 7), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)};
            const MotionSegment b{rng.uniform(-3, 7), rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)};
            // Direct recomputation from corner definitions.
            const Pose2 pa{a.dx, a.dy, a.dheading};
            const Pose2 pb{b.dx, b.dy, b.dheading};
            double sum = 0.0;
            const double hl = kDims.length / 2, hw = kDims.width / 2;
            const Vec2 locals[4] = {{hl, hw}, {hl, -hw}, {-hl, -hw}, {-hl, hw}};
            for (const Vec2& l : locals) sum += (pa.to_world(l) - pb.to_world(l)).norm();
            CHECK(corner_distance(a, b, kDims) == doctest::Approx(sum / 4.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("corner_distance is a pseudometric on random triples") {
    SplitRng rng(12);
    for (int i = 0; i < 2000; ++i) {
        const MotionSegment a{rng.uniform(-3, 7), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const MotionSegment b{rng.uniform(-3, 7), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const MotionSegment c{rng.uniform(-3, 7), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double ab = corner_distance(a, b, kDims);
        const double ba = corner_distance(b, a, kDims);
        const double ac = corner_distance(a, c, kDims);
        const double cb = corner_distance(c, b, kDims);
        CHECK(ab >= 0.0);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab <= ac + cb + 1e-9);
    }
}

TEST_CASE("build_vocabulary: one repeated segment collapses to a single token") {
    const std::vector<MotionSegment> segments(100, MotionSegment{2.5, 0.0, 0.0});
    const Vocabulary vocab =
        build_vocabulary(segments, 8, kDims, 1, AgentCategory::kVehicle, 0.5);
    CHECK(vocab.size() == 1);
    CHECK(vocab.disk_radius_eps <= 0.011);
    CHECK(vocabulary_coverage(segments, vocab) == doctest::Approx(1.0));
}

TEST_CASE("build_vocabulary: two well-separated clusters get one token each") {
    SplitRng rng(5);
    std::vector<MotionSegment> segments;
    for (int i = 0; i < 200; ++i) {
        segments.push_back({1.0 + rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0});
        segments.push_back({6.0 + rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), 0.0});
    }
    const Vocabulary vocab = build_vocabulary(segments, 2, kDims, 1, AgentCategory::kVehicle, 0.5);
    CHECK(vocab.size() == 2);
    CHECK(vocabulary_coverage(segments, vocab) == doctest::Approx(1.0));
    // One token near each cluster center.
    const double d0 = std::abs(vocab.tokens[0].segment.dx - 1.0);
    const double d1 = std::abs(vocab.tokens[1].segment.dx - 1.0);
    CHECK(((d0 < 0.1) != (d1 < 0.1)));
}

TEST_CASE("build_vocabulary: 500 random segments, K 64, full coverage at eps") {
    SplitRng rng(6);
    const auto segments = random_segments(rng, 500);
    const Vocabulary vocab = build_vocabulary(segments, 64, kDims, 1, AgentCategory::kVehicle, 0.5);
    CHECK(vocab.size() <= 64);
    CHECK(vocabulary_coverage(segments, vocab) >= 0.99);
    // Every segment within eps of some token is what coverage asserts; check
    // the encode bound explicitly too.
    const auto ids = encode(segments, vocab);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const double d = corner_distance(segments[i],
                                         vocab.tokens[static_cast<std::size_t>(ids[i])].segment, kDims);
        if (d <= vocab.disk_radius_eps + 1e-12) ++covered;
    }
    CHECK(static_cast<double>(covered) / segments.size() >= 0.99);
}

TEST_CASE("build_vocabulary determinism and input validation") {
    SplitRng rng(8);
    const auto segments = random_segments(rng, 300);
    const Vocabulary a = build_vocabulary(segments, 16, kDims, 7, AgentCategory::kVehicle, 0.5);
    const Vocabulary b = build_vocabulary(segments, 16, kDims, 7, AgentCategory::kVehicle, 0.5);
    REQUIRE(a.size() == b.size());
    CHECK(a.disk_radius_eps == b.disk_radius_eps);
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.tokens[static_cast<std::size_t>(i)].segment.dx ==
              b.tokens[static_cast<std::size_t>(i)].segment.dx);
    }
    CHECK_THROWS_AS(build_vocabulary(segments, 0, kDims, 1, AgentCategory::kVehicle, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_vocabulary({}, 4, kDims, 1, AgentCategory::kVehicle, 0.5),
                    std::invalid_argument);
}

TEST_CASE("encode: deterministic, ties break to smaller id, zero token") {
    Vocabulary vocab;
    vocab.category = AgentCategory::kVehicle;
    vocab.ref_dims = kDims;
    vocab.dt = 0.5;
    vocab.disk_radius_eps = 0.5;
    vocab.tokens = {{0, {0, 0, 0}}, {1, {2, 0, 0}}, {2, {2, 0, 0}}};  // 1 and 2 identical
    const std::vector<MotionSegment> segments = {{0, 0, 0}, {2, 0, 0}, {1.9, 0, 0}};
    const auto ids = encode(segments, vocab);
    CHECK(ids == std::vector<int>{0, 1, 1});
    CHECK(encode(segments, vocab) == ids);

    const Vocabulary empty;
    CHECK_THROWS_AS(encode(segments, empty), std::invalid_argument);
}

TEST_CASE("decode: trivial cases and error on bad id") {
    Vocabulary vocab;
    vocab.tokens = {{0, {0, 0, 0}}, {1, {5, 0, 0}}};
    vocab.ref_dims = kDims;
    const Pose2 start{2, 3, 0.5};
    SUBCASE("empty ids") { CHECK(decode(start, {}, vocab).empty()); }
    SUBCASE("zero-motion token x5") {
        const std::vector<int> ids(5, 0);
        for (const Pose2& p : decode(start, ids, vocab)) {
            CHECK(p.x == doctest::Approx(start.x));
            CHECK(p.y == doctest::Approx(start.y));
            CHECK(p.heading == doctest::Approx(start.heading));
        }
    }
    SUBCASE("out of range id") {
        const std::vector<int> bad = {0, 2};
        CHECK_THROWS_AS(decode(start, bad, vocab), std::out_of_range);
    }
}

TEST_CASE("encode/decode: per-step reconstruction within eps, drift bounded by F*eps") {
    SplitRng rng(13);
    // A smooth wavy track.
    std::vector<Pose2> poses;
    Pose2 p{0, 0, 0};
    poses.push_back(p);
    for (int i = 0; i < 16; ++i) {
        const MotionSegment wiggle{4.0 + rng.uniform(-0.5, 0.5), rng.uniform(-0.1, 0.1),
                                   rng.uniform(-0.1, 0.1)};
        p = apply_segment(p, wiggle);
        poses.push_back(p);
    }
    const auto segments = segment_trajectory(std::span<const Pose2>(poses));
    SplitRng rng2(14);
    auto corpus = random_segments(rng2, 400);
    corpus.insert(corpus.end(), segments.begin(), segments.end());
    const Vocabulary vocab = build_vocabulary(corpus, 64, kDims, 2, AgentCategory::kVehicle, 0.5);
    const double eps = vocab.disk_radius_eps;

    const auto ids = encode(segments, vocab);
    // Per-step: decoded single segment within eps (corner distance bound).
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const double d = corner_distance(segments[i],
                                         vocab.tokens[static_cast<std::size_t>(ids[i])].segment, kDims);
        CHECK(d <= eps + 1e-12);
    }
    // Chained decode: final position drift bounded by F * eps (triangle bound;
    // corner distance upper-bounds center displacement only up to rotation
    // effects, so allow a modest factor).
    const auto decoded = decode(poses[0], ids, vocab);
    const double drift = (decoded.back().position() - poses.back().position()).norm();
    CHECK(drift <= 2.0 * static_cast<double>(segments.size()) * eps + 1e-9);
}
