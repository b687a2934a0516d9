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

#include "oracles.hpp"
#include "planlab/geometry.hpp"
#include "planlab/random.hpp"

using namespace planlab;

TEST_CASE("oriented_box_corners: axis-aligned case") {
    const auto c = oriented_box_corners({0, 0, 0}, {4, 2});
    CHECK(c[0].x == doctest::Approx(2.0));
    CHECK(c[0].y == doctest::Approx(1.0));
    CHECK(c[1].x == doctest::Approx(2.0));
    CHECK(c[1].y == doctest::Approx(-1.0));
    CHECK(c[2].x == doctest::Approx(-2.0));
    CHECK(c[2].y == doctest::Approx(-1.0));
    CHECK(c[3].x == doctest::Approx(-2.0));
    CHECK(c[3].y == doctest::Approx(1.0));
}

TEST_CASE("oriented_box_corners: 90-degree rotation") {
    const auto c = oriented_box_corners({0, 0, kPi / 2}, {4, 2});
    CHECK(c[0].x == doctest::Approx(-1.0));
    CHECK(c[0].y == doctest::Approx(2.0));
    CHECK(c[1].x == doctest::Approx(1.0));
    CHECK(c[1].y == doctest::Approx(2.0));
    CHECK(c[2].x == doctest::Approx(1.0));
    CHECK(c[2].y == doctest::Approx(-2.0));
    CHECK(c[3].x == doctest::Approx(-1.0));
    CHECK(c[3].y == doctest::Approx(-2.0));
}

TEST_CASE("oriented_box_corners: square symmetry and centroid") {
    const auto c = oriented_box_corners({1, 1, kPi / 4}, {2, 2});
    Vec2 centroid{0, 0};
    for (const Vec2& p : c) {
        CHECK((p - Vec2{1, 1}).norm() == doctest::Approx(std::sqrt(2.0)));
        centroid = centroid + p * 0.25;
    }
    CHECK(centroid.x == doctest::Approx(1.0));
    CHECK(centroid.y == doctest::Approx(1.0));
}

TEST_CASE("boxes_intersect: trivial cases") {
    const OrientedBox a{{0, 0, 0}, {4, 2}};
    CHECK(boxes_intersect(a, a));
    CHECK_FALSE(boxes_intersect(a, {{10, 0, 0}, {4, 2}}));
    CHECK(boxes_intersect(a, {{3.9, 0, 0}, {4, 2}}));
    // Touching counts as overlap.
    CHECK(boxes_intersect(a, {{4.0, 0, 0}, {4, 2}}));
}

TEST_CASE("boxes_intersect: symmetry and sampling oracle on random pairs") {
    SplitRng rng(20260801);
    int checked = 0;
    for (int i = 0; i < 10000; ++i) {
        const OrientedBox a{{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)},
                            {rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0)}};
        const OrientedBox b{{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)},
                            {rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0)}};
        const bool hit = boxes_intersect(a, b);
        CHECK(hit == boxes_intersect(b, a));
        CHECK(hit == oracle::boxes_overlap_sampling(a, b));
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("box_in_drivable: trivial containment") {
    DrivableArea area;
    area.outer = Polygon({{-50, -50}, {50, -50}, {50, 50}, {-50, 50}});
    CHECK(box_in_drivable({0, 0, 0.3}, {4, 2}, area));
    CHECK_FALSE(box_in_drivable({49, 0, 0}, {4, 2}, area));
}

TEST_CASE("box_in_drivable: holes exclude boxes") {
    DrivableArea area;
    area.outer = Polygon({{-50, -50}, {50, -50}, {50, 50}, {-50, 50}});
    area.holes.push_back(Polygon({{-5, -5}, {-5, 5}, {5, 5}, {5, -5}}, /*expect_ccw=*/false));
    CHECK_FALSE(box_in_drivable({0, 0, 0}, {4, 2}, area));
    CHECK(box_in_drivable({20, 0, 0}, {4, 2}, area));
}

TEST_CASE("point containment agrees with ray-casting oracle") {
    // Non-convex ring to exercise winding corners.
    const std::vector<Vec2> ring = {{0, 0}, {10, 0}, {10, 4}, {6, 4}, {6, 2},
                                    {4, 2}, {4, 6},  {10, 6}, {10, 10}, {0, 10}};
    const Polygon poly(ring);
    SplitRng rng(42);
    for (int i = 0; i < 1000; ++i) {
        const Vec2 p{rng.uniform(-2, 12), rng.uniform(-2, 12)};
        CHECK(poly.contains(p) == oracle::point_in_ring_raycast(p, ring));
    }
}

TEST_CASE("box_in_drivable agrees with ray-cast corner oracle on random boxes") {
    DrivableArea area;
    const std::vector<Vec2> ring = {{-30, -10}, {30, -10}, {30, 10}, {-30, 10}};
    area.outer = Polygon(ring);
    SplitRng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Pose2 pose{rng.uniform(-32, 32), rng.uniform(-12, 12), rng.uniform(-kPi, kPi)};
        const BoxDims dims{rng.uniform(1.0, 5.0), rng.uniform(0.8, 2.5)};
        bool oracle_inside = true;
        for (const Vec2& c : oriented_box_corners(pose, dims)) {
            if (!oracle::point_in_ring_raycast(c, ring)) oracle_inside = false;
        }
        CHECK(box_in_drivable(pose, dims, area) == oracle_inside);
    }
}

TEST_CASE("project_to_centerline: straight segment basics") {
    const Polyline line({{0, 0}, {10, 0}});
    SUBCASE("midpoint") {
        const auto proj = project_to_centerline({5, 0}, line);
        CHECK(proj.s == doctest::Approx(5.0));
        CHECK(proj.d == doctest::Approx(0.0));
    }
    SUBCASE("left offset is positive") {
        const auto proj = project_to_centerline({1, 2}, line);
        CHECK(proj.s == doctest::Approx(1.0));
        CHECK(proj.d == doctest::Approx(2.0));
    }
    SUBCASE("right offset is negative") {
        const auto proj = project_to_centerline({3, -1.5}, line);
        CHECK(proj.d == doctest::Approx(-1.5));
    }
}

TEST_CASE("project_to_centerline: dense sampling oracle on a polyline") {
    std::vector<Vec2> pts;
    for (int i = 0; i <= 20; ++i) {
        const double s = 0.5 * i;
        pts.push_back({s, std::sin(0.4 * s)});
    }
    const Polyline line(pts);
    SplitRng rng(99);
    for (int i = 0; i < 60; ++i) {
        const Vec2 p{rng.uniform(0, 10), rng.uniform(-2, 2)};
        const auto proj = project_to_centerline(p, line);
        const double s_dense = oracle::project_s_dense(p, line, 1e-4);
        CHECK(std::abs(proj.s - s_dense) < 1e-3);
    }
}

TEST_CASE("project_to_centerline: (s, d) reconstruction on straight polylines") {
    const Polyline line({{0, 0}, {4, 0}, {10, 0}, {25, 0}});
    SplitRng rng(3);
    for (int i = 0; i < 200; ++i) {
        const Vec2 p{rng.uniform(0.1, 24.9), rng.uniform(-3, 3)};
        const auto proj = project_to_centerline(p, line);
        const Vec2 base = line.point_at(proj.s);
        const Vec2 normal{0, 1};  // left of +x travel
        const Vec2 rec = base + normal * proj.d;
        CHECK((rec - p).norm() < 1e-6);
    }
}

TEST_CASE("time_to_collision: analytic head-on closing") {
    // Bumper-to-bumper gap 20 m, closing 10 m/s -> 2.0 s.
    const MovingBox ego{{0, 0, 0}, {4, 2}, {5, 0}};
    const std::vector<MovingBox> others = {{{24, 0, kPi}, {4, 2}, {-5, 0}}};
    const double ttc = time_to_collision(ego, others, 5.0, 0.1);
    CHECK(ttc == doctest::Approx(2.0).epsilon(0.06));
}

TEST_CASE("time_to_collision: parallel lanes never collide") {
    const MovingBox ego{{0, 0, 0}, {4, 2}, {10, 0}};
    const std::vector<MovingBox> others = {{{0, 5, 0}, {4, 2}, {-10, 0}}};
    CHECK(time_to_collision(ego, others, 10.0, 0.1) == kInfinity);
}

TEST_CASE("time_to_collision: immediate overlap reports zero") {
    const MovingBox ego{{0, 0, 0}, {4, 2}, {0, 0}};
    const std::vector<MovingBox> others = {{{1, 0, 0}, {4, 2}, {0, 0}}};
    CHECK(time_to_collision(ego, others, 1.0, 0.1) == 0.0);
}

TEST_CASE("time_to_collision: monotone nonincreasing in closing speed") {
    double prev = kInfinity;
    for (double closing = 2.0; closing <= 20.0; closing += 2.0) {
        const MovingBox ego{{0, 0, 0}, {4, 2}, {closing / 2, 0}};
        const std::vector<MovingBox> others = {{{30, 0, kPi}, {4, 2}, {-closing / 2, 0}}};
        const double ttc = time_to_collision(ego, others, 60.0, 0.05);
        CHECK(ttc <= prev);
        prev = ttc;
    }
}

TEST_CASE("wrap_angle normalizes into (-pi, pi]") {
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(0.1) == doctest::Approx(0.1));
    CHECK(wrap_angle(2 * kPi + 0.3) == doctest::Approx(0.3));
}

TEST_CASE("Polygon validation rejects degenerate rings") {
    CHECK_THROWS_AS(Polygon({{0, 0}, {1, 0}}), std::invalid_argument);
    // CW ring as outer
    CHECK_THROWS_AS(Polygon({{0, 0}, {0, 1}, {1, 1}, {1, 0}}), std::invalid_argument);
    // Self-intersecting bowtie
    CHECK_THROWS_AS(Polygon({{0, 0}, {2, 2}, {2, 0}, {0, 2}}), std::invalid_argument);
}
