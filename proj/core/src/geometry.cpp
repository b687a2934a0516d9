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

#include "planlab/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace planlab {

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

std::array<Vec2, 4> oriented_box_corners(const Pose2& pose, const BoxDims& dims) {
    const double hl = 0.5 * dims.length;
    const double hw = 0.5 * dims.width;
    return {pose.to_world({hl, hw}),    // FL
            pose.to_world({hl, -hw}),   // FR
            pose.to_world({-hl, -hw}),  // RR
            pose.to_world({-hl, hw})};  // RL
}

namespace {

// Projects both boxes onto `axis` and reports strict separation.
bool separated_on_axis(Vec2 axis, const std::array<Vec2, 4>& ca, const std::array<Vec2, 4>& cb) {
    double amin = kInfinity, amax = -kInfinity;
    double bmin = kInfinity, bmax = -kInfinity;
    for (int i = 0; i < 4; ++i) {
        const double pa = axis.dot(ca[i]);
        const double pb = axis.dot(cb[i]);
        amin = std::min(amin, pa);
        amax = std::max(amax, pa);
        bmin = std::min(bmin, pb);
        bmax = std::max(bmax, pb);
    }
    return amax < bmin || bmax < amin;
}

}  // namespace

bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
    const auto ca = oriented_box_corners(a.pose, a.dims);
    const auto cb = oriented_box_corners(b.pose, b.dims);
    const Vec2 axes[4] = {a.pose.forward(), a.pose.left(), b.pose.forward(), b.pose.left()};
    for (const Vec2& axis : axes) {
        if (separated_on_axis(axis, ca, cb)) return false;
    }
    return true;
}

Polyline::Polyline(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 2) throw std::invalid_argument("Polyline: needs >= 2 vertices");
    cumlen_.resize(vertices_.size());
    cumlen_[0] = 0.0;
    for (std::size_t i = 1; i < vertices_.size(); ++i) {
        const double seg = (vertices_[i] - vertices_[i - 1]).norm();
        if (seg == 0.0) throw std::invalid_argument("Polyline: repeated consecutive vertex");
        cumlen_[i] = cumlen_[i - 1] + seg;
    }
}

Vec2 Polyline::point_at(double s) const {
    s = std::clamp(s, 0.0, total_length());
    const auto it = std::upper_bound(cumlen_.begin(), cumlen_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cumlen_.begin(), it));
    if (i == 0) i = 1;
    if (i >= vertices_.size()) i = vertices_.size() - 1;
    const double seg_len = cumlen_[i] - cumlen_[i - 1];
    const double t = (s - cumlen_[i - 1]) / seg_len;
    return vertices_[i - 1] + (vertices_[i] - vertices_[i - 1]) * t;
}

Vec2 Polyline::tangent_at(double s) const {
    s = std::clamp(s, 0.0, total_length());
    const auto it = std::upper_bound(cumlen_.begin(), cumlen_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(cumlen_.begin(), it));
    if (i == 0) i = 1;
    if (i >= vertices_.size()) i = vertices_.size() - 1;
    const Vec2 d = vertices_[i] - vertices_[i - 1];
    const double n = d.norm();
    return {d.x / n, d.y / n};
}

CenterlineProjection project_to_centerline(Vec2 p, const Polyline& line) {
    const auto& v = line.vertices();
    const auto& cum = line.cumulative_arclength();
    double best_d2 = kInfinity;
    CenterlineProjection best;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const Vec2 a = v[i];
        const Vec2 b = v[i + 1];
        const Vec2 ab = b - a;
        const double len2 = ab.squared_norm();
        double t = (p - a).dot(ab) / len2;
        t = std::clamp(t, 0.0, 1.0);
        const Vec2 q = a + ab * t;
        const double d2 = (p - q).squared_norm();
        // Strict < keeps the smaller-s candidate on exact ties.
        if (d2 < best_d2) {
            best_d2 = d2;
            const double seg_len = std::sqrt(len2);
            best.s = cum[i] + t * seg_len;
            // Signed offset: positive when p is left of the segment direction.
            best.d = ab.cross(p - a) / seg_len;
        }
    }
    return best;
}

double Polygon::signed_area() const {
    double a2 = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p = vertices_[i];
        const Vec2& q = vertices_[(i + 1) % n];
        a2 += p.cross(q);
    }
    return 0.5 * a2;
}

namespace {

bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
    const auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
        const double v = (q - p).cross(r - p);
        return (v > 0.0) - (v < 0.0);
    };
    const int o1 = orient(a, b, c);
    const int o2 = orient(a, b, d);
    const int o3 = orient(c, d, a);
    const int o4 = orient(c, d, b);
    return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

}  // namespace

Polygon::Polygon(std::vector<Vec2> ring, bool expect_ccw) : vertices_(std::move(ring)) {
    if (vertices_.size() < 3) throw std::invalid_argument("Polygon: needs >= 3 vertices");
    const double area = signed_area();
    if (expect_ccw && area <= 0.0) throw std::invalid_argument("Polygon: outer ring must be CCW");
    if (!expect_ccw && area >= 0.0) throw std::invalid_argument("Polygon: hole ring must be CW");
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            // Adjacent edges share an endpoint; skip them.
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
            if (segments_properly_intersect(vertices_[i], vertices_[(i + 1) % n],
                                            vertices_[j], vertices_[(j + 1) % n])) {
                throw std::invalid_argument("Polygon: self-intersecting ring");
            }
        }
    }
}

bool Polygon::contains(Vec2 p) const {
    // Winding number with boundary points reported as inside.
    const std::size_t n = vertices_.size();
    int winding = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = vertices_[i];
        const Vec2 b = vertices_[(i + 1) % n];
        const double cross = (b - a).cross(p - a);
        if (cross == 0.0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
            std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y)) {
            return true;  // on the boundary
        }
        if (a.y <= p.y) {
            if (b.y > p.y && cross > 0.0) ++winding;
        } else {
            if (b.y <= p.y && cross < 0.0) --winding;
        }
    }
    return winding != 0;
}

bool DrivableArea::contains(Vec2 p) const {
    if (!outer.contains(p)) return false;
    for (const auto& hole : holes) {
        if (hole.contains(p)) return false;
    }
    return true;
}

bool box_in_drivable(const Pose2& pose, const BoxDims& dims, const DrivableArea& area) {
    for (const Vec2& c : oriented_box_corners(pose, dims)) {
        if (!area.contains(c)) return false;
    }
    return true;
}

double time_to_collision(const MovingBox& ego, std::span<const MovingBox> others,
                         double t_max, double dt_sub) {
    if (dt_sub <= 0.0) throw std::invalid_argument("time_to_collision: dt_sub must be > 0");
    if (t_max <= 0.0) throw std::invalid_argument("time_to_collision: t_max must be > 0");
    const int steps = static_cast<int>(std::floor(t_max / dt_sub + 1e-9));
    for (int k = 0; k <= steps; ++k) {
        const double t = k * dt_sub;
        OrientedBox ego_t{{ego.pose.x + ego.velocity.x * t, ego.pose.y + ego.velocity.y * t,
                           ego.pose.heading},
                          ego.dims};
        for (const MovingBox& other : others) {
            OrientedBox other_t{{other.pose.x + other.velocity.x * t,
                                 other.pose.y + other.velocity.y * t, other.pose.heading},
                                other.dims};
            if (boxes_intersect(ego_t, other_t)) return t;
        }
    }
    return kInfinity;
}

}  // namespace planlab
