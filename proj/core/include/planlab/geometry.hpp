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

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace planlab {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Vec2 {
    double x{0.0};
    double y{0.0};

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
};

/// 2D pose; heading in (-pi, pi], counter-clockwise from +x.
struct Pose2 {
    double x{0.0};
    double y{0.0};
    double heading{0.0};

    Vec2 position() const { return {x, y}; }
    Vec2 forward() const { return {std::cos(heading), std::sin(heading)}; }
    Vec2 left() const { return {-std::sin(heading), std::cos(heading)}; }

    /// Maps a point from this pose's local frame to the world frame.
    Vec2 to_world(Vec2 local) const {
        const double c = std::cos(heading), s = std::sin(heading);
        return {x + c * local.x - s * local.y, y + s * local.x + c * local.y};
    }
    /// Maps a world point into this pose's local frame.
    Vec2 to_local(Vec2 world) const {
        const double c = std::cos(heading), s = std::sin(heading);
        const double dx = world.x - x, dy = world.y - y;
        return {c * dx + s * dy, -s * dx + c * dy};
    }
};

struct BoxDims {
    double length{0.0};
    double width{0.0};

    bool valid() const { return length > 0.0 && width > 0.0; }
};

struct OrientedBox {
    Pose2 pose;
    BoxDims dims;
};

/// World-frame corners in order FL, FR, RR, RL; centroid equals (pose.x, pose.y).
std::array<Vec2, 4> oriented_box_corners(const Pose2& pose, const BoxDims& dims);

/// Separating-axis test on two oriented rectangles. Touching counts as overlap.
bool boxes_intersect(const OrientedBox& a, const OrientedBox& b);

/// Open polyline with precomputed cumulative arclength.
class Polyline {
public:
    Polyline() = default;
    /// Throws std::invalid_argument on < 2 vertices or repeated consecutive vertices.
    explicit Polyline(std::vector<Vec2> vertices);

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<double>& cumulative_arclength() const { return cumlen_; }
    double total_length() const { return cumlen_.empty() ? 0.0 : cumlen_.back(); }

    /// Point at arclength s (clamped to [0, total]).
    Vec2 point_at(double s) const;
    /// Unit tangent of the segment containing arclength s.
    Vec2 tangent_at(double s) const;

private:
    std::vector<Vec2> vertices_;
    std::vector<double> cumlen_;
};

struct CenterlineProjection {
    double s{0.0};  // arclength of the nearest point
    double d{0.0};  // signed lateral offset, positive left of travel direction
};

/// Globally nearest point on the polyline; ties broken toward smaller s.
CenterlineProjection project_to_centerline(Vec2 p, const Polyline& line);

/// Simple ring. Orientation is validated on construction (CCW for outer
/// rings, CW for holes as flagged by the caller).
class Polygon {
public:
    Polygon() = default;
    /// Throws std::invalid_argument on < 3 vertices, wrong orientation, or
    /// self-intersection.
    explicit Polygon(std::vector<Vec2> ring, bool expect_ccw = true);

    const std::vector<Vec2>& vertices() const { return vertices_; }
    double signed_area() const;
    /// Winding-number containment; boundary points count as inside.
    bool contains(Vec2 p) const;

private:
    std::vector<Vec2> vertices_;
};

/// Drivable region: CCW outer ring with optional CW holes.
struct DrivableArea {
    Polygon outer;
    std::vector<Polygon> holes;

    /// Inside the outer ring and outside every hole.
    bool contains(Vec2 p) const;
};

/// True iff all 4 box corners are contained in the drivable area.
bool box_in_drivable(const Pose2& pose, const BoxDims& dims, const DrivableArea& area);

struct MovingBox {
    Pose2 pose;
    BoxDims dims;
    Vec2 velocity;
};

/// Smallest k*dt_sub <= t_max at which constant-velocity propagation of all
/// boxes intersects the ego box; +infinity if none. k starts at 0, so an
/// initial overlap reports 0.
double time_to_collision(const MovingBox& ego, std::span<const MovingBox> others,
                         double t_max, double dt_sub);

}  // namespace planlab
