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

// Independent test oracles. Everything here re-derives expected values from
// first principles and deliberately shares no code with the implementation
// paths it checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "planlab/advantage.hpp"
#include "planlab/geometry.hpp"

namespace planlab::oracle {

/// Point-in-oriented-box via the inverse transform.
inline bool point_in_box(Vec2 p, const Pose2& pose, const BoxDims& dims) {
    const Vec2 local = pose.to_local(p);
    return std::abs(local.x) <= 0.5 * dims.length && std::abs(local.y) <= 0.5 * dims.width;
}

/// Dense point-sampling overlap oracle: corners, edge samples and an interior
/// grid of each box tested for membership in the other.
inline bool boxes_overlap_sampling(const OrientedBox& a, const OrientedBox& b, int grid = 48) {
    const auto covered = [&](const OrientedBox& src, const OrientedBox& dst) {
        for (int i = 0; i <= grid; ++i) {
            const double u = (static_cast<double>(i) / grid - 0.5) * src.dims.length;
            for (int j = 0; j <= grid; ++j) {
                const double v = (static_cast<double>(j) / grid - 0.5) * src.dims.width;
                if (point_in_box(src.pose.to_world({u, v}), dst.pose, dst.dims)) return true;
            }
        }
        return false;
    };
    return covered(a, b) || covered(b, a);
}

/// Even-odd ray casting, independent of the winding-number implementation.
inline bool point_in_ring_raycast(Vec2 p, const std::vector<Vec2>& ring) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_int = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_int) inside = !inside;
        }
    }
    return inside;
}

/// Dense arclength sampling projection oracle.
inline double project_s_dense(Vec2 p, const Polyline& line, double step = 1e-4) {
    double best_d2 = kInfinity;
    double best_s = 0.0;
    const double total = line.total_length();
    for (double s = 0.0; s <= total; s += step) {
        const Vec2 q = line.point_at(s);
        const double d2 = (p - q).squared_norm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best_s = s;
        }
    }
    return best_s;
}

/// Brute-force reimplementation of group-relative shaping: direct summation,
/// explicit reward-to-go loops, no shared code with the implementation.
struct BruteShaped {
    std::vector<std::vector<double>> shaped;
    std::vector<std::vector<double>> advantages;
};

inline BruteShaped brute_force_shape(const std::vector<std::vector<double>>& rewards,
                                     bool variance_decoupled, double sigma_floor, double c) {
    const std::size_t g_count = rewards.size();
    const std::size_t f_count = rewards[0].size();
    double sum = 0.0;
    for (const auto& row : rewards) {
        for (double v : row) sum += v;
    }
    const double mean = sum / static_cast<double>(g_count * f_count);
    double denom;
    if (variance_decoupled) {
        denom = c;
    } else {
        double sq = 0.0;
        for (const auto& row : rewards) {
            for (double v : row) sq += (v - mean) * (v - mean);
        }
        const double stddev = std::sqrt(sq / static_cast<double>(g_count * f_count));
        denom = std::max(stddev, sigma_floor);
    }
    BruteShaped out;
    out.shaped.assign(g_count, std::vector<double>(f_count, 0.0));
    out.advantages.assign(g_count, std::vector<double>(f_count, 0.0));
    for (std::size_t g = 0; g < g_count; ++g) {
        for (std::size_t t = 0; t < f_count; ++t) {
            out.shaped[g][t] = (rewards[g][t] - mean) / denom;
        }
        for (std::size_t t = 0; t < f_count; ++t) {
            double acc = 0.0;
            for (std::size_t tau = t; tau < f_count; ++tau) acc += out.shaped[g][tau];
            out.advantages[g][t] = acc;
        }
    }
    return out;
}

/// Central finite differences of a scalar function of a parameter vector.
inline double finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> params, std::size_t coord, double h = 1e-4) {
    params[coord] += h;
    const double hi = f(params);
    params[coord] -= 2.0 * h;
    const double lo = f(params);
    return (hi - lo) / (2.0 * h);
}

}  // namespace planlab::oracle
