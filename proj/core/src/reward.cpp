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

#include "planlab/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace planlab {

void RewardConfig::validate() const {
    if (weight_comfort < 0.0 || weight_ttc < 0.0 || weight_speed < 0.0 || weight_progress < 0.0) {
        throw std::invalid_argument("RewardConfig: weights must be >= 0");
    }
    if (max_abs_lon_accel <= 0.0 || max_abs_lat_accel <= 0.0 || max_abs_yaw_rate <= 0.0 ||
        max_abs_yaw_accel <= 0.0 || ttc_threshold <= 0.0 || ttc_horizon <= 0.0 ||
        ttc_dt_sub <= 0.0 || max_overspeed_integral <= 0.0) {
        throw std::invalid_argument("RewardConfig: thresholds must be > 0");
    }
}

bool SafetyBits::all_safe() const {
    for (std::size_t t = 0; t < drivable.size(); ++t) {
        if (!drivable[t] || !dynamic_collision[t] || !static_collision[t]) return false;
    }
    return true;
}

SafetyBits safety_indicators(const EvalTrack& ego, const SceneMap& map,
                             std::span<const EvalTrack> others) {
    if (ego.poses.size() < 2) throw std::invalid_argument("safety_indicators: no future poses");
    const std::size_t steps = ego.poses.size() - 1;
    for (const EvalTrack& other : others) {
        if (other.poses.size() != ego.poses.size()) {
            throw std::invalid_argument("safety_indicators: trajectory length mismatch");
        }
    }
    SafetyBits bits;
    bits.drivable.resize(steps);
    bits.dynamic_collision.resize(steps);
    bits.static_collision.resize(steps);
    for (std::size_t t = 1; t <= steps; ++t) {
        const Pose2& pose = ego.poses[t];
        const OrientedBox ego_box{pose, ego.dims};
        bits.drivable[t - 1] = box_in_drivable(pose, ego.dims, map.drivable) ? 1 : 0;
        std::uint8_t dyn = 1;
        for (const EvalTrack& other : others) {
            if (boxes_intersect(ego_box, {other.poses[t], other.dims})) {
                dyn = 0;
                break;
            }
        }
        bits.dynamic_collision[t - 1] = dyn;
        std::uint8_t stat = 1;
        for (const StaticObstacle& obs : map.static_obstacles) {
            if (boxes_intersect(ego_box, {obs.pose, obs.dims})) {
                stat = 0;
                break;
            }
        }
        bits.static_collision[t - 1] = stat;
    }
    return bits;
}

double comfort_score(std::span<const Pose2> poses, double dt, const RewardConfig& cfg) {
    if (poses.size() < 3) throw std::invalid_argument("comfort_score: needs >= 3 poses");
    const std::size_t n = poses.size();
    std::vector<Vec2> vel(n - 1);
    std::vector<double> yaw_rate(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        vel[i] = (poses[i + 1].position() - poses[i].position()) * (1.0 / dt);
        yaw_rate[i] = wrap_angle(poses[i + 1].heading - poses[i].heading) / dt;
        if (std::abs(yaw_rate[i]) > cfg.max_abs_yaw_rate) return 0.0;
    }
    for (std::size_t i = 0; i + 1 < vel.size(); ++i) {
        const Vec2 accel = (vel[i + 1] - vel[i]) * (1.0 / dt);
        // Decompose in the heading frame at the shared pose.
        const Pose2& at = poses[i + 1];
        const double lon = accel.dot(at.forward());
        const double lat = accel.dot(at.left());
        if (std::abs(lon) > cfg.max_abs_lon_accel) return 0.0;
        if (std::abs(lat) > cfg.max_abs_lat_accel) return 0.0;
        const double yaw_accel = (yaw_rate[i + 1] - yaw_rate[i]) / dt;
        if (std::abs(yaw_accel) > cfg.max_abs_yaw_accel) return 0.0;
    }
    return 1.0;
}

std::vector<double> ttc_score(const EvalTrack& ego, std::span<const EvalTrack> others, double dt,
                              const RewardConfig& cfg) {
    if (ego.poses.size() < 2) throw std::invalid_argument("ttc_score: no future poses");
    const std::size_t steps = ego.poses.size() - 1;
    std::vector<double> score(steps, 1.0);
    if (others.empty()) return score;
    for (std::size_t t = 1; t <= steps; ++t) {
        const Vec2 ego_vel = (ego.poses[t].position() - ego.poses[t - 1].position()) * (1.0 / dt);
        MovingBox ego_box{ego.poses[t], ego.dims, ego_vel};
        std::vector<MovingBox> moving;
        moving.reserve(others.size());
        for (const EvalTrack& other : others) {
            const Vec2 v = (other.poses[t].position() - other.poses[t - 1].position()) * (1.0 / dt);
            moving.push_back({other.poses[t], other.dims, v});
        }
        const double ttc = time_to_collision(ego_box, moving, cfg.ttc_horizon, cfg.ttc_dt_sub);
        score[t - 1] = ttc > cfg.ttc_threshold ? 1.0 : 0.0;
    }
    return score;
}

double speed_score(std::span<const Pose2> poses, double speed_limit, double dt,
                   const RewardConfig& cfg) {
    if (speed_limit <= 0.0) throw std::invalid_argument("speed_score: speed_limit must be > 0");
    if (poses.size() < 2) return 1.0;
    double overspeed = 0.0;
    for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
        const double v = (poses[i + 1].position() - poses[i].position()).norm() / dt;
        overspeed += std::max(0.0, v - speed_limit) * dt;
    }
    return std::clamp(1.0 - overspeed / cfg.max_overspeed_integral, 0.0, 1.0);
}

namespace {

double monotone_progress(std::span<const Pose2> poses, const Polyline& centerline) {
    if (poses.empty()) return 0.0;
    double start = project_to_centerline(poses[0].position(), centerline).s;
    double running = start;
    for (std::size_t i = 1; i < poses.size(); ++i) {
        const double s = project_to_centerline(poses[i].position(), centerline).s;
        running = std::max(running, s);
    }
    return running - start;
}

}  // namespace

double progress_score(std::span<const Pose2> ego_poses, std::span<const Pose2> expert_poses,
                      const Polyline& centerline) {
    constexpr double kMinExpertProgress = 1e-3;  // meters
    const double ego_progress = monotone_progress(ego_poses, centerline);
    const double expert_progress = monotone_progress(expert_poses, centerline);
    return std::clamp(ego_progress / std::max(expert_progress, kMinExpertProgress), 0.0, 1.0);
}

std::vector<double> total_reward(const SafetyBits& bits, double comfort,
                                 std::span<const double> ttc, double speed, double progress,
                                 const RewardConfig& cfg) {
    const std::size_t steps = bits.drivable.size();
    if (ttc.size() != steps) throw std::invalid_argument("total_reward: ttc length mismatch");
    const double denom = cfg.normalize_by_weight_sum ? cfg.weight_sum() : 1.0;
    std::vector<double> total(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double gate = (bits.drivable[t] && bits.dynamic_collision[t] && bits.static_collision[t])
                                ? 1.0
                                : 0.0;
        const double soft = cfg.weight_comfort * comfort + cfg.weight_ttc * ttc[t] +
                            cfg.weight_speed * speed + cfg.weight_progress * progress;
        total[t] = gate * soft / denom;
    }
    return total;
}

RewardBreakdown evaluate_rewards(const EvalTrack& ego, const SceneMap& map,
                                 std::span<const EvalTrack> others,
                                 std::span<const Pose2> expert_poses, double dt,
                                 const RewardConfig& cfg) {
    cfg.validate();
    RewardBreakdown rb;
    rb.bits = safety_indicators(ego, map, others);
    rb.comfort = comfort_score(ego.poses, dt, cfg);
    rb.ttc = ttc_score(ego, others, dt, cfg);
    rb.speed = speed_score(ego.poses, map.speed_limit, dt, cfg);
    rb.progress = progress_score(ego.poses, expert_poses, map.route_centerline);
    rb.total = total_reward(rb.bits, rb.comfort, rb.ttc, rb.speed, rb.progress, cfg);
    return rb;
}

}  // namespace planlab
