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

#include <span>
#include <vector>

#include "planlab/scenario.hpp"

namespace planlab {

/// Weights and thresholds of the rule-based reward. The weights mirror the
/// evaluation convention (comfort 2, ttc 5, speed 2, progress 1); thresholds
/// are configuration defaults, not ground truth.
struct RewardConfig {
    double weight_comfort{2.0};
    double weight_ttc{5.0};
    double weight_speed{2.0};
    double weight_progress{1.0};

    double max_abs_lon_accel{3.0};   // m/s^2
    double max_abs_lat_accel{4.0};   // m/s^2
    double max_abs_yaw_rate{1.0};    // rad/s
    double max_abs_yaw_accel{2.0};   // rad/s^2

    double ttc_threshold{0.95};      // s
    double ttc_horizon{3.0};         // s
    double ttc_dt_sub{0.1};          // s
    double max_overspeed_integral{10.0};  // m
    bool normalize_by_weight_sum{true};

    double weight_sum() const {
        return weight_comfort + weight_ttc + weight_speed + weight_progress;
    }
    void validate() const;
};

/// Per-step safety bits; 1 = constraint satisfied.
struct SafetyBits {
    std::vector<std::uint8_t> drivable;
    std::vector<std::uint8_t> dynamic_collision;
    std::vector<std::uint8_t> static_collision;

    bool all_safe() const;
};

struct RewardBreakdown {
    SafetyBits bits;
    double comfort{0.0};              // trajectory-level 0/1, broadcast
    std::vector<double> ttc;          // per-step 0/1
    double speed{0.0};                // trajectory-level [0,1], broadcast
    double progress{0.0};             // trajectory-level [0,1], broadcast
    std::vector<double> total;        // R(y_t) per step

    bool all_safe() const { return bits.all_safe(); }
};

/// A trajectory for reward evaluation: the current pose followed by the F
/// future poses (so finite differences at the first future step are defined).
struct EvalTrack {
    BoxDims dims;
    std::vector<Pose2> poses;  // [anchor, f_1 .. f_F]
};

/// Per-step drivable / dynamic-collision / static-collision bits over the F
/// future steps, full bounding boxes, same-step convention for dynamic
/// collisions.
SafetyBits safety_indicators(const EvalTrack& ego, const SceneMap& map,
                             std::span<const EvalTrack> others);

/// 1 iff longitudinal/lateral acceleration, yaw rate and yaw acceleration all
/// stay within thresholds (inclusive) at every step; needs >= 3 poses.
double comfort_score(std::span<const Pose2> poses, double dt, const RewardConfig& cfg);

/// Per-step 0/1: constant-velocity TTC stays above cfg.ttc_threshold.
std::vector<double> ttc_score(const EvalTrack& ego, std::span<const EvalTrack> others, double dt,
                              const RewardConfig& cfg);

/// clamp(1 - overspeed_integral / max_overspeed_integral, 0, 1).
double speed_score(std::span<const Pose2> poses, double speed_limit, double dt,
                   const RewardConfig& cfg);

/// Monotone accumulated forward arclength along the centerline, normalized by
/// the expert's progress. Not an imitation distance.
double progress_score(std::span<const Pose2> ego_poses, std::span<const Pose2> expert_poses,
                      const Polyline& centerline);

/// R(y_t) = (prod of safety bits) * (weighted sum of soft terms), optionally
/// normalized by the weight sum.
std::vector<double> total_reward(const SafetyBits& bits, double comfort,
                                 std::span<const double> ttc, double speed, double progress,
                                 const RewardConfig& cfg);

/// Full rule-based reward for one ego trajectory against concrete agent
/// trajectories. `expert_poses` = [anchor, expert f_1..f_F] for progress
/// normalization.
RewardBreakdown evaluate_rewards(const EvalTrack& ego, const SceneMap& map,
                                 std::span<const EvalTrack> others,
                                 std::span<const Pose2> expert_poses, double dt,
                                 const RewardConfig& cfg);

}  // namespace planlab
