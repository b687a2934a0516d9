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

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace planlab {

/// Dense row-major matrix; rows = rollouts in a group, cols = token steps.
struct Mat {
    std::size_t rows{0};
    std::size_t cols{0};
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class AdvantageMode { kGrpo, kVdGrpo };

/// Shaped rewards and reward-to-go advantages for one rollout group.
struct AdvantageTensor {
    Mat shaped;      // R~ (G x F)
    Mat advantages;  // A^ (G x F), A^_t = sum_{tau>=t} R~_tau
    double group_mean{0.0};
    double group_std{0.0};  // populated in GRPO mode only
};

/// Group-normalized shaping: R~ = (R - mean) / max(std, sigma_floor), with
/// mean/std pooled over all G*F token rewards (population std).
AdvantageTensor shape_rewards_grpo(const Mat& rewards, double sigma_floor);

/// Variance-decoupled shaping: R~ = (R - mean) / c. Preserves absolute reward
/// scale across groups.
AdvantageTensor shape_rewards_vdgrpo(const Mat& rewards, double scaling_c);

}  // namespace planlab
