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

#include "planlab/advantage.hpp"

#include <algorithm>
#include <cmath>

namespace planlab {

namespace {

AdvantageTensor shape_centered(const Mat& rewards, double denom, double mean, double stddev) {
    AdvantageTensor out;
    out.shaped = Mat(rewards.rows, rewards.cols);
    out.advantages = Mat(rewards.rows, rewards.cols);
    out.group_mean = mean;
    out.group_std = stddev;
    for (std::size_t g = 0; g < rewards.rows; ++g) {
        for (std::size_t t = 0; t < rewards.cols; ++t) {
            out.shaped.at(g, t) = (rewards.at(g, t) - mean) / denom;
        }
        double running = 0.0;
        for (std::size_t t = rewards.cols; t-- > 0;) {
            running += out.shaped.at(g, t);
            out.advantages.at(g, t) = running;
        }
    }
    return out;
}

}  // namespace

AdvantageTensor shape_rewards_grpo(const Mat& rewards, double sigma_floor) {
    if (rewards.rows < 2) throw std::invalid_argument("shape_rewards_grpo: G must be >= 2");
    if (sigma_floor <= 0.0) throw std::invalid_argument("shape_rewards_grpo: sigma_floor must be > 0");
    const double n = static_cast<double>(rewards.rows * rewards.cols);
    double mean = 0.0;
    for (double v : rewards.data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : rewards.data) var += (v - mean) * (v - mean);
    var /= n;  // population variance
    const double stddev = std::sqrt(var);
    return shape_centered(rewards, std::max(stddev, sigma_floor), mean, stddev);
}

AdvantageTensor shape_rewards_vdgrpo(const Mat& rewards, double scaling_c) {
    if (scaling_c <= 0.0) throw std::invalid_argument("shape_rewards_vdgrpo: c must be > 0");
    const double n = static_cast<double>(rewards.rows * rewards.cols);
    double mean = 0.0;
    for (double v : rewards.data) mean += v;
    mean /= n;
    AdvantageTensor out = shape_centered(rewards, scaling_c, mean, 0.0);
    out.group_std = 0.0;
    return out;
}

}  // namespace planlab
