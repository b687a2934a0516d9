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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "planlab/advantage.hpp"
#include "planlab/policy.hpp"
#include "planlab/reward.hpp"

namespace planlab {

/// 0-100 closed-loop composite: a hard safety gate (collision-free, on-road,
/// TTC above threshold at every step) times the weighted soft-score mean.
struct CompositeScore {
    std::vector<double> per_scenario;      // 100 * gate * soft_mean
    std::vector<std::uint8_t> safety_gate;
    std::vector<double> soft_mean;
    double aggregate{0.0};
};

CompositeScore composite_score(std::span<const RewardBreakdown> breakdowns,
                               const RewardConfig& cfg);

struct GroupSafetyLabel {
    int group_id{0};
    bool is_unsafe{false};
};

/// A group is unsafe iff any rollout in it violates any safety bit at any step.
bool breakdowns_mark_unsafe(std::span<const RewardBreakdown> group_breakdowns);

/// Histogram summary of |A^| per safety label (log-spaced bins).
struct AdvantageDistribution {
    struct LabelSummary {
        std::string label;  // "safe" or "unsafe"
        std::vector<double> bin_edges;  // 51 edges for 50 bins
        std::vector<int> counts;
        double median{0.0};
        double max{0.0};
        std::size_t samples{0};
    };
    std::vector<LabelSummary> labels;  // omitted when a label has no groups
};

AdvantageDistribution advantage_distribution(std::span<const Mat> group_rewards,
                                             std::span<const GroupSafetyLabel> labels,
                                             AdvantageMode mode, double sigma_floor,
                                             double scaling_c);

/// (#unsafe groups) / (#groups); empty input yields 0.
double unsafe_ratio(std::span<const GroupSafetyLabel> labels);

struct PassAtKCurve {
    std::vector<double> pass_at;  // index k-1 -> pass@k, k = 1..k_max
};

/// Samples k_max temperature-1 rollouts per scenario under the frozen world
/// model and applies the unbiased combinatorial pass@k estimator. Success
/// means drivable, collision-free, comfortable and speed-compliant (overspeed
/// integral below a small tolerance).
PassAtKCurve pass_at_k(const PolicyNet& net, const PolicyParams& params,
                       const PolicyParams& world_params, std::span<const Scenario> scenarios,
                       const VocabularySet& vocabs, int k_max, std::uint64_t seed,
                       const RewardConfig& cfg, int num_threads = 0);

/// Pass/fail rule shared by pass_at_k; exposed for tests.
bool rollout_passes(const RewardBreakdown& rb, double overspeed_tolerance_m,
                    double max_overspeed_integral);

}  // namespace planlab
