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

#include "planlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "planlab/concurrency.hpp"
#include "planlab/rollout.hpp"

namespace planlab {

CompositeScore composite_score(std::span<const RewardBreakdown> breakdowns,
                               const RewardConfig& cfg) {
    if (breakdowns.empty()) throw std::invalid_argument("composite_score: empty input");
    CompositeScore score;
    score.per_scenario.reserve(breakdowns.size());
    double sum = 0.0;
    for (const RewardBreakdown& rb : breakdowns) {
        bool gate = rb.bits.all_safe();
        double ttc_mean = 0.0;
        for (double v : rb.ttc) {
            if (v == 0.0) gate = false;
            ttc_mean += v;
        }
        if (!rb.ttc.empty()) ttc_mean /= static_cast<double>(rb.ttc.size());
        const double soft = (cfg.weight_comfort * rb.comfort + cfg.weight_ttc * ttc_mean +
                             cfg.weight_speed * rb.speed + cfg.weight_progress * rb.progress) /
                            cfg.weight_sum();
        const double s = gate ? 100.0 * soft : 0.0;
        score.safety_gate.push_back(gate ? 1 : 0);
        score.soft_mean.push_back(soft);
        score.per_scenario.push_back(s);
        sum += s;
    }
    score.aggregate = sum / static_cast<double>(breakdowns.size());
    return score;
}

bool breakdowns_mark_unsafe(std::span<const RewardBreakdown> group_breakdowns) {
    for (const RewardBreakdown& rb : group_breakdowns) {
        if (!rb.all_safe()) return true;
    }
    return false;
}

AdvantageDistribution advantage_distribution(std::span<const Mat> group_rewards,
                                             std::span<const GroupSafetyLabel> labels,
                                             AdvantageMode mode, double sigma_floor,
                                             double scaling_c) {
    if (group_rewards.size() != labels.size()) {
        throw std::invalid_argument("advantage_distribution: labels/groups mismatch");
    }
    constexpr int kBins = 50;
    constexpr double kLo = 1e-4;
    constexpr double kHi = 1e2;
    std::vector<double> edges(kBins + 1);
    const double log_lo = std::log10(kLo), log_hi = std::log10(kHi);
    for (int i = 0; i <= kBins; ++i) {
        edges[static_cast<std::size_t>(i)] =
            std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i) / kBins);
    }

    std::vector<double> safe_values, unsafe_values;
    for (std::size_t i = 0; i < group_rewards.size(); ++i) {
        const AdvantageTensor adv = mode == AdvantageMode::kGrpo
                                        ? shape_rewards_grpo(group_rewards[i], sigma_floor)
                                        : shape_rewards_vdgrpo(group_rewards[i], scaling_c);
        auto& sink = labels[i].is_unsafe ? unsafe_values : safe_values;
        for (double v : adv.advantages.data) sink.push_back(std::abs(v));
    }

    AdvantageDistribution dist;
    const auto summarize = [&](const char* name, std::vector<double>& values) {
        if (values.empty()) return;  // label omitted
        AdvantageDistribution::LabelSummary s;
        s.label = name;
        s.bin_edges = edges;
        s.counts.assign(kBins, 0);
        for (double v : values) {
            const auto it = std::upper_bound(edges.begin(), edges.end(), v);
            int bin = static_cast<int>(std::distance(edges.begin(), it)) - 1;
            bin = std::clamp(bin, 0, kBins - 1);
            ++s.counts[static_cast<std::size_t>(bin)];
        }
        std::sort(values.begin(), values.end());
        s.samples = values.size();
        s.max = values.back();
        const std::size_t mid = values.size() / 2;
        s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
        dist.labels.push_back(std::move(s));
    };
    summarize("safe", safe_values);
    summarize("unsafe", unsafe_values);
    return dist;
}

double unsafe_ratio(std::span<const GroupSafetyLabel> labels) {
    if (labels.empty()) return 0.0;
    std::size_t unsafe = 0;
    for (const GroupSafetyLabel& l : labels) {
        if (l.is_unsafe) ++unsafe;
    }
    return static_cast<double>(unsafe) / static_cast<double>(labels.size());
}

bool rollout_passes(const RewardBreakdown& rb, double overspeed_tolerance_m,
                    double max_overspeed_integral) {
    if (!rb.all_safe()) return false;
    if (rb.comfort < 1.0) return false;
    // speed = clamp(1 - O / max, 0, 1), so O <= tol means speed >= 1 - tol/max.
    return rb.speed >= 1.0 - overspeed_tolerance_m / max_overspeed_integral;
}

PassAtKCurve pass_at_k(const PolicyNet& net, const PolicyParams& params,
                       const PolicyParams& world_params, std::span<const Scenario> scenarios,
                       const VocabularySet& vocabs, int k_max, std::uint64_t seed,
                       const RewardConfig& cfg, int num_threads) {
    if (k_max < 1) throw std::invalid_argument("pass_at_k: k_max must be >= 1");
    constexpr double kOverspeedToleranceM = 0.5;
    std::vector<int> successes(scenarios.size(), 0);
    parallel_for(static_cast<int>(scenarios.size()), num_threads, [&](int i) {
        const Scenario& scenario = scenarios[static_cast<std::size_t>(i)];
        int c = 0;
        for (int j = 0; j < k_max; ++j) {
            SplitRng rng = SplitRng::derive(
                seed, {fnv1a64(scenario.id), fnv1a64("pass-at-k"), static_cast<std::uint64_t>(j)});
            const Rollout r = dual_rollout(net, params, world_params, scenario, vocabs, rng, 1.0, cfg);
            if (rollout_passes(r.rewards, kOverspeedToleranceM, cfg.max_overspeed_integral)) ++c;
        }
        successes[static_cast<std::size_t>(i)] = c;
    });

    PassAtKCurve curve;
    curve.pass_at.resize(static_cast<std::size_t>(k_max), 0.0);
    for (int k = 1; k <= k_max; ++k) {
        double sum = 0.0;
        for (int c : successes) {
            // 1 - C(n-c, k) / C(n, k), computed as a stable product.
            double miss = 1.0;
            for (int l = 0; l < k; ++l) {
                miss *= static_cast<double>(k_max - c - l) / static_cast<double>(k_max - l);
                if (miss <= 0.0) {
                    miss = 0.0;
                    break;
                }
            }
            sum += 1.0 - miss;
        }
        curve.pass_at[static_cast<std::size_t>(k - 1)] =
            scenarios.empty() ? 0.0 : sum / static_cast<double>(scenarios.size());
    }
    return curve;
}

}  // namespace planlab
