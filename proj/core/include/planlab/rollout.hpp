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

#include "planlab/analysis.hpp"
#include "planlab/policy.hpp"
#include "planlab/random.hpp"
#include "planlab/reward.hpp"

namespace planlab {

/// One sampled joint future: tokens and decoded poses for every agent, plus
/// the ego's sampling log-probs/logits and the reward breakdown.
struct Rollout {
    std::vector<std::vector<int>> tokens;         // [agent][t], t = 0..F-1
    std::vector<std::vector<Pose2>> poses;        // [agent][t]
    std::vector<double> ego_log_probs;            // under the sampling policy
    std::vector<std::vector<double>> ego_logits;  // full per-step logits snapshot
    RewardBreakdown rewards;
};

struct RolloutGroup {
    std::string scenario_id;
    std::uint64_t seed{0};
    std::vector<Rollout> rollouts;

    bool is_unsafe() const;
};

/// Closed-loop joint sampling: the ego policy picks agent 0's tokens while the
/// frozen world model predicts every other agent, both conditioned on the full
/// joint history. Non-ego sampling is always temperature 1.
Rollout dual_rollout(const PolicyNet& net, const PolicyParams& ego_params,
                     const PolicyParams& world_params, const Scenario& scenario,
                     const VocabularySet& vocabs, SplitRng& rng, double ego_temperature,
                     const RewardConfig& reward_cfg);

/// G independent dual rollouts (ego temperature 1) with per-rollout RNG
/// streams derived from (seed, scenario id, rollout index).
RolloutGroup sample_group(const PolicyNet& net, const PolicyParams& ego_params,
                          const PolicyParams& world_params, const Scenario& scenario,
                          const VocabularySet& vocabs, int group_size, std::uint64_t seed,
                          const RewardConfig& reward_cfg);

enum class EvalMode { kReplay, kReactive };
EvalMode eval_mode_from_string(const std::string& s);
const char* to_string(EvalMode m);

struct EvalResult {
    std::vector<RewardBreakdown> breakdowns;  // one per scenario
    CompositeScore composite;
};

/// Ego at temperature 0 (top-1). Replay mode plays back ground-truth futures
/// of other agents (tokens quantized, poses exact); reactive mode samples them
/// from the frozen world model.
EvalResult closed_loop_eval(const PolicyNet& net, const PolicyParams& ego_params,
                            const PolicyParams& world_params, std::span<const Scenario> scenarios,
                            const VocabularySet& vocabs, EvalMode mode,
                            const RewardConfig& reward_cfg, std::uint64_t seed,
                            int num_threads = 0);

}  // namespace planlab
