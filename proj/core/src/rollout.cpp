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

#include "planlab/rollout.hpp"

#include <stdexcept>

#include "planlab/concurrency.hpp"

namespace planlab {

bool RolloutGroup::is_unsafe() const {
    for (const Rollout& r : rollouts) {
        if (!r.rewards.all_safe()) return true;
    }
    return false;
}

namespace {

/// Reward evaluation shared by sampled and replayed futures. `others_poses`
/// holds each non-ego agent's future trajectory (length F).
RewardBreakdown rollout_rewards(const Scenario& scenario,
                                const std::vector<Pose2>& ego_future,
                                const std::vector<std::vector<Pose2>>& others_poses,
                                const RewardConfig& cfg) {
    const AgentTrack& ego_track = scenario.ego();
    if (!ego_track.future_gt || ego_track.future_gt->empty()) {
        throw std::invalid_argument("rollout_rewards: ego expert future required for progress");
    }
    EvalTrack ego;
    ego.dims = ego_track.dims;
    ego.poses.reserve(ego_future.size() + 1);
    ego.poses.push_back(ego_track.current_pose());
    ego.poses.insert(ego.poses.end(), ego_future.begin(), ego_future.end());

    std::vector<EvalTrack> others;
    others.reserve(others_poses.size());
    for (std::size_t n = 1; n < scenario.agents.size(); ++n) {
        EvalTrack other;
        other.dims = scenario.agents[n].dims;
        other.poses.reserve(others_poses[n - 1].size() + 1);
        other.poses.push_back(scenario.agents[n].current_pose());
        other.poses.insert(other.poses.end(), others_poses[n - 1].begin(), others_poses[n - 1].end());
        others.push_back(std::move(other));
    }

    std::vector<Pose2> expert;
    expert.reserve(ego_track.future_gt->size() + 1);
    expert.push_back(ego_track.current_pose());
    expert.insert(expert.end(), ego_track.future_gt->begin(), ego_track.future_gt->end());

    return evaluate_rewards(ego, scenario.map, others, expert, scenario.dt, cfg);
}

}  // namespace

Rollout dual_rollout(const PolicyNet& net, const PolicyParams& ego_params,
                     const PolicyParams& world_params, const Scenario& scenario,
                     const VocabularySet& vocabs, SplitRng& rng, double ego_temperature,
                     const RewardConfig& reward_cfg) {
    scenario.validate();
    if (!(ego_params.config == world_params.config)) {
        throw std::invalid_argument("dual_rollout: ego/world model configs differ");
    }
    const SceneEncoding scene = net.encode_scene(scenario, vocabs);
    ad::Tape ego_tape(ego_params.flat.data(), ego_params.flat.size());
    ad::Tape world_tape(world_params.flat.data(), world_params.flat.size());
    SequenceRunner ego_run(net, ego_params, scene, vocabs, ego_tape);
    SequenceRunner world_run(net, world_params, scene, vocabs, world_tape);

    const int n_agents = static_cast<int>(scenario.agents.size());
    const int steps = scenario.horizon;
    Rollout out;
    out.tokens.assign(static_cast<std::size_t>(n_agents), {});
    out.poses.assign(static_cast<std::size_t>(n_agents), {});
    out.ego_log_probs.reserve(static_cast<std::size_t>(steps));
    out.ego_logits.reserve(static_cast<std::size_t>(steps));

    std::vector<int> row(static_cast<std::size_t>(n_agents));
    for (int t = 0; t < steps; ++t) {
        const auto ego_logits = ego_run.next_logits(0);
        const int ego_eff = ego_run.effective_vocab(0);
        const auto ego_view = ego_logits.subspan(0, static_cast<std::size_t>(ego_eff));
        row[0] = sample_token(ego_view, rng, ego_temperature);
        out.ego_log_probs.push_back(ad::log_prob(ego_view, row[0]));
        out.ego_logits.emplace_back(ego_logits.begin(), ego_logits.end());
        for (int n = 1; n < n_agents; ++n) {
            const auto logits = world_run.next_logits(n);
            const int eff = world_run.effective_vocab(n);
            row[static_cast<std::size_t>(n)] =
                sample_token(logits.subspan(0, static_cast<std::size_t>(eff)), rng, 1.0);
        }
        ego_run.push_future_tokens(row);
        world_run.push_future_tokens(row);
        for (int n = 0; n < n_agents; ++n) {
            out.tokens[static_cast<std::size_t>(n)].push_back(row[static_cast<std::size_t>(n)]);
            out.poses[static_cast<std::size_t>(n)].push_back(ego_run.future_poses(n).back());
        }
    }

    std::vector<std::vector<Pose2>> others(out.poses.begin() + 1, out.poses.end());
    out.rewards = rollout_rewards(scenario, out.poses[0], others, reward_cfg);
    return out;
}

RolloutGroup sample_group(const PolicyNet& net, const PolicyParams& ego_params,
                          const PolicyParams& world_params, const Scenario& scenario,
                          const VocabularySet& vocabs, int group_size, std::uint64_t seed,
                          const RewardConfig& reward_cfg) {
    if (group_size < 2) {
        throw std::invalid_argument("sample_group: group statistics need G >= 2");
    }
    RolloutGroup group;
    group.scenario_id = scenario.id;
    group.seed = seed;
    group.rollouts.reserve(static_cast<std::size_t>(group_size));
    for (int g = 0; g < group_size; ++g) {
        SplitRng rng = SplitRng::derive(seed, {fnv1a64(scenario.id), static_cast<std::uint64_t>(g)});
        group.rollouts.push_back(
            dual_rollout(net, ego_params, world_params, scenario, vocabs, rng, 1.0, reward_cfg));
    }
    return group;
}

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "replay") return EvalMode::kReplay;
    if (s == "reactive") return EvalMode::kReactive;
    throw std::invalid_argument("unknown eval mode: " + s);
}

const char* to_string(EvalMode m) { return m == EvalMode::kReplay ? "replay" : "reactive"; }

namespace {

RewardBreakdown replay_rollout(const PolicyNet& net, const PolicyParams& ego_params,
                               const Scenario& scenario, const VocabularySet& vocabs,
                               const RewardConfig& reward_cfg) {
    const int n_agents = static_cast<int>(scenario.agents.size());
    const int steps = scenario.horizon;
    // Pre-encode every non-ego agent's ground-truth future.
    std::vector<std::vector<int>> gt_tokens(static_cast<std::size_t>(n_agents));
    for (int n = 1; n < n_agents; ++n) {
        const AgentTrack& track = scenario.agents[static_cast<std::size_t>(n)];
        if (!track.future_gt || static_cast<int>(track.future_gt->size()) < steps) {
            throw std::invalid_argument("closed_loop_eval: replay mode requires GT futures");
        }
        std::vector<Pose2> poses;
        poses.push_back(track.current_pose());
        poses.insert(poses.end(), track.future_gt->begin(), track.future_gt->end());
        gt_tokens[static_cast<std::size_t>(n)] =
            encode(segment_trajectory(std::span<const Pose2>(poses)), vocabs.for_category(track.category));
    }

    const SceneEncoding scene = net.encode_scene(scenario, vocabs);
    ad::Tape tape(ego_params.flat.data(), ego_params.flat.size());
    SequenceRunner runner(net, ego_params, scene, vocabs, tape);
    SplitRng rng(0);  // unused at temperature 0

    std::vector<int> row(static_cast<std::size_t>(n_agents));
    std::vector<Pose2> poses(static_cast<std::size_t>(n_agents));
    std::vector<char> use_pose(static_cast<std::size_t>(n_agents), 0);
    std::vector<Pose2> ego_future;
    for (int t = 0; t < steps; ++t) {
        const auto logits = runner.next_logits(0);
        const int eff = runner.effective_vocab(0);
        row[0] = sample_token(logits.subspan(0, static_cast<std::size_t>(eff)), rng, 0.0);
        use_pose[0] = 0;
        for (int n = 1; n < n_agents; ++n) {
            row[static_cast<std::size_t>(n)] = gt_tokens[static_cast<std::size_t>(n)][static_cast<std::size_t>(t)];
            poses[static_cast<std::size_t>(n)] =
                (*scenario.agents[static_cast<std::size_t>(n)].future_gt)[static_cast<std::size_t>(t)];
            use_pose[static_cast<std::size_t>(n)] = 1;
        }
        runner.push_future_tokens(row, poses, use_pose);
        ego_future.push_back(runner.future_poses(0).back());
    }

    std::vector<std::vector<Pose2>> others;
    others.reserve(static_cast<std::size_t>(n_agents) - 1);
    for (int n = 1; n < n_agents; ++n) {
        const auto& gt = *scenario.agents[static_cast<std::size_t>(n)].future_gt;
        others.emplace_back(gt.begin(), gt.begin() + steps);
    }
    return rollout_rewards(scenario, ego_future, others, reward_cfg);
}

}  // namespace

EvalResult closed_loop_eval(const PolicyNet& net, const PolicyParams& ego_params,
                            const PolicyParams& world_params, std::span<const Scenario> scenarios,
                            const VocabularySet& vocabs, EvalMode mode,
                            const RewardConfig& reward_cfg, std::uint64_t seed, int num_threads) {
    EvalResult result;
    result.breakdowns.resize(scenarios.size());
    parallel_for(static_cast<int>(scenarios.size()), num_threads, [&](int i) {
        const Scenario& scenario = scenarios[static_cast<std::size_t>(i)];
        if (mode == EvalMode::kReplay) {
            result.breakdowns[static_cast<std::size_t>(i)] =
                replay_rollout(net, ego_params, scenario, vocabs, reward_cfg);
        } else {
            SplitRng rng = SplitRng::derive(seed, {fnv1a64(scenario.id), fnv1a64("reactive-eval")});
            result.breakdowns[static_cast<std::size_t>(i)] =
                dual_rollout(net, ego_params, world_params, scenario, vocabs, rng, 0.0, reward_cfg)
                    .rewards;
        }
    });
    result.composite = composite_score(result.breakdowns, reward_cfg);
    return result;
}

}  // namespace planlab
