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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "planlab/advantage.hpp"
#include "planlab/rollout.hpp"

namespace planlab {

enum class Stage { kPretrain, kFinetune };
Stage stage_from_string(const std::string& s);
const char* to_string(Stage s);
AdvantageMode advantage_mode_from_string(const std::string& s);
const char* to_string(AdvantageMode m);

struct TrainConfig {
    Stage stage{Stage::kPretrain};
    AdvantageMode advantage_mode{AdvantageMode::kVdGrpo};
    int group_size{4};
    double beta{0.1};
    double scaling_c{0.1};
    double sigma_floor{1e-6};
    double learning_rate{3e-3};
    double weight_decay{1e-4};
    int epochs{10};
    int batch_size{32};
    std::uint64_t seed{0};
    int num_threads{0};

    void validate() const;
};

/// Teacher-forced next-token NLL over all agents, averaged over F*(N+1)
/// terms. gt_tokens[agent][t] are the encoded ground-truth futures.
double pretrain_loss(const PolicyNet& net, const PolicyParams& params, const Scenario& scenario,
                     const VocabularySet& vocabs,
                     const std::vector<std::vector<int>>& gt_tokens);
double pretrain_loss_grad(const PolicyNet& net, const PolicyParams& params,
                          const Scenario& scenario, const VocabularySet& vocabs,
                          const std::vector<std::vector<int>>& gt_tokens,
                          std::vector<double>& grad_out);

struct FinetuneLossValue {
    double loss{0.0};
    double kl_mean{0.0};
};

/// The group-relative fine-tuning loss: importance-ratio-weighted cumulative
/// advantages minus the beta-weighted exact KL to the frozen reference,
/// averaged over G*F tokens, negated. No ratio clipping.
FinetuneLossValue finetune_loss(const PolicyNet& net, const PolicyParams& ego_params,
                                const PolicyParams& ref_params, const Scenario& scenario,
                                const VocabularySet& vocabs, const RolloutGroup& group,
                                const AdvantageTensor& advantages, double beta);
FinetuneLossValue finetune_loss_grad(const PolicyNet& net, const PolicyParams& ego_params,
                                     const PolicyParams& ref_params, const Scenario& scenario,
                                     const VocabularySet& vocabs, const RolloutGroup& group,
                                     const AdvantageTensor& advantages, double beta,
                                     std::vector<double>& grad_out);

namespace detail {
/// Exposed for tests that inspect per-token log-prob adjoints.
struct FinetuneGraph {
    ad::NodeId loss{ad::kNoNode};
    std::vector<std::vector<ad::NodeId>> log_prob_nodes;  // [g][t]
    double kl_mean{0.0};
};
FinetuneGraph build_finetune_loss(ad::Tape& tape, const PolicyNet& net,
                                  const PolicyParams& ego_params, const PolicyParams& ref_params,
                                  const Scenario& scenario, const VocabularySet& vocabs,
                                  const RolloutGroup& group, const AdvantageTensor& advantages,
                                  double beta);
}  // namespace detail

/// AdamW moments; call optimizer_step with the same state across steps.
struct AdamWState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step{0};

    explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Decoupled-weight-decay adaptive-moment update (beta1 0.9, beta2 0.999,
/// eps 1e-8); deterministic.
void optimizer_step(std::vector<double>& params, std::span<const double> grads, AdamWState& state,
                    double lr, double weight_decay);

struct EpochLog {
    int epoch{0};
    Stage stage{Stage::kPretrain};
    double loss{0.0};
    double mean_reward{0.0};
    double unsafe_group_ratio{0.0};
    double comfort_mean{0.0};
    double ttc_mean{0.0};
    double speed_mean{0.0};
    double progress_mean{0.0};
    double kl_mean{0.0};
    double lr{0.0};
};

struct RunLog {
    std::vector<EpochLog> epochs;
};

using CheckpointSink = std::function<void(int epoch, const PolicyParams&)>;

/// Epoch loop. Pretraining uses cosine learning-rate decay to zero and
/// teacher forcing; fine-tuning snapshots the sampling policy per batch,
/// samples groups, shapes rewards per advantage_mode and takes one step per
/// batch. `frozen` is the pre-trained model doubling as world model and KL
/// reference (required for fine-tuning).
RunLog run_training(const TrainConfig& cfg, const PolicyNet& net, PolicyParams& params,
                    const PolicyParams* frozen, std::span<const Scenario> scenarios,
                    const VocabularySet& vocabs, const RewardConfig& reward_cfg,
                    const CheckpointSink& sink = {});

}  // namespace planlab
