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

#include "planlab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "planlab/concurrency.hpp"

namespace planlab {

Stage stage_from_string(const std::string& s) {
    if (s == "pretrain") return Stage::kPretrain;
    if (s == "finetune") return Stage::kFinetune;
    throw std::invalid_argument("unknown stage: " + s);
}

const char* to_string(Stage s) { return s == Stage::kPretrain ? "pretrain" : "finetune"; }

AdvantageMode advantage_mode_from_string(const std::string& s) {
    if (s == "grpo") return AdvantageMode::kGrpo;
    if (s == "vd-grpo" || s == "vd_grpo" || s == "vdgrpo") return AdvantageMode::kVdGrpo;
    throw std::invalid_argument("unknown advantage mode: " + s);
}

const char* to_string(AdvantageMode m) { return m == AdvantageMode::kGrpo ? "grpo" : "vd-grpo"; }

void TrainConfig::validate() const {
    if (scaling_c <= 0.0) throw std::invalid_argument("TrainConfig: c must be > 0");
    if (sigma_floor <= 0.0) throw std::invalid_argument("TrainConfig: sigma_floor must be > 0");
    if (beta < 0.0) throw std::invalid_argument("TrainConfig: beta must be >= 0");
    if (stage == Stage::kFinetune && group_size < 2) {
        throw std::invalid_argument("TrainConfig: finetune needs G >= 2");
    }
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
}

namespace {

ad::NodeId build_pretrain_loss(ad::Tape& tape, const PolicyNet& net, const PolicyParams& params,
                               const Scenario& scenario, const VocabularySet& vocabs,
                               const std::vector<std::vector<int>>& gt_tokens) {
    const std::size_t n_agents = scenario.agents.size();
    if (gt_tokens.size() != n_agents) {
        throw std::invalid_argument("pretrain_loss: one GT token row per agent required");
    }
    const int steps = scenario.horizon;
    for (const auto& row : gt_tokens) {
        if (static_cast<int>(row.size()) != steps) {
            throw std::invalid_argument("pretrain_loss: missing GT future for an agent");
        }
    }
    const SceneEncoding scene = net.encode_scene(scenario, vocabs);
    SequenceRunner runner(net, params, scene, vocabs, tape);
    std::vector<int> row(n_agents);
    for (int t = 0; t < steps; ++t) {
        for (std::size_t n = 0; n < n_agents; ++n) row[n] = gt_tokens[n][static_cast<std::size_t>(t)];
        runner.push_future_tokens(row);
    }
    std::vector<ad::NodeId> terms;
    terms.reserve(n_agents * static_cast<std::size_t>(steps));
    for (int t = 1; t <= steps; ++t) {
        for (std::size_t n = 0; n < n_agents; ++n) {
            const ad::NodeId logits = runner.logits_node_for_step(static_cast<int>(n), t);
            const int eff = runner.effective_vocab(static_cast<int>(n));
            terms.push_back(tape.pick_log_softmax(logits, gt_tokens[n][static_cast<std::size_t>(t - 1)],
                                                  eff, "nll"));
        }
    }
    const double w = -1.0 / static_cast<double>(terms.size());
    const std::vector<double> weights(terms.size(), w);
    return tape.weighted_sum(terms, weights, "pretrain_loss");
}

}  // namespace

double pretrain_loss(const PolicyNet& net, const PolicyParams& params, const Scenario& scenario,
                     const VocabularySet& vocabs, const std::vector<std::vector<int>>& gt_tokens) {
    ad::Tape tape(params.flat.data(), params.flat.size());
    return tape.scalar(build_pretrain_loss(tape, net, params, scenario, vocabs, gt_tokens));
}

double pretrain_loss_grad(const PolicyNet& net, const PolicyParams& params,
                          const Scenario& scenario, const VocabularySet& vocabs,
                          const std::vector<std::vector<int>>& gt_tokens,
                          std::vector<double>& grad_out) {
    ad::Tape tape(params.flat.data(), params.flat.size());
    const ad::NodeId loss = build_pretrain_loss(tape, net, params, scenario, vocabs, gt_tokens);
    tape.backward(loss);
    grad_out = tape.param_grad();
    return tape.scalar(loss);
}

namespace detail {

FinetuneGraph build_finetune_loss(ad::Tape& tape, const PolicyNet& net,
                                  const PolicyParams& ego_params, const PolicyParams& ref_params,
                                  const Scenario& scenario, const VocabularySet& vocabs,
                                  const RolloutGroup& group, const AdvantageTensor& advantages,
                                  double beta) {
    const std::size_t g_count = group.rollouts.size();
    if (g_count == 0) throw std::invalid_argument("finetune_loss: empty group");
    const int steps = scenario.horizon;
    if (advantages.advantages.rows != g_count ||
        advantages.advantages.cols != static_cast<std::size_t>(steps)) {
        throw std::invalid_argument("finetune_loss: advantage tensor shape mismatch");
    }
    const std::size_t n_agents = scenario.agents.size();
    const SceneEncoding scene = net.encode_scene(scenario, vocabs);

    FinetuneGraph graph;
    graph.log_prob_nodes.resize(g_count);
    std::vector<ad::NodeId> terms;
    std::vector<double> weights;
    const double inv_gf = 1.0 / (static_cast<double>(g_count) * static_cast<double>(steps));
    double kl_sum = 0.0;

    for (std::size_t g = 0; g < g_count; ++g) {
        const Rollout& rollout = group.rollouts[g];
        if (rollout.tokens.size() != n_agents ||
            static_cast<int>(rollout.tokens[0].size()) != steps) {
            throw std::invalid_argument("finetune_loss: rollout shape mismatch");
        }
        // Reference logits for the KL term: frozen model, same joint history.
        std::vector<std::vector<double>> ref_logits;
        ref_logits.reserve(static_cast<std::size_t>(steps));
        {
            ad::Tape ref_tape(ref_params.flat.data(), ref_params.flat.size());
            SequenceRunner ref_run(net, ref_params, scene, vocabs, ref_tape);
            std::vector<int> row(n_agents);
            for (int t = 0; t < steps; ++t) {
                const auto span = ref_run.next_logits(0);
                ref_logits.emplace_back(span.begin(), span.end());
                for (std::size_t n = 0; n < n_agents; ++n) {
                    row[n] = rollout.tokens[n][static_cast<std::size_t>(t)];
                }
                ref_run.push_future_tokens(row);
            }
        }

        SequenceRunner runner(net, ego_params, scene, vocabs, tape);
        std::vector<int> row(n_agents);
        for (int t = 0; t < steps; ++t) {
            for (std::size_t n = 0; n < n_agents; ++n) {
                row[n] = rollout.tokens[n][static_cast<std::size_t>(t)];
            }
            runner.push_future_tokens(row);
        }
        const int eff = runner.effective_vocab(0);
        graph.log_prob_nodes[g].reserve(static_cast<std::size_t>(steps));
        for (int t = 1; t <= steps; ++t) {
            const ad::NodeId logits = runner.logits_node_for_step(0, t);
            const int token = rollout.tokens[0][static_cast<std::size_t>(t - 1)];
            const ad::NodeId lp = tape.pick_log_softmax(logits, token, eff, "ego_log_prob");
            graph.log_prob_nodes[g].push_back(lp);
            // ratio * A^: exp(lp_live - lp_old) scaled by the advantage.
            const double adv = advantages.advantages.at(g, static_cast<std::size_t>(t - 1));
            const double lp_old = rollout.ego_log_probs[static_cast<std::size_t>(t - 1)];
            terms.push_back(tape.exp_mul(lp, adv, -lp_old, "ratio_term"));
            weights.push_back(-inv_gf);
            const auto ref_view = std::span<const double>(ref_logits[static_cast<std::size_t>(t - 1)])
                                      .subspan(0, static_cast<std::size_t>(eff));
            const ad::NodeId kl = tape.kl_vs_const_logits(logits, ref_view, "kl_ref");
            kl_sum += tape.scalar(kl);
            terms.push_back(kl);
            weights.push_back(beta * inv_gf);
        }
    }
    graph.loss = tape.weighted_sum(terms, weights, "finetune_loss");
    graph.kl_mean = kl_sum * inv_gf;
    return graph;
}

}  // namespace detail

FinetuneLossValue finetune_loss(const PolicyNet& net, const PolicyParams& ego_params,
                                const PolicyParams& ref_params, const Scenario& scenario,
                                const VocabularySet& vocabs, const RolloutGroup& group,
                                const AdvantageTensor& advantages, double beta) {
    ad::Tape tape(ego_params.flat.data(), ego_params.flat.size());
    const auto graph = detail::build_finetune_loss(tape, net, ego_params, ref_params, scenario,
                                                   vocabs, group, advantages, beta);
    return {tape.scalar(graph.loss), graph.kl_mean};
}

FinetuneLossValue finetune_loss_grad(const PolicyNet& net, const PolicyParams& ego_params,
                                     const PolicyParams& ref_params, const Scenario& scenario,
                                     const VocabularySet& vocabs, const RolloutGroup& group,
                                     const AdvantageTensor& advantages, double beta,
                                     std::vector<double>& grad_out) {
    ad::Tape tape(ego_params.flat.data(), ego_params.flat.size());
    const auto graph = detail::build_finetune_loss(tape, net, ego_params, ref_params, scenario,
                                                   vocabs, group, advantages, beta);
    tape.backward(graph.loss);
    grad_out = tape.param_grad();
    return {tape.scalar(graph.loss), graph.kl_mean};
}

void optimizer_step(std::vector<double>& params, std::span<const double> grads, AdamWState& state,
                    double lr, double weight_decay) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("optimizer_step: size mismatch");
    }
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * grads[i];
        state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * (m_hat / (std::sqrt(v_hat) + kEps) + weight_decay * params[i]);
    }
}

namespace {

struct ItemResult {
    std::vector<double> grad;
    double loss{0.0};
    double kl_mean{0.0};
    double mean_reward{0.0};
    bool unsafe{false};
    double comfort{0.0};
    double ttc{0.0};
    double speed{0.0};
    double progress{0.0};
};

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    SplitRng rng = SplitRng::derive(seed, {fnv1a64("epoch-shuffle"), static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.next_u64() % i;
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace

RunLog run_training(const TrainConfig& cfg, const PolicyNet& net, PolicyParams& params,
                    const PolicyParams* frozen, std::span<const Scenario> scenarios,
                    const VocabularySet& vocabs, const RewardConfig& reward_cfg,
                    const CheckpointSink& sink) {
    cfg.validate();
    if (scenarios.empty()) throw std::invalid_argument("run_training: dataset empty");
    if (cfg.stage == Stage::kFinetune && frozen == nullptr) {
        throw std::invalid_argument("run_training: finetune requires the frozen pre-trained model");
    }
    RunLog log;
    if (cfg.epochs == 0) return log;

    const std::size_t param_count = params.flat.size();
    AdamWState opt_state(param_count);
    const std::size_t n = scenarios.size();
    const std::size_t batches_per_epoch = (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                          static_cast<std::size_t>(cfg.batch_size);
    const double total_steps =
        static_cast<double>(batches_per_epoch) * static_cast<double>(cfg.epochs);

    // Teacher-forcing targets, encoded once.
    std::vector<std::vector<std::vector<int>>> gt_tokens;
    if (cfg.stage == Stage::kPretrain) {
        gt_tokens.resize(n);
        parallel_for(static_cast<int>(n), cfg.num_threads, [&](int i) {
            const Scenario& s = scenarios[static_cast<std::size_t>(i)];
            auto& rows = gt_tokens[static_cast<std::size_t>(i)];
            rows.resize(s.agents.size());
            for (std::size_t a = 0; a < s.agents.size(); ++a) {
                const AgentTrack& track = s.agents[a];
                if (!track.future_gt || static_cast<int>(track.future_gt->size()) < s.horizon) {
                    throw std::invalid_argument("run_training: agent missing GT future");
                }
                std::vector<Pose2> poses;
                poses.push_back(track.current_pose());
                poses.insert(poses.end(), track.future_gt->begin(), track.future_gt->end());
                rows[a] = encode(segment_trajectory(std::span<const Pose2>(poses)),
                                 vocabs.for_category(track.category));
            }
        });
    }

    std::int64_t global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<std::size_t> perm = epoch_permutation(n, cfg.seed, epoch);
        double epoch_loss = 0.0, epoch_kl = 0.0, epoch_reward = 0.0;
        double epoch_comfort = 0.0, epoch_ttc = 0.0, epoch_speed = 0.0, epoch_progress = 0.0;
        std::size_t epoch_items = 0, epoch_unsafe = 0;
        double last_lr = cfg.learning_rate;

        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const int count = static_cast<int>(stop - start);
            std::vector<ItemResult> results(static_cast<std::size_t>(count));

            // Sampling and gradients run against a per-batch snapshot.
            const PolicyParams snapshot = params;
            parallel_for(count, cfg.num_threads, [&](int bi) {
                const std::size_t idx = perm[start + static_cast<std::size_t>(bi)];
                const Scenario& scenario = scenarios[idx];
                ItemResult& r = results[static_cast<std::size_t>(bi)];
                if (cfg.stage == Stage::kPretrain) {
                    r.loss = pretrain_loss_grad(net, snapshot, scenario, vocabs, gt_tokens[idx],
                                                r.grad);
                } else {
                    const std::uint64_t group_seed =
                        derive_seed(cfg.seed, {fnv1a64("finetune-sample"),
                                               static_cast<std::uint64_t>(epoch), idx});
                    const RolloutGroup group = sample_group(net, snapshot, *frozen, scenario, vocabs,
                                                            cfg.group_size, group_seed, reward_cfg);
                    const int steps = scenario.horizon;
                    Mat rewards(group.rollouts.size(), static_cast<std::size_t>(steps));
                    double reward_sum = 0.0;
                    for (std::size_t g = 0; g < group.rollouts.size(); ++g) {
                        const RewardBreakdown& rb = group.rollouts[g].rewards;
                        for (int t = 0; t < steps; ++t) {
                            rewards.at(g, static_cast<std::size_t>(t)) =
                                rb.total[static_cast<std::size_t>(t)];
                            reward_sum += rb.total[static_cast<std::size_t>(t)];
                        }
                        r.comfort += rb.comfort;
                        double ttc_mean = 0.0;
                        for (double v : rb.ttc) ttc_mean += v;
                        r.ttc += rb.ttc.empty() ? 1.0 : ttc_mean / static_cast<double>(rb.ttc.size());
                        r.speed += rb.speed;
                        r.progress += rb.progress;
                    }
                    const double inv_g = 1.0 / static_cast<double>(group.rollouts.size());
                    r.comfort *= inv_g;
                    r.ttc *= inv_g;
                    r.speed *= inv_g;
                    r.progress *= inv_g;
                    r.mean_reward = reward_sum / static_cast<double>(rewards.data.size());
                    r.unsafe = group.is_unsafe();
                    const AdvantageTensor adv = cfg.advantage_mode == AdvantageMode::kGrpo
                                                    ? shape_rewards_grpo(rewards, cfg.sigma_floor)
                                                    : shape_rewards_vdgrpo(rewards, cfg.scaling_c);
                    const FinetuneLossValue lv = finetune_loss_grad(
                        net, snapshot, *frozen, scenario, vocabs, group, adv, cfg.beta, r.grad);
                    r.loss = lv.loss;
                    r.kl_mean = lv.kl_mean;
                }
            });

            // Ordered reduction keeps batch gradients bit-reproducible.
            std::vector<double> grad(param_count, 0.0);
            for (const ItemResult& r : results) {
                for (std::size_t j = 0; j < param_count; ++j) grad[j] += r.grad[j];
                epoch_loss += r.loss;
                epoch_kl += r.kl_mean;
                epoch_reward += r.mean_reward;
                epoch_comfort += r.comfort;
                epoch_ttc += r.ttc;
                epoch_speed += r.speed;
                epoch_progress += r.progress;
                epoch_unsafe += r.unsafe ? 1 : 0;
                ++epoch_items;
            }
            const double inv_count = 1.0 / static_cast<double>(count);
            for (double& g : grad) g *= inv_count;

            double lr = cfg.learning_rate;
            if (cfg.stage == Stage::kPretrain) {
                lr = cfg.learning_rate * 0.5 *
                     (1.0 + std::cos(kPi * static_cast<double>(global_step) / total_steps));
            }
            last_lr = lr;
            optimizer_step(params.flat, grad, opt_state, lr, cfg.weight_decay);
            ++global_step;
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.stage = cfg.stage;
        const double inv_items = epoch_items > 0 ? 1.0 / static_cast<double>(epoch_items) : 0.0;
        entry.loss = epoch_loss * inv_items;
        entry.kl_mean = epoch_kl * inv_items;
        entry.mean_reward = epoch_reward * inv_items;
        entry.comfort_mean = epoch_comfort * inv_items;
        entry.ttc_mean = epoch_ttc * inv_items;
        entry.speed_mean = epoch_speed * inv_items;
        entry.progress_mean = epoch_progress * inv_items;
        entry.unsafe_group_ratio =
            epoch_items > 0 ? static_cast<double>(epoch_unsafe) / static_cast<double>(epoch_items) : 0.0;
        entry.lr = last_lr;
        log.epochs.push_back(entry);
        if (sink) sink(epoch, params);
    }
    return log;
}

}  // namespace planlab
