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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planlab/random.hpp"
#include "planlab/scenario.hpp"
#include "planlab/tape.hpp"
#include "planlab/tokenizer.hpp"

namespace planlab {

struct ModelConfig {
    int num_layers{2};
    int model_dim{32};
    int num_heads{4};
    int vocab_size{64};
    int max_agents{8};
    int max_steps{16};
    double neighbor_radius{50.0};
    double map_radius{60.0};
    double map_point_spacing{5.0};

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// Named slices of the flat parameter vector, fixed by the model config.
class ParamLayout {
public:
    struct Entry {
        std::string name;
        std::size_t offset;
        int rows;
        int cols;
        int size() const { return rows * cols; }
    };

    explicit ParamLayout(const ModelConfig& cfg);
    const Entry& at(const std::string& name) const;
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t total_size() const { return total_; }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
    std::size_t total_{0};
};

struct PolicyParams {
    ModelConfig config;
    std::vector<double> flat;
};

/// Per-agent logits for the next motion token (length vocab_size each).
struct StepLogits {
    std::vector<std::vector<double>> per_agent;
};

struct MapPoint {
    Vec2 position;
    double heading;  // tangent direction
    int type;        // 0 = route centerline, 1 = drivable boundary
};

/// Scenario preprocessed for the network: sampled map points plus per-agent
/// tokenized history. All spatial conditioning later happens through
/// relative features, which keeps the network SE(2)-invariant.
struct SceneEncoding {
    struct AgentCtx {
        AgentCategory category{AgentCategory::kVehicle};
        BoxDims dims;
        std::vector<int> history_tokens;  // encoded history segments
        std::vector<Pose2> history_poses; // recorded, length history_tokens.size() + 1
    };
    std::vector<MapPoint> map_points;
    std::vector<AgentCtx> agents;
    double speed_limit{0.0};
    double dt{0.5};
    int horizon{16};
};

/// Factorized-attention autoregressive token predictor. Each fusion block
/// applies causal temporal self-attention, agent-map cross-attention and
/// agent-agent cross-attention, all with relative spatio-temporal position
/// embeddings added to keys and values.
class PolicyNet {
public:
    explicit PolicyNet(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }

    /// Uniform init scaled by 1/sqrt(fan_in); deterministic in the seed.
    PolicyParams init_params(std::uint64_t seed) const;

    SceneEncoding encode_scene(const Scenario& scenario, const VocabularySet& vocabs) const;

private:
    ModelConfig cfg_;
    ParamLayout layout_;
};

/// Incremental causal evaluation of one token sequence. The same code path
/// serves sampling (advance one step, read last logits) and training
/// (advance the whole sequence, read every step's logits), so recomputed
/// logits match sampled ones bit-exactly.
class SequenceRunner {
public:
    SequenceRunner(const PolicyNet& net, const PolicyParams& params, const SceneEncoding& scene,
                   const VocabularySet& vocabs, ad::Tape& tape);

    int num_agents() const { return static_cast<int>(agents_.size()); }
    int future_steps() const { return future_steps_; }
    /// Valid token count for this agent (<= model vocab_size).
    int effective_vocab(int agent) const;

    /// Appends one future position per agent and decodes poses via the vocab.
    void push_future_tokens(std::span<const int> tokens);
    /// Replay variant: agents with use_pose[n] != 0 take poses[n] verbatim
    /// instead of the decoded token endpoint.
    void push_future_tokens(std::span<const int> tokens, std::span<const Pose2> poses,
                            std::span<const char> use_pose);

    /// Logits node predicting future step `t` (1-based) for `agent`.
    ad::NodeId logits_node_for_step(int agent, int t);
    /// Logits node predicting the next (future_steps()+1) token.
    ad::NodeId next_logits_node(int agent) { return logits_node_for_step(agent, future_steps_ + 1); }
    std::span<const double> next_logits(int agent);

    const Pose2& current_pose(int agent) const;
    const std::vector<Pose2>& future_poses(int agent) const;

private:
    struct AgentState {
        AgentCategory category;
        int history_len{0};                  // number of history tokens
        std::vector<Pose2> pose_at;          // pose per sequence position
        std::vector<std::vector<ad::NodeId>> x;  // [layer][pos] block inputs; x[L] = final
        std::vector<std::vector<ad::NodeId>> k_tmp, v_tmp;  // [layer][pos]
        std::vector<std::vector<ad::NodeId>> k_agt, v_agt;  // [layer][pos]
        std::vector<std::vector<ad::NodeId>> rel_tmp;       // [query pos][key pos]
        std::vector<std::vector<int>> map_subset;           // [pos] -> map point index
        std::vector<std::vector<ad::NodeId>> rel_map;       // [pos][subset slot]
        std::vector<ad::NodeId> head;                       // [pos] lazy logits
        std::vector<Pose2> future_poses;
    };

    struct RowEntry {
        bool active{false};
        bool is_sos{false};
        int token{0};
        Pose2 pose;
    };

    ad::NodeId pnode(const std::string& name);
    ad::NodeId rel_node(const char* module, const Pose2& query, const Pose2& key, double time_gap);
    void advance_row(std::span<const RowEntry> row);
    ad::NodeId head_node(int agent, int pos);

    const PolicyNet& net_;
    const SceneEncoding& scene_;
    const VocabularySet& vocabs_;
    ad::Tape& tape_;
    std::vector<AgentState> agents_;
    std::map<std::string, ad::NodeId> param_nodes_;
    std::vector<std::vector<ad::NodeId>> map_k_, map_v_;  // [layer][point]
    std::vector<ad::NodeId> map_embed_;                   // [point]
    int future_steps_{0};
};

/// Next-step logits for all agents after consuming `token_history`
/// (token_history[agent] lists that agent's future tokens so far; all
/// lengths must match and stay within the scenario horizon).
StepLogits forward(const PolicyNet& net, const PolicyParams& params, const Scenario& scenario,
                   const VocabularySet& vocabs,
                   const std::vector<std::vector<int>>& token_history);

/// log softmax(logits)[id]; shared with the tape op (planlab::ad::log_prob).
inline double log_prob(std::span<const double> logits, int id) { return ad::log_prob(logits, id); }

/// Exact categorical KL; nonnegative.
inline double kl_categorical(std::span<const double> p, std::span<const double> q) {
    return ad::kl_categorical(p, q);
}

/// temperature 0: argmax with smallest-id tie break; otherwise categorical
/// sample from softmax(logits / temperature).
int sample_token(std::span<const double> logits, SplitRng& rng, double temperature);

}  // namespace planlab
