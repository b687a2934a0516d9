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

#include "planlab/policy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace planlab {

namespace {

constexpr const char* kModules[3] = {"tmp", "map", "agt"};

std::string layer_key(int layer, const char* module, const char* tensor) {
    return "l" + std::to_string(layer) + "_" + module + "_" + tensor;
}

}  // namespace

void ModelConfig::validate() const {
    if (num_layers < 1 || model_dim < 1 || num_heads < 1 || vocab_size < 1 || max_agents < 1 ||
        max_steps < 1) {
        throw std::invalid_argument("ModelConfig: all sizes must be positive");
    }
    if (model_dim % num_heads != 0) {
        throw std::invalid_argument("ModelConfig: model_dim must be divisible by num_heads");
    }
    if (neighbor_radius <= 0.0 || map_radius <= 0.0 || map_point_spacing <= 0.0) {
        throw std::invalid_argument("ModelConfig: radii and spacing must be positive");
    }
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.model_dim;
    const int k = cfg.vocab_size;
    const int hidden = 4 * d;
    const auto push = [&](std::string name, int rows, int cols) {
        index_[name] = entries_.size();
        entries_.push_back({std::move(name), total_, rows, cols});
        total_ += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    };

    push("tok_embed", kNumAgentCategories * k, d);
    push("sos_embed", kNumAgentCategories, d);
    push("map_type_embed", 2, d);
    push("limit_embed", 1, d);
    // Relative-position MLPs are shared across layers, one per attention kind.
    for (const char* m : kModules) {
        push(std::string("rel_") + m + "_w1", d, 4);
        push(std::string("rel_") + m + "_b1", d, 1);
        push(std::string("rel_") + m + "_w2", d, d);
        push(std::string("rel_") + m + "_b2", d, 1);
    }
    for (int l = 0; l < cfg.num_layers; ++l) {
        for (const char* m : kModules) {
            push(layer_key(l, m, "ln_g"), d, 1);
            push(layer_key(l, m, "ln_b"), d, 1);
            push(layer_key(l, m, "wq"), d, d);
            push(layer_key(l, m, "bq"), d, 1);
            push(layer_key(l, m, "wk"), d, d);
            push(layer_key(l, m, "bk"), d, 1);
            push(layer_key(l, m, "wv"), d, d);
            push(layer_key(l, m, "bv"), d, 1);
            push(layer_key(l, m, "wo"), d, d);
            push(layer_key(l, m, "bo"), d, 1);
        }
        push(layer_key(l, "mlp", "ln_g"), d, 1);
        push(layer_key(l, "mlp", "ln_b"), d, 1);
        push(layer_key(l, "mlp", "w1"), hidden, d);
        push(layer_key(l, "mlp", "b1"), hidden, 1);
        push(layer_key(l, "mlp", "w2"), d, hidden);
        push(layer_key(l, "mlp", "b2"), d, 1);
    }
    push("final_ln_g", d, 1);
    push("final_ln_b", d, 1);
    push("head_w1", d, d);
    push("head_b1", d, 1);
    push("head_w2", k, d);
    push("head_b2", k, 1);
}

const ParamLayout::Entry& ParamLayout::at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamLayout: unknown tensor " + name);
    return entries_[it->second];
}

PolicyNet::PolicyNet(ModelConfig cfg) : cfg_(cfg), layout_(cfg) {}

PolicyParams PolicyNet::init_params(std::uint64_t seed) const {
    PolicyParams params;
    params.config = cfg_;
    params.flat.assign(layout_.total_size(), 0.0);
    SplitRng rng = SplitRng::derive(seed, {fnv1a64("param-init")});
    for (const auto& entry : layout_.entries()) {
        double* dst = params.flat.data() + entry.offset;
        const std::string suffix = entry.name.substr(entry.name.rfind('_') + 1);
        const bool is_gain = suffix == "g";
        const bool is_bias = suffix == "b" || suffix == "b1" || suffix == "b2" || suffix == "bq" ||
                             suffix == "bk" || suffix == "bv" || suffix == "bo";
        if (is_gain) {
            std::fill_n(dst, entry.size(), 1.0);
        } else if (is_bias) {
            std::fill_n(dst, entry.size(), 0.0);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(entry.cols));
            for (int i = 0; i < entry.size(); ++i) dst[i] = rng.uniform(-bound, bound);
        }
    }
    return params;
}

SceneEncoding PolicyNet::encode_scene(const Scenario& scenario, const VocabularySet& vocabs) const {
    scenario.validate();
    if (static_cast<int>(scenario.agents.size()) > cfg_.max_agents) {
        throw std::invalid_argument("encode_scene: too many agents for model config");
    }
    SceneEncoding scene;
    scene.speed_limit = scenario.map.speed_limit;
    scene.dt = scenario.dt;
    scene.horizon = scenario.horizon;

    const double spacing = cfg_.map_point_spacing;
    const auto& line = scenario.map.route_centerline;
    for (double s = 0.0; s <= line.total_length() + 1e-9; s += spacing) {
        const Vec2 p = line.point_at(s);
        const Vec2 t = line.tangent_at(s);
        scene.map_points.push_back({p, std::atan2(t.y, t.x), 0});
    }
    const auto sample_ring = [&](const std::vector<Vec2>& ring) {
        std::vector<double> cum(ring.size() + 1, 0.0);
        for (std::size_t i = 0; i < ring.size(); ++i) {
            cum[i + 1] = cum[i] + (ring[(i + 1) % ring.size()] - ring[i]).norm();
        }
        const double total = cum.back();
        std::size_t edge = 0;
        for (double s = 0.0; s < total; s += spacing) {
            while (edge + 1 < cum.size() && cum[edge + 1] <= s) ++edge;
            const Vec2 a = ring[edge];
            const Vec2 b = ring[(edge + 1) % ring.size()];
            const Vec2 d = b - a;
            const double len = d.norm();
            const double t = (s - cum[edge]) / len;
            scene.map_points.push_back({a + d * t, std::atan2(d.y, d.x), 1});
        }
    };
    sample_ring(scenario.map.drivable.outer.vertices());
    for (const auto& hole : scenario.map.drivable.holes) sample_ring(hole.vertices());

    for (const auto& track : scenario.agents) {
        SceneEncoding::AgentCtx ctx;
        ctx.category = track.category;
        ctx.dims = track.dims;
        ctx.history_poses = track.history;
        const auto segments = segment_trajectory(std::span<const Pose2>(track.history));
        if (!segments.empty()) {
            ctx.history_tokens = encode(segments, vocabs.for_category(track.category));
        }
        scene.agents.push_back(std::move(ctx));
    }
    return scene;
}

SequenceRunner::SequenceRunner(const PolicyNet& net, const PolicyParams& params,
                               const SceneEncoding& scene, const VocabularySet& vocabs,
                               ad::Tape& tape)
    : net_(net), scene_(scene), vocabs_(vocabs), tape_(tape) {
    if (!(params.config == net.config())) {
        throw std::invalid_argument("SequenceRunner: params/config mismatch");
    }
    const ModelConfig& cfg = net_.config();
    const int d = cfg.model_dim;
    const int n_agents = static_cast<int>(scene.agents.size());
    if (n_agents == 0) throw std::invalid_argument("SequenceRunner: no agents");

    // Map token bases per layer; embeddings carry the point type plus the
    // speed limit on route points, everything else flows through relative
    // features.
    const double limit_feat = scene.speed_limit / 15.0;
    map_embed_.resize(scene.map_points.size());
    const auto& type_embed = net_.layout().at("map_type_embed");
    for (std::size_t i = 0; i < scene.map_points.size(); ++i) {
        const MapPoint& mp = scene.map_points[i];
        const ad::NodeId type_row =
            tape_.param(type_embed.offset + static_cast<std::size_t>(mp.type) * static_cast<std::size_t>(d), d,
                        "map_type_embed");
        if (mp.type == 0) {
            map_embed_[i] = tape_.axpy(type_row, limit_feat, pnode("limit_embed"), "map_embed");
        } else {
            map_embed_[i] = type_row;
        }
    }
    map_k_.assign(static_cast<std::size_t>(cfg.num_layers), {});
    map_v_.assign(static_cast<std::size_t>(cfg.num_layers), {});
    for (int l = 0; l < cfg.num_layers; ++l) {
        map_k_[static_cast<std::size_t>(l)].resize(scene.map_points.size());
        map_v_[static_cast<std::size_t>(l)].resize(scene.map_points.size());
        for (std::size_t i = 0; i < scene.map_points.size(); ++i) {
            map_k_[static_cast<std::size_t>(l)][i] =
                tape_.affine(pnode(layer_key(l, "map", "wk")), d, d, map_embed_[i],
                             pnode(layer_key(l, "map", "bk")), "map_k");
            map_v_[static_cast<std::size_t>(l)][i] =
                tape_.affine(pnode(layer_key(l, "map", "wv")), d, d, map_embed_[i],
                             pnode(layer_key(l, "map", "bv")), "map_v");
        }
    }

    agents_.resize(static_cast<std::size_t>(n_agents));
    int max_hist = 0;
    for (int n = 0; n < n_agents; ++n) {
        AgentState& st = agents_[static_cast<std::size_t>(n)];
        st.category = scene.agents[static_cast<std::size_t>(n)].category;
        st.history_len = static_cast<int>(scene.agents[static_cast<std::size_t>(n)].history_tokens.size());
        st.x.assign(static_cast<std::size_t>(cfg.num_layers) + 1, {});
        st.k_tmp.assign(static_cast<std::size_t>(cfg.num_layers), {});
        st.v_tmp.assign(static_cast<std::size_t>(cfg.num_layers), {});
        st.k_agt.assign(static_cast<std::size_t>(cfg.num_layers), {});
        st.v_agt.assign(static_cast<std::size_t>(cfg.num_layers), {});
        max_hist = std::max(max_hist, st.history_len);
    }

    // Prefill: agents join the timeline so their last history pose lands on
    // the shared "now" row; earlier rows are masked out for shorter histories.
    std::vector<RowEntry> row(static_cast<std::size_t>(n_agents));
    for (int tau = -max_hist; tau <= 0; ++tau) {
        for (int n = 0; n < n_agents; ++n) {
            const auto& ctx = scene.agents[static_cast<std::size_t>(n)];
            const int h = agents_[static_cast<std::size_t>(n)].history_len;
            RowEntry& e = row[static_cast<std::size_t>(n)];
            e.active = tau >= -h;
            e.is_sos = tau == -h;
            if (e.active) {
                const int idx = tau + h;  // 0 = SOS/hist pose 0, i = history token i
                e.token = e.is_sos ? 0 : ctx.history_tokens[static_cast<std::size_t>(idx - 1)];
                e.pose = ctx.history_poses[static_cast<std::size_t>(idx)];
            }
        }
        advance_row(row);
    }
}

ad::NodeId SequenceRunner::pnode(const std::string& name) {
    const auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    const auto& entry = net_.layout().at(name);
    const ad::NodeId id = tape_.param(entry.offset, entry.size(), entry.name.c_str());
    param_nodes_.emplace(name, id);
    return id;
}

namespace {

std::array<double, 4> rel_features(const Pose2& query, const Pose2& key, double time_gap) {
    const Vec2 local = query.to_local(key.position());
    const double dist = local.norm();
    const double bearing = (dist > 0.0) ? std::atan2(local.y, local.x) : 0.0;
    return {0.1 * dist, bearing, wrap_angle(key.heading - query.heading), time_gap};
}

}  // namespace

ad::NodeId SequenceRunner::rel_node(const char* module, const Pose2& query, const Pose2& key,
                                    double time_gap) {
    const std::array<double, 4> feats = rel_features(query, key, time_gap);
    const std::string base = std::string("rel_") + module;
    return tape_.rel_mlp(feats, pnode(base + "_w1"), pnode(base + "_b1"), pnode(base + "_w2"),
                         pnode(base + "_b2"), "rel_mlp");
}

void SequenceRunner::advance_row(std::span<const RowEntry> row) {
    const ModelConfig& cfg = net_.config();
    const int d = cfg.model_dim;
    const int k = cfg.vocab_size;
    const int n_agents = num_agents();
    const auto& tok_entry = net_.layout().at("tok_embed");
    const auto& sos_entry = net_.layout().at("sos_embed");

    // Embeddings for the new position.
    for (int n = 0; n < n_agents; ++n) {
        const RowEntry& e = row[static_cast<std::size_t>(n)];
        if (!e.active) continue;
        AgentState& st = agents_[static_cast<std::size_t>(n)];
        const int cat = static_cast<int>(st.category);
        ad::NodeId x0;
        if (e.is_sos) {
            x0 = tape_.param(sos_entry.offset + static_cast<std::size_t>(cat) * static_cast<std::size_t>(d),
                             d, "sos_embed");
        } else {
            if (e.token < 0 || e.token >= k) {
                throw std::out_of_range("SequenceRunner: token id outside model vocab");
            }
            const std::size_t row_off =
                static_cast<std::size_t>(cat) * static_cast<std::size_t>(k) + static_cast<std::size_t>(e.token);
            x0 = tape_.param(tok_entry.offset + row_off * static_cast<std::size_t>(d), d, "tok_embed");
        }
        st.pose_at.push_back(e.pose);
        st.x[0].push_back(x0);
        // Map attention keys are fixed per position: points within map_radius.
        std::vector<int> subset;
        for (std::size_t i = 0; i < scene_.map_points.size(); ++i) {
            if ((scene_.map_points[i].position - e.pose.position()).norm() <= cfg.map_radius) {
                subset.push_back(static_cast<int>(i));
            }
        }
        st.map_subset.push_back(std::move(subset));
        st.rel_map.emplace_back();
        st.rel_tmp.emplace_back();
    }

    // Row-local caches shared across layers.
    std::vector<std::vector<ad::NodeId>> rel_agt(static_cast<std::size_t>(n_agents),
                                                 std::vector<ad::NodeId>(static_cast<std::size_t>(n_agents),
                                                                         ad::kNoNode));

    std::vector<ad::NodeId> ln1(static_cast<std::size_t>(n_agents), ad::kNoNode);
    std::vector<ad::NodeId> ln3(static_cast<std::size_t>(n_agents), ad::kNoNode);
    std::vector<ad::NodeId> h(static_cast<std::size_t>(n_agents), ad::kNoNode);

    for (int l = 0; l < cfg.num_layers; ++l) {
        // Temporal self-attention: keys first so the new position can attend to itself.
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            const ad::NodeId x_in = st.x[static_cast<std::size_t>(l)].back();
            ln1[static_cast<std::size_t>(n)] =
                tape_.layer_norm(x_in, pnode(layer_key(l, "tmp", "ln_g")),
                                 pnode(layer_key(l, "tmp", "ln_b")), "tmp_ln");
            st.k_tmp[static_cast<std::size_t>(l)].push_back(
                tape_.affine(pnode(layer_key(l, "tmp", "wk")), d, d, ln1[static_cast<std::size_t>(n)],
                             pnode(layer_key(l, "tmp", "bk")), "tmp_k"));
            st.v_tmp[static_cast<std::size_t>(l)].push_back(
                tape_.affine(pnode(layer_key(l, "tmp", "wv")), d, d, ln1[static_cast<std::size_t>(n)],
                             pnode(layer_key(l, "tmp", "bv")), "tmp_v"));
        }
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            const int pos = static_cast<int>(st.pose_at.size()) - 1;
            const ad::NodeId x_in = st.x[static_cast<std::size_t>(l)].back();
            const ad::NodeId q =
                tape_.affine(pnode(layer_key(l, "tmp", "wq")), d, d, ln1[static_cast<std::size_t>(n)],
                             pnode(layer_key(l, "tmp", "bq")), "tmp_q");
            std::vector<ad::NodeId> keys, vals, rels;
            keys.reserve(static_cast<std::size_t>(pos) + 1);
            auto& rel_row = st.rel_tmp[static_cast<std::size_t>(pos)];
            if (rel_row.empty()) {
                rel_row.resize(static_cast<std::size_t>(pos) + 1, ad::kNoNode);
                for (int p = 0; p <= pos; ++p) {
                    rel_row[static_cast<std::size_t>(p)] =
                        rel_node("tmp", st.pose_at[static_cast<std::size_t>(pos)],
                                 st.pose_at[static_cast<std::size_t>(p)],
                                 static_cast<double>(p - pos) * scene_.dt);
                }
            }
            for (int p = 0; p <= pos; ++p) {
                keys.push_back(st.k_tmp[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)]);
                vals.push_back(st.v_tmp[static_cast<std::size_t>(l)][static_cast<std::size_t>(p)]);
                rels.push_back(rel_row[static_cast<std::size_t>(p)]);
            }
            const ad::NodeId attn = tape_.attention(q, keys, vals, rels, cfg.num_heads, "tmp_attn");
            const ad::NodeId out = tape_.affine(pnode(layer_key(l, "tmp", "wo")), d, d, attn,
                                                pnode(layer_key(l, "tmp", "bo")), "tmp_o");
            h[static_cast<std::size_t>(n)] = tape_.add(x_in, out, "tmp_res");
        }

        // Agent-map cross-attention.
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            const int pos = static_cast<int>(st.pose_at.size()) - 1;
            const auto& subset = st.map_subset[static_cast<std::size_t>(pos)];
            if (subset.empty()) continue;
            const ad::NodeId ln2 =
                tape_.layer_norm(h[static_cast<std::size_t>(n)], pnode(layer_key(l, "map", "ln_g")),
                                 pnode(layer_key(l, "map", "ln_b")), "map_ln");
            const ad::NodeId q = tape_.affine(pnode(layer_key(l, "map", "wq")), d, d, ln2,
                                              pnode(layer_key(l, "map", "bq")), "map_q");
            auto& rel_row = st.rel_map[static_cast<std::size_t>(pos)];
            if (rel_row.empty()) {
                rel_row.reserve(subset.size());
                for (int idx : subset) {
                    const MapPoint& mp = scene_.map_points[static_cast<std::size_t>(idx)];
                    rel_row.push_back(rel_node("map", st.pose_at[static_cast<std::size_t>(pos)],
                                               Pose2{mp.position.x, mp.position.y, mp.heading}, 0.0));
                }
            }
            std::vector<ad::NodeId> keys, vals;
            keys.reserve(subset.size());
            for (std::size_t i = 0; i < subset.size(); ++i) {
                keys.push_back(map_k_[static_cast<std::size_t>(l)][static_cast<std::size_t>(subset[i])]);
                vals.push_back(map_v_[static_cast<std::size_t>(l)][static_cast<std::size_t>(subset[i])]);
            }
            const ad::NodeId attn = tape_.attention(q, keys, vals, rel_row, cfg.num_heads, "map_attn");
            const ad::NodeId out = tape_.affine(pnode(layer_key(l, "map", "wo")), d, d, attn,
                                                pnode(layer_key(l, "map", "bo")), "map_o");
            h[static_cast<std::size_t>(n)] = tape_.add(h[static_cast<std::size_t>(n)], out, "map_res");
        }

        // Agent-agent cross-attention: all key bases first, then queries.
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            ln3[static_cast<std::size_t>(n)] =
                tape_.layer_norm(h[static_cast<std::size_t>(n)], pnode(layer_key(l, "agt", "ln_g")),
                                 pnode(layer_key(l, "agt", "ln_b")), "agt_ln");
            st.k_agt[static_cast<std::size_t>(l)].push_back(
                tape_.affine(pnode(layer_key(l, "agt", "wk")), d, d, ln3[static_cast<std::size_t>(n)],
                             pnode(layer_key(l, "agt", "bk")), "agt_k"));
            st.v_agt[static_cast<std::size_t>(l)].push_back(
                tape_.affine(pnode(layer_key(l, "agt", "wv")), d, d, ln3[static_cast<std::size_t>(n)],
                             pnode(layer_key(l, "agt", "bv")), "agt_v"));
        }
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            const Pose2& pose_n = st.pose_at.back();
            std::vector<ad::NodeId> keys, vals, rels;
            for (int m = 0; m < n_agents; ++m) {
                if (m == n || !row[static_cast<std::size_t>(m)].active) continue;
                AgentState& om = agents_[static_cast<std::size_t>(m)];
                const Pose2& pose_m = om.pose_at.back();
                if ((pose_m.position() - pose_n.position()).norm() > cfg.neighbor_radius) continue;
                ad::NodeId& r = rel_agt[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
                if (r == ad::kNoNode) r = rel_node("agt", pose_n, pose_m, 0.0);
                keys.push_back(om.k_agt[static_cast<std::size_t>(l)].back());
                vals.push_back(om.v_agt[static_cast<std::size_t>(l)].back());
                rels.push_back(r);
            }
            if (!keys.empty()) {
                const ad::NodeId q =
                    tape_.affine(pnode(layer_key(l, "agt", "wq")), d, d, ln3[static_cast<std::size_t>(n)],
                                 pnode(layer_key(l, "agt", "bq")), "agt_q");
                const ad::NodeId attn = tape_.attention(q, keys, vals, rels, cfg.num_heads, "agt_attn");
                const ad::NodeId out = tape_.affine(pnode(layer_key(l, "agt", "wo")), d, d, attn,
                                                    pnode(layer_key(l, "agt", "bo")), "agt_o");
                h[static_cast<std::size_t>(n)] = tape_.add(h[static_cast<std::size_t>(n)], out, "agt_res");
            }
        }

        // Position-wise MLP.
        for (int n = 0; n < n_agents; ++n) {
            if (!row[static_cast<std::size_t>(n)].active) continue;
            AgentState& st = agents_[static_cast<std::size_t>(n)];
            const ad::NodeId ln4 =
                tape_.layer_norm(h[static_cast<std::size_t>(n)], pnode(layer_key(l, "mlp", "ln_g")),
                                 pnode(layer_key(l, "mlp", "ln_b")), "mlp_ln");
            const ad::NodeId h1 = tape_.affine(pnode(layer_key(l, "mlp", "w1")), 4 * d, d, ln4,
                                               pnode(layer_key(l, "mlp", "b1")), "mlp_h1");
            const ad::NodeId act = tape_.gelu(h1, "mlp_gelu");
            const ad::NodeId h2 = tape_.affine(pnode(layer_key(l, "mlp", "w2")), d, 4 * d, act,
                                               pnode(layer_key(l, "mlp", "b2")), "mlp_h2");
            const ad::NodeId x_out = tape_.add(h[static_cast<std::size_t>(n)], h2, "mlp_res");
            st.x[static_cast<std::size_t>(l) + 1].push_back(x_out);
            h[static_cast<std::size_t>(n)] = x_out;
        }
    }

    for (int n = 0; n < n_agents; ++n) {
        if (!row[static_cast<std::size_t>(n)].active) continue;
        agents_[static_cast<std::size_t>(n)].head.push_back(ad::kNoNode);
    }
}

ad::NodeId SequenceRunner::head_node(int agent, int pos) {
    AgentState& st = agents_[static_cast<std::size_t>(agent)];
    ad::NodeId& cached = st.head[static_cast<std::size_t>(pos)];
    if (cached != ad::kNoNode) return cached;
    const ModelConfig& cfg = net_.config();
    const int d = cfg.model_dim;
    const ad::NodeId x_final =
        st.x[static_cast<std::size_t>(cfg.num_layers)][static_cast<std::size_t>(pos)];
    const ad::NodeId lnf = tape_.layer_norm(x_final, pnode("final_ln_g"), pnode("final_ln_b"), "final_ln");
    const ad::NodeId h1 = tape_.affine(pnode("head_w1"), d, d, lnf, pnode("head_b1"), "head_h1");
    const ad::NodeId act = tape_.gelu(h1, "head_gelu");
    cached = tape_.affine(pnode("head_w2"), cfg.vocab_size, d, act, pnode("head_b2"), "head_logits");
    return cached;
}

int SequenceRunner::effective_vocab(int agent) const {
    const AgentCategory cat = agents_[static_cast<std::size_t>(agent)].category;
    const int v = vocabs_.for_category(cat).size();
    if (v == 0) throw std::invalid_argument("SequenceRunner: empty vocabulary for agent category");
    return std::min(v, net_.config().vocab_size);
}

void SequenceRunner::push_future_tokens(std::span<const int> tokens) {
    push_future_tokens(tokens, {}, {});
}

void SequenceRunner::push_future_tokens(std::span<const int> tokens, std::span<const Pose2> poses,
                                        std::span<const char> use_pose) {
    if (static_cast<int>(tokens.size()) != num_agents()) {
        throw std::invalid_argument("push_future_tokens: one token per agent required");
    }
    if (future_steps_ >= scene_.horizon) {
        throw std::invalid_argument("push_future_tokens: history longer than horizon");
    }
    std::vector<RowEntry> row(static_cast<std::size_t>(num_agents()));
    for (int n = 0; n < num_agents(); ++n) {
        AgentState& st = agents_[static_cast<std::size_t>(n)];
        const Vocabulary& vocab = vocabs_.for_category(st.category);
        const int id = tokens[static_cast<std::size_t>(n)];
        if (id < 0 || id >= vocab.size()) {
            throw std::out_of_range("push_future_tokens: token id outside vocabulary");
        }
        RowEntry& e = row[static_cast<std::size_t>(n)];
        e.active = true;
        e.is_sos = false;
        e.token = id;
        if (!use_pose.empty() && use_pose[static_cast<std::size_t>(n)]) {
            e.pose = poses[static_cast<std::size_t>(n)];
        } else {
            e.pose = apply_segment(st.pose_at.back(), vocab.tokens[static_cast<std::size_t>(id)].segment);
        }
        st.future_poses.push_back(e.pose);
    }
    advance_row(row);
    ++future_steps_;
}

ad::NodeId SequenceRunner::logits_node_for_step(int agent, int t) {
    if (t < 1 || t > future_steps_ + 1) {
        throw std::out_of_range("logits_node_for_step: step not yet available");
    }
    const AgentState& st = agents_[static_cast<std::size_t>(agent)];
    const int pos = st.history_len + t - 1;
    return head_node(agent, pos);
}

std::span<const double> SequenceRunner::next_logits(int agent) {
    return tape_.value(next_logits_node(agent));
}

const Pose2& SequenceRunner::current_pose(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].pose_at.back();
}

const std::vector<Pose2>& SequenceRunner::future_poses(int agent) const {
    return agents_[static_cast<std::size_t>(agent)].future_poses;
}

StepLogits forward(const PolicyNet& net, const PolicyParams& params, const Scenario& scenario,
                   const VocabularySet& vocabs, const std::vector<std::vector<int>>& token_history) {
    if (!token_history.empty()) {
        const std::size_t len = token_history.front().size();
        for (const auto& h : token_history) {
            if (h.size() != len) {
                throw std::invalid_argument("forward: token_history lengths must match");
            }
        }
        if (token_history.size() != scenario.agents.size()) {
            throw std::invalid_argument("forward: one history row per agent required");
        }
        if (static_cast<int>(len) > scenario.horizon) {
            throw std::invalid_argument("forward: token_history longer than horizon");
        }
    }
    const SceneEncoding scene = net.encode_scene(scenario, vocabs);
    ad::Tape tape(params.flat.data(), params.flat.size());
    SequenceRunner runner(net, params, scene, vocabs, tape);
    const std::size_t steps = token_history.empty() ? 0 : token_history.front().size();
    std::vector<int> row(scenario.agents.size());
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t n = 0; n < row.size(); ++n) row[n] = token_history[n][t];
        runner.push_future_tokens(row);
    }
    StepLogits out;
    out.per_agent.reserve(scenario.agents.size());
    for (int n = 0; n < runner.num_agents(); ++n) {
        const auto logits = runner.next_logits(n);
        out.per_agent.emplace_back(logits.begin(), logits.end());
    }
    return out;
}

int sample_token(std::span<const double> logits, SplitRng& rng, double temperature) {
    if (temperature < 0.0) throw std::invalid_argument("sample_token: temperature must be >= 0");
    if (logits.empty()) throw std::invalid_argument("sample_token: empty logits");
    if (temperature == 0.0) {
        int best = 0;
        for (std::size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
        }
        return best;
    }
    double m = logits[0] / temperature;
    for (double v : logits) m = std::max(m, v / temperature);
    std::vector<double> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = std::exp(logits[i] / temperature - m);
    return rng.categorical(probs);
}

}  // namespace planlab
