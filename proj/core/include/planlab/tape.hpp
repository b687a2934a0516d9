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
#include <vector>

namespace planlab::ad {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Reverse-mode tape over flat double vectors. Ops execute eagerly on an
/// arena; backward() runs the recorded graph in reverse and accumulates
/// parameter adjoints into a flat gradient aligned with the bound parameter
/// vector. One tape per loss evaluation; reset() keeps the arena capacity.
///
/// The op set is exactly what the policy network and its losses need; the
/// attention op is fused per query to keep graphs small.
class Tape {
public:
    Tape() = default;
    Tape(const double* params, std::size_t param_count) { reset(params, param_count); }

    void reset(const double* params, std::size_t param_count);

    /// Per-op output finiteness check; throws std::runtime_error naming the
    /// offending op when a non-finite value appears.
    void set_check_finite(bool on) { check_finite_ = on; }

    // ── graph builders ──────────────────────────────────────────────────

    NodeId constant(std::span<const double> v, const char* tag = "const");
    /// View of [offset, offset+size) of the bound parameter vector.
    NodeId param(std::size_t offset, int size, const char* tag);
    /// y = W x + b with W row-major (rows x cols); b may be kNoNode.
    NodeId affine(NodeId w, int rows, int cols, NodeId x, NodeId b, const char* tag);
    NodeId add(NodeId a, NodeId b, const char* tag = "add");
    NodeId scale(NodeId x, double c, const char* tag = "scale");
    /// y = a + c * b
    NodeId axpy(NodeId a, double c, NodeId b, const char* tag = "axpy");
    NodeId gelu(NodeId x, const char* tag = "gelu");
    /// y = (x - mean) / sqrt(var + eps) * g + b
    NodeId layer_norm(NodeId x, NodeId g, NodeId b, const char* tag = "layer_norm");
    /// y = w2 * gelu(w1 * feats + b1) + b2 for a constant feature vector.
    NodeId rel_mlp(std::span<const double> feats, NodeId w1, NodeId b1, NodeId w2, NodeId b2,
                   const char* tag = "rel_mlp");
    /// Fused single-query multi-head attention. keys/values are per-key base
    /// projections; rel[i] is added to both key i and value i before use.
    NodeId attention(NodeId q, std::span<const NodeId> key_base, std::span<const NodeId> val_base,
                     std::span<const NodeId> rel, int num_heads, const char* tag = "attention");
    /// scalar: log softmax(z[0..limit))[index], max-subtracted. limit < 0
    /// means the full node; entries past the limit get zero adjoint.
    NodeId pick_log_softmax(NodeId z, int index, int limit = -1, const char* tag = "log_prob");
    /// scalar: KL(softmax(z[0..k)) || softmax(ref_logits)) with constant
    /// reference; k = ref_logits.size() <= node size.
    NodeId kl_vs_const_logits(NodeId z, std::span<const double> ref_logits,
                              const char* tag = "kl");
    /// scalar: a * exp(x + s) for scalar node x.
    NodeId exp_mul(NodeId x, double a, double s, const char* tag = "exp_mul");
    /// scalar: sum_i w_i * terms_i over scalar nodes.
    NodeId weighted_sum(std::span<const NodeId> terms, std::span<const double> weights,
                        const char* tag = "weighted_sum");
    /// scalar: 0.5 * |x|^2
    NodeId sq_norm_half(NodeId x, const char* tag = "sq_norm_half");

    // ── access ──────────────────────────────────────────────────────────

    std::span<const double> value(NodeId id) const;
    double scalar(NodeId id) const;
    int size(NodeId id) const;

    /// Reverse pass from a scalar root (seeds adjoint 1). Parameter adjoints
    /// accumulate into param_grad(); node adjoints are reset per call.
    void backward(NodeId root);
    const std::vector<double>& param_grad() const { return param_grad_; }
    /// Adjoint of an intermediate scalar node after backward().
    double adjoint_scalar(NodeId id) const;

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        kConst,
        kParam,
        kAffine,
        kAdd,
        kScale,
        kAxpy,
        kGelu,
        kLayerNorm,
        kRelMlp,
        kAttention,
        kPickLogSoftmax,
        kKlVsConst,
        kExpMul,
        kWeightedSum,
        kSqNormHalf,
    };

    struct Node {
        Op op;
        std::int32_t val;    // offset into vals_
        std::int32_t size;   // output length
        std::int32_t args;   // offset into args_
        std::int32_t nargs;
        std::int32_t aux_f;  // offset into aux_f_
        std::int32_t naux_f;
        std::int32_t aux_i;  // offset into aux_i_
        std::int32_t naux_i;
        const char* tag;     // static or layout-owned string
    };

    NodeId push_node(Op op, int out_size, std::span<const NodeId> args,
                     std::span<const double> aux_f, std::span<const int> aux_i, const char* tag,
                     int extra_aux_f = 0);
    double* val_ptr(NodeId id) { return vals_.data() + nodes_[static_cast<std::size_t>(id)].val; }
    const double* val_ptr(NodeId id) const {
        return vals_.data() + nodes_[static_cast<std::size_t>(id)].val;
    }
    double* adj_ptr(NodeId id) { return adj_.data() + nodes_[static_cast<std::size_t>(id)].val; }
    void check_node_finite(NodeId id);
    void backward_node(const Node& n);

    const double* params_ = nullptr;
    std::size_t param_count_ = 0;
    bool check_finite_ = true;

    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> adj_;
    std::vector<NodeId> args_;
    std::vector<double> aux_f_;
    std::vector<int> aux_i_;
    std::vector<double> param_grad_;
};

/// Numerically stable log softmax(logits)[id]; shares arithmetic with the
/// tape op so sampled and recomputed log-probs agree bit-exactly.
double log_prob(std::span<const double> logits, int id);

/// Exact categorical KL between two logit vectors of equal length.
double kl_categorical(std::span<const double> logits_p, std::span<const double> logits_q);

}  // namespace planlab::ad
