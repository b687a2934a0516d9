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

#include "planlab/tape.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace planlab::ad {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLayerNormEps = 1e-5;

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_bwd(double x) {
    const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return phi + x * pdf;
}

}  // namespace

double log_prob(std::span<const double> logits, int id) {
    if (id < 0 || static_cast<std::size_t>(id) >= logits.size()) {
        throw std::out_of_range("log_prob: id out of range");
    }
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return (logits[static_cast<std::size_t>(id)] - m) - std::log(sum);
}

double kl_categorical(std::span<const double> logits_p, std::span<const double> logits_q) {
    if (logits_p.size() != logits_q.size()) {
        throw std::invalid_argument("kl_categorical: size mismatch");
    }
    const std::size_t k = logits_p.size();
    double mp = logits_p[0], mq = logits_q[0];
    for (double v : logits_p) mp = std::max(mp, v);
    for (double v : logits_q) mq = std::max(mq, v);
    double zp = 0.0, zq = 0.0;
    for (double v : logits_p) zp += std::exp(v - mp);
    for (double v : logits_q) zq += std::exp(v - mq);
    const double lzp = std::log(zp), lzq = std::log(zq);
    double kl = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double lp = (logits_p[i] - mp) - lzp;
        const double lq = (logits_q[i] - mq) - lzq;
        const double p = std::exp(lp);
        kl += p * (lp - lq);
    }
    return std::max(kl, 0.0);
}

void Tape::reset(const double* params, std::size_t param_count) {
    params_ = params;
    param_count_ = param_count;
    nodes_.clear();
    vals_.clear();
    args_.clear();
    aux_f_.clear();
    aux_i_.clear();
    param_grad_.assign(param_count, 0.0);
}

NodeId Tape::push_node(Op op, int out_size, std::span<const NodeId> args,
                       std::span<const double> aux_f, std::span<const int> aux_i, const char* tag,
                       int extra_aux_f) {
    Node n;
    n.op = op;
    n.size = out_size;
    n.val = static_cast<std::int32_t>(vals_.size());
    vals_.resize(vals_.size() + static_cast<std::size_t>(out_size), 0.0);
    n.args = static_cast<std::int32_t>(args_.size());
    n.nargs = static_cast<std::int32_t>(args.size());
    args_.insert(args_.end(), args.begin(), args.end());
    n.aux_f = static_cast<std::int32_t>(aux_f_.size());
    n.naux_f = static_cast<std::int32_t>(aux_f.size()) + extra_aux_f;
    aux_f_.insert(aux_f_.end(), aux_f.begin(), aux_f.end());
    aux_f_.resize(aux_f_.size() + static_cast<std::size_t>(extra_aux_f), 0.0);
    n.aux_i = static_cast<std::int32_t>(aux_i_.size());
    n.naux_i = static_cast<std::int32_t>(aux_i.size());
    aux_i_.insert(aux_i_.end(), aux_i.begin(), aux_i.end());
    n.tag = tag;
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check_node_finite(NodeId id) {
    if (!check_finite_) return;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const double* v = vals_.data() + n.val;
    for (int i = 0; i < n.size; ++i) {
        if (!std::isfinite(v[i])) {
            throw std::runtime_error(std::string("non-finite value produced by op '") + n.tag +
                                     "'");
        }
    }
}

std::span<const double> Tape::value(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return {vals_.data() + n.val, static_cast<std::size_t>(n.size)};
}

double Tape::scalar(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.size != 1) throw std::logic_error("Tape::scalar on non-scalar node");
    return vals_[static_cast<std::size_t>(n.val)];
}

int Tape::size(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].size; }

double Tape::adjoint_scalar(NodeId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.size != 1) throw std::logic_error("Tape::adjoint_scalar on non-scalar node");
    return adj_[static_cast<std::size_t>(n.val)];
}

NodeId Tape::constant(std::span<const double> v, const char* tag) {
    const NodeId id = push_node(Op::kConst, static_cast<int>(v.size()), {}, {}, {}, tag);
    std::memcpy(val_ptr(id), v.data(), v.size() * sizeof(double));
    check_node_finite(id);
    return id;
}

NodeId Tape::param(std::size_t offset, int size, const char* tag) {
    if (offset + static_cast<std::size_t>(size) > param_count_) {
        throw std::out_of_range("Tape::param: slice outside parameter vector");
    }
    const int aux[1] = {static_cast<int>(offset)};
    const NodeId id = push_node(Op::kParam, size, {}, {}, aux, tag);
    std::memcpy(val_ptr(id), params_ + offset, static_cast<std::size_t>(size) * sizeof(double));
    check_node_finite(id);
    return id;
}

NodeId Tape::affine(NodeId w, int rows, int cols, NodeId x, NodeId b, const char* tag) {
    const NodeId args[3] = {w, x, b};
    const int aux[2] = {rows, cols};
    const NodeId id = push_node(Op::kAffine, rows, args, {}, aux, tag);
    const double* wd = val_ptr(w);
    const double* xd = val_ptr(x);
    double* y = val_ptr(id);
    for (int i = 0; i < rows; ++i) {
        const double* wr = wd + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
        double acc = 0.0;
        for (int j = 0; j < cols; ++j) acc += wr[j] * xd[j];
        y[i] = acc;
    }
    if (b != kNoNode) {
        const double* bd = val_ptr(b);
        for (int i = 0; i < rows; ++i) y[i] += bd[i];
    }
    check_node_finite(id);
    return id;
}

NodeId Tape::add(NodeId a, NodeId b, const char* tag) {
    const int n = size(a);
    const NodeId args[2] = {a, b};
    const NodeId id = push_node(Op::kAdd, n, args, {}, {}, tag);
    const double* ad = val_ptr(a);
    const double* bd = val_ptr(b);
    double* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = ad[i] + bd[i];
    check_node_finite(id);
    return id;
}

NodeId Tape::scale(NodeId x, double c, const char* tag) {
    const int n = size(x);
    const NodeId args[1] = {x};
    const double aux[1] = {c};
    const NodeId id = push_node(Op::kScale, n, args, aux, {}, tag);
    const double* xd = val_ptr(x);
    double* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = c * xd[i];
    check_node_finite(id);
    return id;
}

NodeId Tape::axpy(NodeId a, double c, NodeId b, const char* tag) {
    const int n = size(a);
    const NodeId args[2] = {a, b};
    const double aux[1] = {c};
    const NodeId id = push_node(Op::kAxpy, n, args, aux, {}, tag);
    const double* ad = val_ptr(a);
    const double* bd = val_ptr(b);
    double* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = ad[i] + c * bd[i];
    check_node_finite(id);
    return id;
}

NodeId Tape::gelu(NodeId x, const char* tag) {
    const int n = size(x);
    const NodeId args[1] = {x};
    const NodeId id = push_node(Op::kGelu, n, args, {}, {}, tag);
    const double* xd = val_ptr(x);
    double* y = val_ptr(id);
    for (int i = 0; i < n; ++i) y[i] = gelu_fwd(xd[i]);
    check_node_finite(id);
    return id;
}

NodeId Tape::layer_norm(NodeId x, NodeId g, NodeId b, const char* tag) {
    const int n = size(x);
    const NodeId args[3] = {x, g, b};
    // aux: saved {mean, invstd}
    const NodeId id = push_node(Op::kLayerNorm, n, args, {}, {}, tag, /*extra_aux_f=*/2);
    const double* xd = val_ptr(x);
    const double* gd = val_ptr(g);
    const double* bd = val_ptr(b);
    double* y = val_ptr(id);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += xd[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (xd[i] - mean) * (xd[i] - mean);
    var /= n;
    const double invstd = 1.0 / std::sqrt(var + kLayerNormEps);
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    aux_f_[static_cast<std::size_t>(node.aux_f)] = mean;
    aux_f_[static_cast<std::size_t>(node.aux_f) + 1] = invstd;
    for (int i = 0; i < n; ++i) y[i] = (xd[i] - mean) * invstd * gd[i] + bd[i];
    check_node_finite(id);
    return id;
}

NodeId Tape::rel_mlp(std::span<const double> feats, NodeId w1, NodeId b1, NodeId w2, NodeId b2,
                     const char* tag) {
    const int in = static_cast<int>(feats.size());
    const int hidden = size(b1);
    const int out = size(b2);
    const NodeId args[4] = {w1, b1, w2, b2};
    const int aux_i[3] = {in, hidden, out};
    // aux_f: [feats (in) | saved h1 pre-activation (hidden)]
    const NodeId id = push_node(Op::kRelMlp, out, args, feats, aux_i, tag, /*extra_aux_f=*/hidden);
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const double* w1d = val_ptr(w1);
    const double* b1d = val_ptr(b1);
    const double* w2d = val_ptr(w2);
    const double* b2d = val_ptr(b2);
    double* h1 = aux_f_.data() + node.aux_f + in;
    for (int i = 0; i < hidden; ++i) {
        const double* wr = w1d + static_cast<std::size_t>(i) * static_cast<std::size_t>(in);
        double acc = b1d[i];
        for (int j = 0; j < in; ++j) acc += wr[j] * feats[static_cast<std::size_t>(j)];
        h1[i] = acc;
    }
    double* y = val_ptr(id);
    for (int i = 0; i < out; ++i) {
        const double* wr = w2d + static_cast<std::size_t>(i) * static_cast<std::size_t>(hidden);
        double acc = b2d[i];
        for (int j = 0; j < hidden; ++j) acc += wr[j] * gelu_fwd(h1[j]);
        y[i] = acc;
    }
    check_node_finite(id);
    return id;
}

NodeId Tape::attention(NodeId q, std::span<const NodeId> key_base, std::span<const NodeId> val_base,
                       std::span<const NodeId> rel, int num_heads, const char* tag) {
    const int dim = size(q);
    const int nkeys = static_cast<int>(key_base.size());
    if (nkeys == 0) throw std::invalid_argument("attention: no keys");
    if (dim % num_heads != 0) throw std::invalid_argument("attention: dim % heads != 0");
    const int dh = dim / num_heads;
    std::vector<NodeId> args;
    args.reserve(1 + 3 * static_cast<std::size_t>(nkeys));
    args.push_back(q);
    for (int i = 0; i < nkeys; ++i) {
        args.push_back(key_base[static_cast<std::size_t>(i)]);
        args.push_back(val_base[static_cast<std::size_t>(i)]);
        args.push_back(rel[static_cast<std::size_t>(i)]);
    }
    const int aux_i[2] = {num_heads, nkeys};
    // aux_f: saved attention weights, head-major (num_heads x nkeys)
    const NodeId id =
        push_node(Op::kAttention, dim, args, {}, aux_i, tag, /*extra_aux_f=*/num_heads * nkeys);
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const double* qd = val_ptr(q);
    double* alpha = aux_f_.data() + node.aux_f;
    double* y = val_ptr(id);
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> scores(static_cast<std::size_t>(nkeys));
    for (int h = 0; h < num_heads; ++h) {
        const int base = h * dh;
        for (int i = 0; i < nkeys; ++i) {
            const double* kb = val_ptr(key_base[static_cast<std::size_t>(i)]);
            const double* rb = val_ptr(rel[static_cast<std::size_t>(i)]);
            double acc = 0.0;
            for (int d = 0; d < dh; ++d) acc += qd[base + d] * (kb[base + d] + rb[base + d]);
            scores[static_cast<std::size_t>(i)] = acc * inv_sqrt_dh;
        }
        double m = scores[0];
        for (int i = 1; i < nkeys; ++i) m = std::max(m, scores[static_cast<std::size_t>(i)]);
        double z = 0.0;
        for (int i = 0; i < nkeys; ++i) {
            const double e = std::exp(scores[static_cast<std::size_t>(i)] - m);
            alpha[h * nkeys + i] = e;
            z += e;
        }
        const double inv_z = 1.0 / z;
        for (int i = 0; i < nkeys; ++i) alpha[h * nkeys + i] *= inv_z;
        for (int d = 0; d < dh; ++d) y[base + d] = 0.0;
        for (int i = 0; i < nkeys; ++i) {
            const double a = alpha[h * nkeys + i];
            const double* vb = val_ptr(val_base[static_cast<std::size_t>(i)]);
            const double* rb = val_ptr(rel[static_cast<std::size_t>(i)]);
            for (int d = 0; d < dh; ++d) y[base + d] += a * (vb[base + d] + rb[base + d]);
        }
    }
    check_node_finite(id);
    return id;
}

NodeId Tape::pick_log_softmax(NodeId z, int index, int limit, const char* tag) {
    const int k = limit < 0 ? size(z) : limit;
    if (k < 1 || k > size(z)) throw std::out_of_range("pick_log_softmax: bad limit");
    if (index < 0 || index >= k) throw std::out_of_range("pick_log_softmax: index out of range");
    const NodeId args[1] = {z};
    const int aux_i[2] = {index, k};
    // aux_f: saved softmax probabilities
    const NodeId id = push_node(Op::kPickLogSoftmax, 1, args, {}, aux_i, tag, /*extra_aux_f=*/k);
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const double* zd = val_ptr(z);
    double* p = aux_f_.data() + node.aux_f;
    double m = zd[0];
    for (int i = 1; i < k; ++i) m = std::max(m, zd[i]);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += std::exp(zd[i] - m);
    const double log_sum = std::log(sum);
    const double inv_sum = 1.0 / sum;
    for (int i = 0; i < k; ++i) p[i] = std::exp(zd[i] - m) * inv_sum;
    *val_ptr(id) = (zd[index] - m) - log_sum;
    check_node_finite(id);
    return id;
}

NodeId Tape::kl_vs_const_logits(NodeId z, std::span<const double> ref_logits, const char* tag) {
    const int k = static_cast<int>(ref_logits.size());
    if (k < 1 || k > size(z)) {
        throw std::invalid_argument("kl_vs_const_logits: reference size must be in [1, node size]");
    }
    const NodeId args[1] = {z};
    const int aux_i[1] = {k};
    // aux_f: [t_i = lp_i - lq_i (k) | p_i (k)]
    const NodeId id = push_node(Op::kKlVsConst, 1, args, {}, aux_i, tag, /*extra_aux_f=*/2 * k);
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const double* zd = val_ptr(z);
    double* t = aux_f_.data() + node.aux_f;
    double* p = t + k;
    double mp = zd[0], mq = ref_logits[0];
    for (int i = 1; i < k; ++i) mp = std::max(mp, zd[i]);
    for (double v : ref_logits) mq = std::max(mq, v);
    double zp = 0.0, zq = 0.0;
    for (int i = 0; i < k; ++i) zp += std::exp(zd[i] - mp);
    for (double v : ref_logits) zq += std::exp(v - mq);
    const double lzp = std::log(zp), lzq = std::log(zq);
    double kl = 0.0;
    for (int i = 0; i < k; ++i) {
        const double lp = (zd[i] - mp) - lzp;
        const double lq = (ref_logits[static_cast<std::size_t>(i)] - mq) - lzq;
        t[i] = lp - lq;
        p[i] = std::exp(lp);
        kl += p[i] * t[i];
    }
    *val_ptr(id) = kl;
    check_node_finite(id);
    return id;
}

NodeId Tape::exp_mul(NodeId x, double a, double s, const char* tag) {
    const NodeId args[1] = {x};
    const double aux[2] = {a, s};
    const NodeId id = push_node(Op::kExpMul, 1, args, aux, {}, tag);
    *val_ptr(id) = a * std::exp(scalar(x) + s);
    check_node_finite(id);
    return id;
}

NodeId Tape::weighted_sum(std::span<const NodeId> terms, std::span<const double> weights,
                          const char* tag) {
    if (terms.size() != weights.size()) {
        throw std::invalid_argument("weighted_sum: terms/weights mismatch");
    }
    const NodeId id = push_node(Op::kWeightedSum, 1, terms, weights, {}, tag);
    double acc = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        acc += weights[i] * scalar(terms[i]);
    }
    *val_ptr(id) = acc;
    check_node_finite(id);
    return id;
}

NodeId Tape::sq_norm_half(NodeId x, const char* tag) {
    const NodeId args[1] = {x};
    const NodeId id = push_node(Op::kSqNormHalf, 1, args, {}, {}, tag);
    const double* xd = val_ptr(x);
    double acc = 0.0;
    for (int i = 0; i < size(x); ++i) acc += xd[i] * xd[i];
    *val_ptr(id) = 0.5 * acc;
    check_node_finite(id);
    return id;
}

void Tape::backward(NodeId root) {
    adj_.assign(vals_.size(), 0.0);
    const Node& r = nodes_[static_cast<std::size_t>(root)];
    if (r.size != 1) throw std::logic_error("Tape::backward: root must be scalar");
    adj_[static_cast<std::size_t>(r.val)] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(root) + 1; i-- > 0;) {
        backward_node(nodes_[i]);
    }
}

void Tape::backward_node(const Node& n) {
    const double* dy = adj_.data() + n.val;
    const NodeId* args = args_.data() + n.args;
    switch (n.op) {
        case Op::kConst:
            break;
        case Op::kParam: {
            const int offset = aux_i_[static_cast<std::size_t>(n.aux_i)];
            double* g = param_grad_.data() + offset;
            for (int i = 0; i < n.size; ++i) g[i] += dy[i];
            break;
        }
        case Op::kAffine: {
            const int rows = aux_i_[static_cast<std::size_t>(n.aux_i)];
            const int cols = aux_i_[static_cast<std::size_t>(n.aux_i) + 1];
            const double* wd = val_ptr(args[0]);
            const double* xd = val_ptr(args[1]);
            double* dw = adj_ptr(args[0]);
            double* dx = adj_ptr(args[1]);
            for (int i = 0; i < rows; ++i) {
                const double d = dy[i];
                if (d == 0.0) continue;
                const double* wr = wd + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
                double* dwr = dw + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
                for (int j = 0; j < cols; ++j) {
                    dwr[j] += d * xd[j];
                    dx[j] += d * wr[j];
                }
            }
            if (args[2] != kNoNode) {
                double* db = adj_ptr(args[2]);
                for (int i = 0; i < rows; ++i) db[i] += dy[i];
            }
            break;
        }
        case Op::kAdd: {
            double* da = adj_ptr(args[0]);
            double* db = adj_ptr(args[1]);
            for (int i = 0; i < n.size; ++i) {
                da[i] += dy[i];
                db[i] += dy[i];
            }
            break;
        }
        case Op::kScale: {
            const double c = aux_f_[static_cast<std::size_t>(n.aux_f)];
            double* dx = adj_ptr(args[0]);
            for (int i = 0; i < n.size; ++i) dx[i] += c * dy[i];
            break;
        }
        case Op::kAxpy: {
            const double c = aux_f_[static_cast<std::size_t>(n.aux_f)];
            double* da = adj_ptr(args[0]);
            double* db = adj_ptr(args[1]);
            for (int i = 0; i < n.size; ++i) {
                da[i] += dy[i];
                db[i] += c * dy[i];
            }
            break;
        }
        case Op::kGelu: {
            const double* xd = val_ptr(args[0]);
            double* dx = adj_ptr(args[0]);
            for (int i = 0; i < n.size; ++i) dx[i] += dy[i] * gelu_bwd(xd[i]);
            break;
        }
        case Op::kLayerNorm: {
            const double mean = aux_f_[static_cast<std::size_t>(n.aux_f)];
            const double invstd = aux_f_[static_cast<std::size_t>(n.aux_f) + 1];
            const double* xd = val_ptr(args[0]);
            const double* gd = val_ptr(args[1]);
            double* dx = adj_ptr(args[0]);
            double* dg = adj_ptr(args[1]);
            double* db = adj_ptr(args[2]);
            const int sz = n.size;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int i = 0; i < sz; ++i) {
                const double xhat = (xd[i] - mean) * invstd;
                const double dxhat = dy[i] * gd[i];
                dg[i] += dy[i] * xhat;
                db[i] += dy[i];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            const double inv_n = 1.0 / sz;
            for (int i = 0; i < sz; ++i) {
                const double xhat = (xd[i] - mean) * invstd;
                const double dxhat = dy[i] * gd[i];
                dx[i] += invstd * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
            }
            break;
        }
        case Op::kRelMlp: {
            const int in = aux_i_[static_cast<std::size_t>(n.aux_i)];
            const int hidden = aux_i_[static_cast<std::size_t>(n.aux_i) + 1];
            const int out = aux_i_[static_cast<std::size_t>(n.aux_i) + 2];
            const double* feats = aux_f_.data() + n.aux_f;
            const double* h1 = feats + in;
            const double* w2d = val_ptr(args[2]);
            double* dw1 = adj_ptr(args[0]);
            double* db1 = adj_ptr(args[1]);
            double* dw2 = adj_ptr(args[2]);
            double* db2 = adj_ptr(args[3]);
            for (int j = 0; j < hidden; ++j) {
                const double a_j = gelu_fwd(h1[j]);
                double da_j = 0.0;
                for (int i = 0; i < out; ++i) {
                    const double d = dy[i];
                    if (d == 0.0) continue;
                    dw2[static_cast<std::size_t>(i) * static_cast<std::size_t>(hidden) +
                        static_cast<std::size_t>(j)] += d * a_j;
                    da_j += d * w2d[static_cast<std::size_t>(i) * static_cast<std::size_t>(hidden) +
                                    static_cast<std::size_t>(j)];
                }
                const double dh1_j = da_j * gelu_bwd(h1[j]);
                db1[j] += dh1_j;
                double* dw1r = dw1 + static_cast<std::size_t>(j) * static_cast<std::size_t>(in);
                for (int k = 0; k < in; ++k) dw1r[k] += dh1_j * feats[k];
            }
            for (int i = 0; i < out; ++i) db2[i] += dy[i];
            break;
        }
        case Op::kAttention: {
            const int num_heads = aux_i_[static_cast<std::size_t>(n.aux_i)];
            const int nkeys = aux_i_[static_cast<std::size_t>(n.aux_i) + 1];
            const int dim = n.size;
            const int dh = dim / num_heads;
            const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
            const double* alpha = aux_f_.data() + n.aux_f;
            const NodeId q = args[0];
            const double* qd = val_ptr(q);
            double* dq = adj_ptr(q);
            std::vector<double> dscore(static_cast<std::size_t>(nkeys));
            for (int h = 0; h < num_heads; ++h) {
                const int base = h * dh;
                // d_alpha and the softmax Jacobian
                double sum_alpha_dalpha = 0.0;
                for (int i = 0; i < nkeys; ++i) {
                    const double* vb = val_ptr(args[1 + 3 * i + 1]);
                    const double* rb = val_ptr(args[1 + 3 * i + 2]);
                    double da = 0.0;
                    for (int d = 0; d < dh; ++d) da += dy[base + d] * (vb[base + d] + rb[base + d]);
                    dscore[static_cast<std::size_t>(i)] = da;
                    sum_alpha_dalpha += alpha[h * nkeys + i] * da;
                }
                for (int i = 0; i < nkeys; ++i) {
                    const double a = alpha[h * nkeys + i];
                    dscore[static_cast<std::size_t>(i)] =
                        a * (dscore[static_cast<std::size_t>(i)] - sum_alpha_dalpha);
                }
                for (int i = 0; i < nkeys; ++i) {
                    const double ds = dscore[static_cast<std::size_t>(i)] * inv_sqrt_dh;
                    const double a = alpha[h * nkeys + i];
                    const double* kb = val_ptr(args[1 + 3 * i]);
                    const double* rb = val_ptr(args[1 + 3 * i + 2]);
                    double* dkb = adj_ptr(args[1 + 3 * i]);
                    double* dvb = adj_ptr(args[1 + 3 * i + 1]);
                    double* drb = adj_ptr(args[1 + 3 * i + 2]);
                    for (int d = 0; d < dh; ++d) {
                        const double dk = ds * qd[base + d];
                        const double dv = a * dy[base + d];
                        dq[base + d] += ds * (kb[base + d] + rb[base + d]);
                        dkb[base + d] += dk;
                        dvb[base + d] += dv;
                        drb[base + d] += dk + dv;
                    }
                }
            }
            break;
        }
        case Op::kPickLogSoftmax: {
            const int index = aux_i_[static_cast<std::size_t>(n.aux_i)];
            const int k = aux_i_[static_cast<std::size_t>(n.aux_i) + 1];
            const double* p = aux_f_.data() + n.aux_f;
            const double d = dy[0];
            double* dz = adj_ptr(args[0]);
            for (int i = 0; i < k; ++i) dz[i] += d * ((i == index ? 1.0 : 0.0) - p[i]);
            break;
        }
        case Op::kKlVsConst: {
            const int k = aux_i_[static_cast<std::size_t>(n.aux_i)];
            const double* t = aux_f_.data() + n.aux_f;
            const double* p = t + k;
            const double kl = vals_[static_cast<std::size_t>(n.val)];
            const double d = dy[0];
            double* dz = adj_ptr(args[0]);
            for (int i = 0; i < k; ++i) dz[i] += d * p[i] * (t[i] - kl);
            break;
        }
        case Op::kExpMul: {
            adj_ptr(args[0])[0] += dy[0] * vals_[static_cast<std::size_t>(n.val)];
            break;
        }
        case Op::kWeightedSum: {
            const double d = dy[0];
            for (int i = 0; i < n.nargs; ++i) {
                adj_ptr(args[i])[0] += d * aux_f_[static_cast<std::size_t>(n.aux_f) + i];
            }
            break;
        }
        case Op::kSqNormHalf: {
            const double* xd = val_ptr(args[0]);
            double* dx = adj_ptr(args[0]);
            const double d = dy[0];
            for (int i = 0; i < size(args[0]); ++i) dx[i] += d * xd[i];
            break;
        }
    }
}

}  // namespace planlab::ad
