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

#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "planlab/random.hpp"
#include "planlab/tape.hpp"

using namespace planlab;

namespace {

// Builds a scalar loss exercising every differentiable op, then checks the
// analytic gradient against central finite differences coordinate by
// coordinate.
double eval_composite(const std::vector<double>& params, ad::Tape* tape_out = nullptr,
                      ad::NodeId* root_out = nullptr) {
    static thread_local ad::Tape local;
    ad::Tape& tape = tape_out ? *tape_out : local;
    tape.reset(params.data(), params.size());
    // Layout: w (3x3) | b (3) | g (3) | bias (3) | rel w1 (3x4) | rel b1 (3) |
    //         rel w2 (3x3) | rel b2 (3) | x (3)
    std::size_t off = 0;
    const ad::NodeId w = tape.param(off, 9, "w");
    off += 9;
    const ad::NodeId b = tape.param(off, 3, "b");
    off += 3;
    const ad::NodeId g = tape.param(off, 3, "g");
    off += 3;
    const ad::NodeId bias = tape.param(off, 3, "bias");
    off += 3;
    const ad::NodeId rw1 = tape.param(off, 12, "rw1");
    off += 12;
    const ad::NodeId rb1 = tape.param(off, 3, "rb1");
    off += 3;
    const ad::NodeId rw2 = tape.param(off, 9, "rw2");
    off += 9;
    const ad::NodeId rb2 = tape.param(off, 3, "rb2");
    off += 3;
    const ad::NodeId x = tape.param(off, 3, "x");

    const ad::NodeId ln = tape.layer_norm(x, g, bias);
    const ad::NodeId h = tape.affine(w, 3, 3, ln, b);
    const ad::NodeId act = tape.gelu(h);
    const double feats[4] = {0.3, -1.2, 0.5, 2.0};
    const ad::NodeId rel = tape.rel_mlp(feats, rw1, rb1, rw2, rb2);
    const ad::NodeId q = tape.add(act, rel);
    const ad::NodeId kb = tape.scale(ln, 0.8);
    const ad::NodeId vb = tape.axpy(ln, 0.5, act);
    const ad::NodeId keys[2] = {kb, act};
    const ad::NodeId vals[2] = {vb, ln};
    const ad::NodeId rels[2] = {rel, rel};
    const ad::NodeId attn = tape.attention(q, keys, vals, rels, /*num_heads=*/1);

    const ad::NodeId lp = tape.pick_log_softmax(attn, 1);
    const double ref_logits[3] = {0.2, -0.4, 1.0};
    const ad::NodeId kl = tape.kl_vs_const_logits(attn, ref_logits);
    const ad::NodeId ratio = tape.exp_mul(lp, 1.7, 0.2);
    const ad::NodeId sq = tape.sq_norm_half(attn);
    const ad::NodeId terms[4] = {lp, kl, ratio, sq};
    const double weights[4] = {1.0, -0.7, 0.9, 0.01};
    const ad::NodeId loss = tape.weighted_sum(terms, weights);
    if (root_out) *root_out = loss;
    return tape.scalar(loss);
}

}  // namespace

TEST_CASE("tape: constant loss has zero gradient") {
    std::vector<double> params = {1.0, 2.0, 3.0};
    ad::Tape tape(params.data(), params.size());
    const double c[1] = {5.0};
    const ad::NodeId cn = tape.constant(c);
    tape.backward(cn);
    for (double g : tape.param_grad()) CHECK(g == 0.0);
}

TEST_CASE("tape: gradient of half squared norm is the parameter vector") {
    std::vector<double> params = {1.5, -2.0, 0.25, 4.0};
    ad::Tape tape(params.data(), params.size());
    const ad::NodeId p = tape.param(0, 4, "p");
    const ad::NodeId loss = tape.sq_norm_half(p);
    CHECK(tape.scalar(loss) == doctest::Approx(0.5 * (1.5 * 1.5 + 4.0 + 0.0625 + 16.0)));
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
        CHECK(tape.param_grad()[i] == doctest::Approx(params[i]));
    }
}

TEST_CASE("tape: composite graph matches central finite differences") {
    SplitRng rng(2024);
    std::vector<double> params(48);
    for (double& v : params) v = rng.uniform(-0.8, 0.8);
    // Keep the layer-norm gain away from zero for conditioning.
    for (int i = 12; i < 15; ++i) params[static_cast<std::size_t>(i)] += 1.0;

    ad::Tape tape;
    ad::NodeId root;
    eval_composite(params, &tape, &root);
    tape.backward(root);
    const std::vector<double> grad = tape.param_grad();

    for (std::size_t i = 0; i < params.size(); ++i) {
        const double fd = oracle::finite_difference(
            [](const std::vector<double>& p) { return eval_composite(p); }, params, i, 1e-5);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
        CHECK(std::abs(grad[i] - fd) / scale < 1e-6);
    }
}

TEST_CASE("tape: log_prob free function properties") {
    SUBCASE("uniform logits, K = 64") {
        const std::vector<double> logits(64, 0.0);
        CHECK(ad::log_prob(logits, 5) == doctest::Approx(std::log(1.0 / 64.0)));
    }
    SUBCASE("dominant logit saturates to ~0") {
        std::vector<double> logits(8, 0.0);
        logits[3] = 1e6;
        CHECK(ad::log_prob(logits, 3) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("normalization: sum of exp(log_prob) is 1") {
        SplitRng rng(77);
        std::vector<double> logits(32);
        for (double& v : logits) v = rng.uniform(-5, 5);
        double total = 0.0;
        for (int i = 0; i < 32; ++i) total += std::exp(ad::log_prob(logits, i));
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("tape: kl_categorical exactness") {
    SUBCASE("identical logits give zero") {
        const std::vector<double> z = {0.3, -1.0, 2.0, 0.0};
        CHECK(ad::kl_categorical(z, z) == doctest::Approx(0.0));
    }
    SUBCASE("one-hot vs uniform K=64 gives log 64") {
        std::vector<double> p(64, -1e9);
        p[7] = 0.0;
        const std::vector<double> q(64, 0.0);
        CHECK(ad::kl_categorical(p, q) == doctest::Approx(std::log(64.0)).epsilon(1e-9));
    }
    SUBCASE("nonnegative, matches direct summation, zero iff constant shift") {
        SplitRng rng(31);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> p(16), q(16);
            for (double& v : p) v = rng.uniform(-4, 4);
            for (double& v : q) v = rng.uniform(-4, 4);
            const double kl = ad::kl_categorical(p, q);
            CHECK(kl >= 0.0);
            // direct-sum oracle in long double
            long double zp = 0, zq = 0;
            for (double v : p) zp += std::exp(static_cast<long double>(v));
            for (double v : q) zq += std::exp(static_cast<long double>(v));
            long double direct = 0;
            for (int i = 0; i < 16; ++i) {
                const long double pi = std::exp(static_cast<long double>(p[static_cast<std::size_t>(i)])) / zp;
                const long double qi = std::exp(static_cast<long double>(q[static_cast<std::size_t>(i)])) / zq;
                direct += pi * (std::log(pi) - std::log(qi));
            }
            CHECK(std::abs(kl - static_cast<double>(direct)) < 1e-10);
        }
        // constant shift -> zero
        std::vector<double> p(16), q(16);
        for (int i = 0; i < 16; ++i) {
            p[static_cast<std::size_t>(i)] = rng.uniform(-4, 4);
            q[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] + 3.7;
        }
        CHECK(ad::kl_categorical(p, q) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("tape: non-finite intermediates are reported with the op name") {
    std::vector<double> params = {1e200, 1e200, 1e200};
    ad::Tape tape(params.data(), params.size());
    const ad::NodeId p = tape.param(0, 3, "explosive");
    CHECK_THROWS_WITH_AS(tape.sq_norm_half(p),  // 1e200^2 overflows to inf
                         doctest::Contains("sq_norm_half"), std::runtime_error);
}

TEST_CASE("tape: pick_log_softmax limit restricts the distribution") {
    std::vector<double> params = {0.0, 0.0, 50.0};
    ad::Tape tape(params.data(), params.size());
    const ad::NodeId z = tape.param(0, 3, "z");
    // With the limit at 2, the huge third logit is invisible.
    const ad::NodeId lp = tape.pick_log_softmax(z, 0, 2);
    CHECK(tape.scalar(lp) == doctest::Approx(std::log(0.5)));
}
