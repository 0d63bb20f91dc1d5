// SPDX-License-Identifier: Apache-2.0
//
// pingpong: active sensing simulation for reciprocal MIMO channels
// Copyright (C) 2026 The pingpong Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <doctest.h>

#include <cmath>
#include <set>

#include "pingpong/activenet.hpp"
#include "pingpong/baselines.hpp"
#include "pingpong/training.hpp"
#include "test_util.hpp"

using namespace pingpong;
using testutil::max_abs;
using testutil::to_eigen;

namespace {

Eigen::MatrixXd as_matrix(const ad::Parameter &p) {
    Eigen::MatrixXd m(p.rows, p.cols);
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.cols; ++c)
            m(r, c) = p.value[r * p.cols + c];
    return m;
}

Eigen::MatrixXd as_matrix(const ad::Tensor &t) {
    Eigen::MatrixXd m(t.rows(), t.cols());
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c)
            m(r, c) = t.at(r, c);
    return m;
}

std::vector<double> flat(const Eigen::MatrixXd &m) {
    std::vector<double> v;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            v.push_back(m(r, c));
    return v;
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd &x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

// Row-vector GRU with input x hidden weights, written directly from the gate equations.
Eigen::MatrixXd gru_oracle(const GruParams &p, const Eigen::MatrixXd &h, const Eigen::MatrixXd &x) {
    auto bias = [&](const ad::Parameter &b) -> Eigen::MatrixXd { return as_matrix(b).replicate(x.rows(), 1); };
    const Eigen::MatrixXd r = sigmoid(x * as_matrix(p.w_ir) + bias(p.b_ir) + h * as_matrix(p.w_hr) + bias(p.b_hr));
    const Eigen::MatrixXd z = sigmoid(x * as_matrix(p.w_iz) + bias(p.b_iz) + h * as_matrix(p.w_hz) + bias(p.b_hz));
    const Eigen::MatrixXd n =
        (x * as_matrix(p.w_in) + bias(p.b_in) + r.cwiseProduct(h * as_matrix(p.w_hn) + bias(p.b_hn))).array().tanh().matrix();
    return (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
}

void randomize(std::vector<ad::Parameter *> ps, Rng &rng, double sd) {
    std::normal_distribution<double> d(0.0, sd);
    for (auto *p : ps)
        for (auto &v : p->value)
            v = d(rng);
}

ModelDims small_dims(Mode mode) {
    ModelDims d;
    d.mode = mode;
    d.m_t = 6;
    d.m_r = 5;
    d.n_s = 2;
    d.n_rf = mode == Mode::Hybrid ? 3 : 0;
    d.hidden = 8;
    d.width = 12;
    d.n_f = 4;
    return d;
}

} // namespace

TEST_CASE("GRU cell with zero parameters halves the state") {
    GruParams p("g", 4, 3);
    ad::Tape tape;
    const ad::Tensor h = tape.constant(2, 3, {0.2, -0.4, 1.0, 0.6, 0.0, -1.0});
    const ad::Tensor out = gru_cell_forward(tape, p, h, tape.constant(2, 4, 1.5));
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(out.value()[i] == doctest::Approx(0.5 * h.value()[i]).epsilon(1e-15));
}

TEST_CASE("GRU cell matches the gate equations") {
    Rng rng(1);
    GruParams p("g", 5, 7);
    randomize(p.params(), rng, 0.7);
    const Eigen::MatrixXd h = Eigen::MatrixXd::Random(3, 7), x = 2.0 * Eigen::MatrixXd::Random(3, 5);
    ad::Tape tape;
    const ad::Tensor out = gru_cell_forward(tape, p, tape.constant(3, 7, flat(h)), tape.constant(3, 5, flat(x)));
    CHECK((as_matrix(out) - gru_oracle(p, h, x)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(as_matrix(out).cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("GRU cell gradient") {
    Rng rng(2);
    GruParams p("g", 4, 5);
    randomize(p.params(), rng, 0.5);
    const auto x = flat(Eigen::MatrixXd::Random(3, 4)), h = flat(Eigen::MatrixXd::Random(3, 5));
    const auto w = flat(Eigen::MatrixXd::Random(3, 5));
    auto loss = [&](bool with_grad) {
        ad::Tape tape;
        const ad::Tensor out = gru_cell_forward(tape, p, tape.constant(3, 5, h), tape.constant(3, 4, x));
        const ad::Tensor l = ad::sum(ad::mul(out, tape.constant(3, 5, w)));
        if (with_grad) {
            for (auto *q : p.params())
                q->zero_grad();
            tape.backward(l);
            tape.flush_param_grads();
        }
        return l.item();
    };
    const auto ps = p.params();
    CHECK(ad::grad_check(loss, ps).max_rel_error < 1e-5);
}

TEST_CASE("dense network matches an explicit forward pass") {
    Rng rng(3);
    DenseParams p("d", {4, 6, 5, 3});
    randomize(p.params(), rng, 0.8);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 4);
    Eigen::MatrixXd a = x;
    for (std::size_t k = 0; k < 3; ++k) {
        a = a * as_matrix(p.weights[k]) + as_matrix(p.biases[k]).replicate(2, 1);
        if (k < 2)
            a = a.cwiseMax(0.0);
    }
    ad::Tape tape;
    const ad::Tensor out = dense_forward(tape, p, tape.constant(2, 4, flat(x)));
    CHECK((as_matrix(out) - a).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(p.in_dim() == 4);
    CHECK(p.out_dim() == 3);
}

TEST_CASE("agent parameter layout") {
    const ModelDims d = small_dims(Mode::Hybrid);
    AgentParams a(d.agent(Role::A)), b(d.agent(Role::B));
    CHECK(a.dims.m == 6);
    CHECK(b.dims.m == 5);
    CHECK(a.sense.out_dim() == 2 * 3);
    CHECK(a.analog_tx.out_dim() == 6 * 3);
    CHECK(a.analog_tx.in_dim() == 2 * 4);
    CHECK(a.w0_re.size() == 2 * 3);
    CHECK(b.w0_re.size() == 0);
    CHECK(b.theta_t0.size() == 0);
    CHECK(b.theta_r0.size() == 5 * 3);
    std::set<std::string> names;
    for (const auto *p : a.params())
        CHECK(names.insert(p->name).second);
    for (const auto *p : b.params())
        CHECK(names.insert(p->name).second);
}

TEST_CASE("zeroed heads reduce the digital agents to power iteration") {
    Rng rng(4);
    const ModelDims d = small_dims(Mode::Digital);
    for (int t = 0; t < 20; ++t) {
        Checkpoint ck = initial_checkpoint(d, 100 + t);
        zero_output_layers(ck.a);
        zero_output_layers(ck.b);
        const ChannelMatrix g = rayleigh_channel(5, 6, rng);
        const NoiseSpec noise = NoiseSpec::from_snr_db(5.0);
        const std::uint64_t seed = rng();
        Rng r1(seed), r2(seed);
        LearnedAgentPolicy la(ck.a), lb(ck.b);
        const EpisodeResult learned = run_episode(g, la, lb, 5, noise, r1, Mode::Digital, {.record_intermediates = true});
        PowerIterationPolicy pa(overall_matrix(learned.sensing_a[0])), pb(ComplexMatrix{});
        const EpisodeResult power = run_episode(g, pa, pb, 5, noise, r2, Mode::Digital, {.record_intermediates = true});
        for (std::size_t l = 0; l < 5; ++l) {
            CHECK(max_abs_diff(overall_matrix(learned.sensing_a[l]), overall_matrix(power.sensing_a[l])) < 1e-9);
            CHECK(max_abs_diff(overall_matrix(learned.sensing_b[l]), overall_matrix(power.sensing_b[l])) < 1e-9);
            CHECK(max_abs_diff(learned.intermediates[l].first, power.intermediates[l].first) < 1e-9);
            CHECK(max_abs_diff(learned.intermediates[l].second, power.intermediates[l].second) < 1e-9);
        }
        CHECK(std::abs(learned.objective - power.objective) < 1e-9);
    }
}

TEST_CASE("zeroed digital agents reach the perfect-CSI objective without noise") {
    Rng rng(5);
    ModelDims d = small_dims(Mode::Digital);
    d.m_t = d.m_r = 6;
    Checkpoint ck = initial_checkpoint(d, 3);
    zero_output_layers(ck.a);
    zero_output_layers(ck.b);
    const ComplexMatrix u = random_orthonormal(6, 6, rng), v = random_orthonormal(6, 6, rng);
    ComplexMatrix s(6, 6);
    const double sv[6] = {5.0, 3.0, 1.0, 0.7, 0.3, 0.1};
    for (int i = 0; i < 6; ++i)
        s(i, i) = sv[i];
    ChannelMatrix g;
    g.g = u * s * v.adjoint();
    LearnedAgentPolicy a(ck.a), b(ck.b);
    const EpisodeResult r = run_episode(g, a, b, 30, NoiseSpec::noiseless(), rng, Mode::Digital);
    CHECK(std::abs(r.objective - perfect_csi_objective(g, 2)) < 1e-6);
}

TEST_CASE("trained-shape digital agents emit orthonormal blocks and bounded states") {
    Rng rng(6);
    const ModelDims d = small_dims(Mode::Digital);
    Checkpoint ck = initial_checkpoint(d, 9);
    ad::Tape tape;
    AgentRun a(ck.a, tape, 3, false);
    for (int round = 0; round < 6; ++round) {
        std::vector<ad::CTensor> y;
        for (int i = 0; i < 2; ++i) {
            const ComplexMatrix col = sample_complex_gaussian(3, 6, 4.0, rng);
            std::vector<double> re, im;
            for (const auto &x : col.data()) {
                re.push_back(x.real());
                im.push_back(x.imag());
            }
            y.push_back({tape.constant(3, 6, re), tape.constant(3, 6, im)});
        }
        const BatchBeamformer w = a.sensing_step(y);
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(orthonormality_error(overall_row(w, b, 6)) < 1e-9);
            CHECK(orthonormality_error(overall_row(a.final_beamformer(), b, 6)) < 1e-9);
        }
        for (double h : a.hidden().value())
            CHECK(std::abs(h) <= 1.0);
    }
}

TEST_CASE("hidden states are equivariant under stream permutation") {
    Rng rng(7);
    const ModelDims d = small_dims(Mode::Digital);
    Checkpoint ck = initial_checkpoint(d, 11);
    const ComplexMatrix y = sample_complex_gaussian(6, 2, 1.0, rng);
    ComplexMatrix swapped(6, 2);
    swapped.set_col(0, y.col(1));
    swapped.set_col(1, y.col(0));
    ad::Tape t1, t2;
    AgentRun r1(ck.a, t1, 1, false), r2(ck.a, t2, 1, false);
    r1.sensing_step(matrix_to_columns(t1, y));
    r2.sensing_step(matrix_to_columns(t2, swapped));
    const Eigen::MatrixXd h1 = as_matrix(r1.hidden()), h2 = as_matrix(r2.hidden());
    CHECK((h1.row(0) - h2.row(1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((h1.row(1) - h2.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("learned policies are deterministic") {
    Rng rng(8);
    const ModelDims d = small_dims(Mode::Hybrid);
    Checkpoint ck = initial_checkpoint(d, 13);
    const ChannelMatrix g = mmwave_channel(5, 6, 3, rng);
    Rng r1(77), r2(77);
    LearnedAgentPolicy a1(ck.a), b1(ck.b), a2(ck.a), b2(ck.b);
    const auto e1 = run_episode(g, a1, b1, 3, NoiseSpec::from_snr_db(0.0), r1, Mode::Hybrid);
    const auto e2 = run_episode(g, a2, b2, 3, NoiseSpec::from_snr_db(0.0), r2, Mode::Hybrid);
    CHECK(e1.w_t_overall == e2.w_t_overall);
    CHECK(e1.w_r_overall == e2.w_r_overall);
}

TEST_CASE("hybrid agents") {
    Rng rng(9);
    const ModelDims d = small_dims(Mode::Hybrid);
    Checkpoint ck = initial_checkpoint(d, 15);

    SUBCASE("zero analog head output gives zero phases") {
        auto &last_w = ck.a.analog_tx.weights.back();
        auto &last_b = ck.a.analog_tx.biases.back();
        std::fill(last_w.value.begin(), last_w.value.end(), 0.0);
        std::fill(last_b.value.begin(), last_b.value.end(), 0.0);
        ad::Tape tape;
        AgentRun a(ck.a, tape, 1, false);
        const BatchBeamformer w = a.sensing_step(matrix_to_columns(tape, sample_complex_gaussian(3, 2, 1.0, rng)));
        for (std::size_t i = 0; i < w.analog.re.size(); ++i) {
            CHECK(w.analog.re.value()[i] == 1.0);
            CHECK(w.analog.im.value()[i] == 0.0);
        }
    }
    SUBCASE("unit modulus, unit-norm overall columns, final analog is the latest matrix") {
        ad::Tape tape;
        AgentRun a(ck.a, tape, 2, false), b(ck.b, tape, 2, false);
        for (int round = 0; round < 3; ++round) {
            std::vector<ad::CTensor> y;
            for (int i = 0; i < 2; ++i) {
                const ComplexMatrix col = sample_complex_gaussian(2, 3, 1.0, rng);
                std::vector<double> re, im;
                for (const auto &x : col.data()) {
                    re.push_back(x.real());
                    im.push_back(x.imag());
                }
                y.push_back({tape.constant(2, 3, re), tape.constant(2, 3, im)});
            }
            const BatchBeamformer wa = a.sensing_step(y);
            b.sensing_step(y);
            const BatchBeamformer fa = a.final_beamformer(), fb = b.final_beamformer();
            for (std::size_t r = 0; r < 2; ++r) {
                const HybridBeamformer h = std::get<HybridBeamformer>(sensing_row(wa, r, 6));
                for (const auto &x : h.analog.data())
                    CHECK(std::abs(std::abs(x) - 1.0) < 1e-15);
                for (std::size_t c = 0; c < 2; ++c) {
                    CHECK(std::abs(h.overall().column_norm(c) - 1.0) < 1e-12);
                    CHECK(std::abs(overall_row(fa, r, 6).column_norm(c) - 1.0) < 1e-12);
                    CHECK(std::abs(overall_row(fb, r, 5).column_norm(c) - 1.0) < 1e-12);
                }
            }
            for (std::size_t i = 0; i < fa.analog.re.size(); ++i) {
                CHECK(fa.analog.re.value()[i] == wa.analog.re.value()[i]);
                CHECK(fa.analog.im.value()[i] == wa.analog.im.value()[i]);
            }
            const ad::CTensor fr = b.receive_analog();
            for (std::size_t i = 0; i < fb.analog.re.size(); ++i) {
                CHECK(fb.analog.re.value()[i] == fr.re.value()[i]);
                CHECK(fb.analog.im.value()[i] == fr.im.value()[i]);
            }
        }
    }
    SUBCASE("zeroed hybrid agents never beat the fully digital optimum") {
        zero_output_layers(ck.a);
        zero_output_layers(ck.b);
        for (int t = 0; t < 100; ++t) {
            const ChannelMatrix g = mmwave_channel(5, 6, 4, rng);
            LearnedAgentPolicy a(ck.a), b(ck.b);
            const EpisodeResult r = run_episode(g, a, b, 4, NoiseSpec::from_snr_db(10.0), rng, Mode::Hybrid);
            CHECK(r.objective <= perfect_csi_objective(g, 2) + 1e-9);
        }
    }
}
