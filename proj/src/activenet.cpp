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

#include "pingpong/activenet.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pingpong {

using ad::CTensor;
using ad::Parameter;
using ad::Tape;
using ad::Tensor;

// ---- parameter containers ------------------------------------------------------

GruParams::GruParams(const std::string &prefix, std::size_t in, std::size_t hid)
    : input_dim(in), hidden_dim(hid), w_ir(prefix + ".w_ir", in, hid), w_hr(prefix + ".w_hr", hid, hid),
      w_iz(prefix + ".w_iz", in, hid), w_hz(prefix + ".w_hz", hid, hid), w_in(prefix + ".w_in", in, hid),
      w_hn(prefix + ".w_hn", hid, hid), b_ir(prefix + ".b_ir", 1, hid), b_hr(prefix + ".b_hr", 1, hid),
      b_iz(prefix + ".b_iz", 1, hid), b_hz(prefix + ".b_hz", 1, hid), b_in(prefix + ".b_in", 1, hid),
      b_hn(prefix + ".b_hn", 1, hid) {}

std::vector<Parameter *> GruParams::params() {
    return {&w_ir, &w_hr, &w_iz, &w_hz, &w_in, &w_hn, &b_ir, &b_hr, &b_iz, &b_hz, &b_in, &b_hn};
}

DenseParams::DenseParams(const std::string &prefix, const std::vector<std::size_t> &dims) {
    if (dims.size() < 2)
        throw Error(ErrorCode::ShapeMismatch, "dense network needs at least input and output sizes");
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        weights.emplace_back(prefix + ".w" + std::to_string(k), dims[k], dims[k + 1]);
        biases.emplace_back(prefix + ".b" + std::to_string(k), 1, dims[k + 1]);
    }
}

std::vector<Parameter *> DenseParams::params() {
    std::vector<Parameter *> out;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        out.push_back(&weights[k]);
        out.push_back(&biases[k]);
    }
    return out;
}

AgentDims ModelDims::agent(Role role) const {
    AgentDims d;
    d.mode = mode;
    d.role = role;
    d.m = role == Role::A ? m_t : m_r;
    d.n_s = n_s;
    d.n_rf = n_rf;
    d.hidden = hidden;
    d.width = width;
    d.n_f = n_f;
    return d;
}

AgentParams::AgentParams(const AgentDims &d) : dims(d) {
    if (d.m < 1 || d.n_s < 1 || d.hidden < 1 || d.width < 1)
        throw Error(ErrorCode::DimensionMismatch, "agent dimensions must be positive");
    const bool hybrid = d.mode == Mode::Hybrid;
    if (hybrid && (d.n_rf < d.n_s || d.n_rf > d.m || d.n_f < 1))
        throw Error(ErrorCode::DimensionMismatch, "hybrid agent needs n_s <= n_rf <= m and n_f >= 1");
    if (d.pilot_dim() < d.n_s)
        throw Error(ErrorCode::DimensionMismatch, "more streams than pilot dimensions");
    const std::string tag = d.role == Role::A ? "a" : "b";
    const std::size_t k = d.pilot_dim();
    gru = GruParams(tag + ".gru", 2 * k, d.hidden);
    sense = DenseParams(tag + ".sense", {d.hidden, d.width, 2 * k});
    final_net = DenseParams(tag + ".final", {d.hidden, d.width, 2 * k});
    if (d.role == Role::A) {
        w0_re = Parameter(tag + ".w0_re", d.n_s, k);
        w0_im = Parameter(tag + ".w0_im", d.n_s, k);
    }
    if (hybrid) {
        linear_z = DenseParams(tag + ".linear_z", {d.hidden, d.n_f});
        analog_tx = DenseParams(tag + ".analog_tx", {d.n_s * d.n_f, d.width, d.m * d.n_rf});
        analog_rx = DenseParams(tag + ".analog_rx", {d.n_s * d.n_f, d.width, d.m * d.n_rf});
        if (d.role == Role::A)
            theta_t0 = Parameter(tag + ".theta_t0", 1, d.m * d.n_rf);
        theta_r0 = Parameter(tag + ".theta_r0", 1, d.m * d.n_rf);
    }
}

std::vector<Parameter *> AgentParams::params() {
    std::vector<Parameter *> out = gru.params();
    for (auto *net : {&sense, &final_net, &linear_z, &analog_tx, &analog_rx})
        for (auto *p : net->params())
            out.push_back(p);
    for (auto *p : {&w0_re, &w0_im, &theta_t0, &theta_r0})
        if (p->size() > 0)
            out.push_back(p);
    return out;
}

std::vector<const Parameter *> AgentParams::params() const {
    auto ps = const_cast<AgentParams *>(this)->params();
    return {ps.begin(), ps.end()};
}

std::size_t AgentParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto *p : params())
        n += p->size();
    return n;
}

void initialize(AgentParams &p, Rng &rng) {
    auto fill_uniform = [&rng](Parameter &x, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto &v : x.value)
            v = u(rng);
    };
    const double gb = 1.0 / std::sqrt(static_cast<double>(p.gru.hidden_dim));
    for (auto *x : p.gru.params())
        fill_uniform(*x, gb);
    for (auto *net : {&p.sense, &p.final_net, &p.linear_z, &p.analog_tx, &p.analog_rx})
        for (std::size_t k = 0; k < net->weights.size(); ++k) {
            const double b = 1.0 / std::sqrt(static_cast<double>(net->weights[k].rows));
            fill_uniform(net->weights[k], b);
            fill_uniform(net->biases[k], b);
        }
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto *x : {&p.w0_re, &p.w0_im})
        for (auto &v : x->value)
            v = nd(rng);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    for (auto *x : {&p.theta_t0, &p.theta_r0})
        for (auto &v : x->value)
            v = ph(rng);
}

void zero_output_layers(AgentParams &p) {
    for (auto *net : {&p.sense, &p.final_net}) {
        std::fill(net->weights.back().value.begin(), net->weights.back().value.end(), 0.0);
        std::fill(net->biases.back().value.begin(), net->biases.back().value.end(), 0.0);
    }
}

// ---- building blocks -------------------------------------------------------------

BoundGru bind(Tape &tape, GruParams &p, bool track) {
    return {tape.param(p.w_ir, track), tape.param(p.w_hr, track), tape.param(p.w_iz, track),
            tape.param(p.w_hz, track), tape.param(p.w_in, track), tape.param(p.w_hn, track),
            tape.param(p.b_ir, track), tape.param(p.b_hr, track), tape.param(p.b_iz, track),
            tape.param(p.b_hz, track), tape.param(p.b_in, track), tape.param(p.b_hn, track)};
}

BoundDense bind(Tape &tape, DenseParams &p, bool track) {
    BoundDense b;
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        b.w.push_back(tape.param(p.weights[k], track));
        b.b.push_back(tape.param(p.biases[k], track));
    }
    return b;
}

Tensor gru_cell_forward(const BoundGru &p, const Tensor &h, const Tensor &x) {
    using namespace ad;
    if (x.cols() != p.w_ir.rows() || h.cols() != p.w_hr.rows() || x.rows() != h.rows())
        throw Error(ErrorCode::ShapeMismatch, "GRU input or state has the wrong shape");
    const Tensor r = sigmoid(add(add(matmul(x, p.w_ir), p.b_ir), add(matmul(h, p.w_hr), p.b_hr)));
    const Tensor z = sigmoid(add(add(matmul(x, p.w_iz), p.b_iz), add(matmul(h, p.w_hz), p.b_hz)));
    const Tensor n = ad::tanh(add(add(matmul(x, p.w_in), p.b_in), mul(r, add(matmul(h, p.w_hn), p.b_hn))));
    // (1 - z) n + z h
    return add(mul(add_scalar(neg(z), 1.0), n), mul(z, h));
}

Tensor dense_forward(const BoundDense &p, const Tensor &x) {
    Tensor a = x;
    for (std::size_t k = 0; k < p.w.size(); ++k) {
        a = ad::add(ad::matmul(a, p.w[k]), p.b[k]);
        if (k + 1 < p.w.size())
            a = ad::relu(a);
    }
    return a;
}

Tensor gru_cell_forward(Tape &tape, GruParams &p, const Tensor &h_prev, const Tensor &x, bool track) {
    return gru_cell_forward(bind(tape, p, track), h_prev, x);
}

Tensor dense_forward(Tape &tape, DenseParams &p, const Tensor &x, bool track) {
    return dense_forward(bind(tape, p, track), x);
}

CTensor stack_streams(const std::vector<CTensor> &cols) {
    std::vector<Tensor> re, im;
    for (const auto &c : cols) {
        re.push_back(c.re);
        im.push_back(c.im);
    }
    return {ad::concat(re, 0), ad::concat(im, 0)};
}

std::vector<CTensor> unstack_streams(const Tensor &stacked, std::size_t n_s, std::size_t k) {
    if (stacked.rows() % n_s != 0 || stacked.cols() != 2 * k)
        throw Error(ErrorCode::ShapeMismatch, "stacked block does not split into streams");
    const std::size_t b = stacked.rows() / n_s;
    std::vector<CTensor> out;
    for (std::size_t i = 0; i < n_s; ++i)
        out.push_back({ad::slice(stacked, i * b, b, 0, k), ad::slice(stacked, i * b, b, k, k)});
    return out;
}

// ---- agent run ----------------------------------------------------------------------

AgentRun::AgentRun(AgentParams &params, Tape &tape, std::size_t batch, bool track)
    : p_(&params), tape_(&tape), batch_(batch), track_(track) {
    if (batch < 1)
        throw Error(ErrorCode::DimensionMismatch, "batch must be at least one episode");
    const AgentDims &d = p_->dims;
    gru_ = bind(tape, p_->gru, track);
    sense_ = bind(tape, p_->sense, track);
    final_ = bind(tape, p_->final_net, track);
    if (p_->w0_re.size() > 0) {
        w0_re_ = tape.param(p_->w0_re, track);
        w0_im_ = tape.param(p_->w0_im, track);
    }
    if (d.mode == Mode::Hybrid) {
        linear_z_ = bind(tape, p_->linear_z, track);
        analog_tx_ = bind(tape, p_->analog_tx, track);
        analog_rx_ = bind(tape, p_->analog_rx, track);
        if (p_->theta_t0.size() > 0) {
            theta_t0_ = tape.param(p_->theta_t0, track);
            f_t_ = ad::cexp_i(ad::broadcast_rows(theta_t0_, batch));
        }
        theta_r0_ = tape.param(p_->theta_r0, track);
        f_r_ = ad::cexp_i(ad::broadcast_rows(theta_r0_, batch));
    }
    h_ = tape.constant(d.n_s * batch, d.hidden, 1.0);
}

BatchBeamformer AgentRun::hybrid_output(const std::vector<CTensor> &digital, const CTensor &analog) {
    const AgentDims &d = p_->dims;
    BatchBeamformer out;
    out.hybrid = true;
    out.analog = analog;
    for (const auto &w : digital) {
        const CTensor overall = ad::cbatched_matvec(analog, w, d.m, d.n_rf, false);
        const Tensor inv = ad::reciprocal(ad::sqrt(ad::cnorm_sq(overall)));
        out.digital.push_back({ad::mul(w.re, inv), ad::mul(w.im, inv)});
    }
    return out;
}

BatchBeamformer AgentRun::initial_sensing() {
    const AgentDims &d = p_->dims;
    if (!w0_re_.valid())
        throw Error(ErrorCode::DimensionMismatch, "only agent A has an initial sensing matrix");
    const std::size_t k = d.pilot_dim();
    std::vector<CTensor> cols;
    for (std::size_t i = 0; i < d.n_s; ++i)
        cols.push_back({ad::broadcast_rows(ad::slice(w0_re_, i, 1, 0, k), batch_),
                        ad::broadcast_rows(ad::slice(w0_im_, i, 1, 0, k), batch_)});
    if (d.mode == Mode::Hybrid)
        return hybrid_output(cols, f_t_);
    BatchBeamformer out;
    for (const auto &c : cols) {
        const Tensor inv = ad::reciprocal(ad::sqrt(ad::cnorm_sq(c)));
        out.digital.push_back({ad::mul(c.re, inv), ad::mul(c.im, inv)});
    }
    return out;
}

CTensor AgentRun::receive_analog() const {
    if (p_->dims.mode != Mode::Hybrid)
        throw Error(ErrorCode::DimensionMismatch, "digital agents have no analog combiner");
    return f_r_;
}

std::vector<CTensor> AgentRun::qr_with_correction(const BoundDense &head, const std::vector<CTensor> &y) {
    const AgentDims &d = p_->dims;
    const std::vector<CTensor> corr = unstack_streams(dense_forward(head, h_), d.n_s, d.pilot_dim());
    std::vector<CTensor> sum;
    for (std::size_t i = 0; i < d.n_s; ++i)
        sum.push_back(ad::cadd(corr[i], y[i]));
    return ad::differentiable_gram_schmidt(sum);
}

BatchBeamformer AgentRun::sensing_step(const std::vector<CTensor> &y) {
    const AgentDims &d = p_->dims;
    if (y.size() != d.n_s)
        throw Error(ErrorCode::DimensionMismatch, "received block must have n_s columns");
    for (const auto &c : y)
        if (c.re.rows() != batch_ || c.re.cols() != d.pilot_dim() || c.im.rows() != batch_ ||
            c.im.cols() != d.pilot_dim())
            throw Error(ErrorCode::ShapeMismatch, "received column has the wrong shape");
    const CTensor stacked = stack_streams(y);
    h_ = gru_cell_forward(gru_, h_, ad::concat({stacked.re, stacked.im}, 1));
    last_y_ = y;
    received_ = true;
    std::vector<CTensor> q = qr_with_correction(sense_, y);
    if (d.mode == Mode::Digital) {
        BatchBeamformer out;
        out.digital = std::move(q);
        return out;
    }
    const Tensor z = dense_forward(linear_z_, h_);
    std::vector<Tensor> parts;
    for (std::size_t i = 0; i < d.n_s; ++i)
        parts.push_back(ad::slice(z, i * batch_, batch_, 0, d.n_f));
    const Tensor features = ad::concat(parts, 1);
    f_t_ = ad::cexp_i(dense_forward(analog_tx_, features));
    f_r_ = ad::cexp_i(dense_forward(analog_rx_, features));
    return hybrid_output(q, f_t_);
}

BatchBeamformer AgentRun::final_beamformer() {
    if (!received_)
        throw Error(ErrorCode::DimensionMismatch, "final beamformer requested before any pilots arrived");
    std::vector<CTensor> q = qr_with_correction(final_, last_y_);
    if (p_->dims.mode == Mode::Digital) {
        BatchBeamformer out;
        out.digital = std::move(q);
        return out;
    }
    return hybrid_output(q, p_->dims.role == Role::A ? f_t_ : f_r_);
}

// ---- conversions --------------------------------------------------------------------

namespace {

ComplexMatrix digital_row(const BatchBeamformer &w, std::size_t b) {
    const std::size_t k = w.digital.front().re.cols();
    ComplexMatrix out(k, w.digital.size());
    for (std::size_t c = 0; c < w.digital.size(); ++c)
        for (std::size_t r = 0; r < k; ++r)
            out(r, c) = cplx(w.digital[c].re.at(b, r), w.digital[c].im.at(b, r));
    return out;
}

ComplexMatrix analog_row(const BatchBeamformer &w, std::size_t b, std::size_t m) {
    const std::size_t n_rf = w.analog.re.cols() / m;
    ComplexMatrix f(m, n_rf);
    for (std::size_t i = 0; i < m * n_rf; ++i)
        f.data()[i] = cplx(w.analog.re.at(b, i), w.analog.im.at(b, i));
    return f;
}

} // namespace

ComplexMatrix overall_row(const BatchBeamformer &w, std::size_t b, std::size_t m) {
    if (!w.hybrid)
        return digital_row(w, b);
    return analog_row(w, b, m) * digital_row(w, b);
}

Sensing sensing_row(const BatchBeamformer &w, std::size_t b, std::size_t m) {
    if (!w.hybrid)
        return BeamformerSet{digital_row(w, b)};
    return HybridBeamformer{analog_row(w, b, m), digital_row(w, b)};
}

std::vector<CTensor> matrix_to_columns(Tape &tape, const ComplexMatrix &y) {
    std::vector<CTensor> cols;
    for (std::size_t c = 0; c < y.cols(); ++c) {
        std::vector<double> re(y.rows()), im(y.rows());
        for (std::size_t r = 0; r < y.rows(); ++r) {
            re[r] = y(r, c).real();
            im[r] = y(r, c).imag();
        }
        cols.push_back({tape.constant(1, y.rows(), std::move(re)), tape.constant(1, y.rows(), std::move(im))});
    }
    return cols;
}

// ---- policy adapter ----------------------------------------------------------------------

LearnedAgentPolicy::LearnedAgentPolicy(AgentParams &params) : p_(&params), run_(params, tape_, 1, false) {}

Sensing LearnedAgentPolicy::next_sensing(std::size_t) {
    if (!pending_) {
        if (run_.has_received())
            throw Error(ErrorCode::DimensionMismatch, "no sensing pending");
        pending_ = run_.initial_sensing();
    }
    return sensing_row(*pending_, 0, p_->dims.m);
}

ComplexMatrix LearnedAgentPolicy::receive_analog(std::size_t) {
    const CTensor f = run_.receive_analog();
    const std::size_t m = p_->dims.m, n_rf = p_->dims.n_rf;
    ComplexMatrix out(m, n_rf);
    for (std::size_t i = 0; i < m * n_rf; ++i)
        out.data()[i] = cplx(f.re.at(0, i), f.im.at(0, i));
    return out;
}

void LearnedAgentPolicy::receive(std::size_t, const ComplexMatrix &y) {
    if (y.rows() != p_->dims.pilot_dim() || y.cols() != p_->dims.n_s)
        throw Error(ErrorCode::DimensionMismatch, "received block has the wrong shape");
    pending_ = run_.sensing_step(matrix_to_columns(tape_, y));
}

Sensing LearnedAgentPolicy::final_beamformer() { return sensing_row(run_.final_beamformer(), 0, p_->dims.m); }

} // namespace pingpong
