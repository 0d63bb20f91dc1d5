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

#include "pingpong/protocol.hpp"

#include <cmath>
#include <string>

namespace pingpong {

HybridBeamformer normalize_overall_columns(HybridBeamformer h) {
    const ComplexMatrix all = h.overall();
    for (std::size_t c = 0; c < all.cols(); ++c) {
        const double n = all.column_norm(c);
        if (n == 0.0)
            throw Error(ErrorCode::DegenerateColumns, "overall hybrid column " + std::to_string(c) + " is zero");
        for (std::size_t r = 0; r < h.digital.rows(); ++r)
            h.digital(r, c) /= n;
    }
    return h;
}

ComplexMatrix phase_matrix(std::size_t rows, std::size_t cols, const std::vector<double> &theta) {
    if (theta.size() != rows * cols)
        throw Error(ErrorCode::ShapeMismatch, "phase count does not match analog shape");
    ComplexMatrix f(rows, cols);
    for (std::size_t i = 0; i < theta.size(); ++i)
        f.data()[i] = cplx(std::cos(theta[i]), std::sin(theta[i]));
    return f;
}

NoiseSpec NoiseSpec::from_snr_db(double snr_db) {
    const double var = std::pow(10.0, -snr_db / 10.0);
    return {var, var};
}

ComplexMatrix overall_matrix(const Sensing &s) {
    if (const auto *d = std::get_if<BeamformerSet>(&s))
        return d->matrix;
    return std::get<HybridBeamformer>(s).overall();
}

ComplexMatrix AgentPolicy::receive_analog(std::size_t) {
    throw Error(ErrorCode::DimensionMismatch, "policy has no analog combiner");
}

void check_power(const ComplexMatrix &w) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
        const double n = w.column_norm(c);
        if (!(n <= 1.0 + kPowerTol))
            throw Error(ErrorCode::PowerViolation,
                        "column " + std::to_string(c) + " has norm " + std::to_string(n));
    }
}

void check_unit_modulus(const ComplexMatrix &f) {
    for (const auto &x : f.data())
        if (!(std::abs(std::abs(x) - 1.0) <= kUnitModulusTol))
            throw Error(ErrorCode::UnitModulusViolation, "analog entry of modulus " + std::to_string(std::abs(x)));
}

ComplexMatrix probe(Direction dir, const ChannelMatrix &g, const BeamformerSet &sender, const NoiseSpec &noise,
                    Rng &rng) {
    check_power(sender.matrix);
    const bool ab = dir == Direction::AtoB;
    const std::size_t in_dim = ab ? g.m_t() : g.m_r();
    if (sender.matrix.rows() != in_dim)
        throw Error(ErrorCode::DimensionMismatch, "sender has " + std::to_string(sender.matrix.rows()) +
                                                      " rows, channel side has " + std::to_string(in_dim));
    ComplexMatrix y = ab ? g.g * sender.matrix : adjoint_times(g.g, sender.matrix);
    y += sample_complex_gaussian(y.rows(), y.cols(), ab ? noise.sigma_b_sq : noise.sigma_a_sq, rng);
    return y;
}

ComplexMatrix hybrid_probe(Direction dir, const ChannelMatrix &g, const HybridBeamformer &sender,
                           const ComplexMatrix &receiver_analog, const NoiseSpec &noise, Rng &rng) {
    check_unit_modulus(sender.analog);
    check_unit_modulus(receiver_analog);
    if (sender.analog.cols() != sender.digital.rows())
        throw Error(ErrorCode::DimensionMismatch, "analog/digital inner dimensions differ");
    const ComplexMatrix w = sender.overall();
    check_power(w);
    const bool ab = dir == Direction::AtoB;
    const std::size_t in_dim = ab ? g.m_t() : g.m_r();
    const std::size_t out_dim = ab ? g.m_r() : g.m_t();
    if (w.rows() != in_dim || receiver_analog.rows() != out_dim)
        throw Error(ErrorCode::DimensionMismatch, "hybrid probe dimensions do not match the channel");
    ComplexMatrix y = ab ? g.g * w : adjoint_times(g.g, w);
    y += sample_complex_gaussian(y.rows(), y.cols(), ab ? noise.sigma_b_sq : noise.sigma_a_sq, rng);
    return adjoint_times(receiver_analog, y);
}

namespace {

ComplexMatrix transmit(Direction dir, const ChannelMatrix &g, const Sensing &s, AgentPolicy &receiver,
                       std::size_t round, const NoiseSpec &noise, Rng &rng, Mode mode) {
    if (mode == Mode::Digital) {
        const auto *d = std::get_if<BeamformerSet>(&s);
        if (!d)
            throw Error(ErrorCode::DimensionMismatch, "digital episode received a hybrid beamformer");
        return probe(dir, g, *d, noise, rng);
    }
    const auto *h = std::get_if<HybridBeamformer>(&s);
    if (!h)
        throw Error(ErrorCode::DimensionMismatch, "hybrid episode received a digital beamformer");
    return hybrid_probe(dir, g, *h, receiver.receive_analog(round), noise, rng);
}

} // namespace

EpisodeResult run_episode(const ChannelMatrix &g, AgentPolicy &agent_a, AgentPolicy &agent_b, std::size_t l,
                          const NoiseSpec &noise, Rng &rng, Mode mode, const EpisodeOptions &opt) {
    if (l < 1)
        throw Error(ErrorCode::DimensionMismatch, "an episode needs at least one round");
    EpisodeResult res;
    std::size_t n_s = 0;
    for (std::size_t round = 0; round < l; ++round) {
        Sensing sa = agent_a.next_sensing(round);
        const ComplexMatrix ya = transmit(Direction::AtoB, g, sa, agent_b, round, noise, rng, mode);
        n_s = ya.cols();
        agent_b.receive(round, ya);
        Sensing sb = agent_b.next_sensing(round);
        const ComplexMatrix yb = transmit(Direction::BtoA, g, sb, agent_a, round, noise, rng, mode);
        if (yb.cols() != n_s)
            throw Error(ErrorCode::DimensionMismatch, "agents disagree on the stream count");
        agent_a.receive(round, yb);
        res.sensing_a.push_back(std::move(sa));
        res.sensing_b.push_back(std::move(sb));
        res.received_b.push_back(ya);
        res.received_a.push_back(yb);
        if (opt.record_intermediates) {
            ComplexMatrix wt = overall_matrix(agent_a.final_beamformer());
            res.intermediates.emplace_back(std::move(wt), overall_matrix(agent_b.final_beamformer()));
        }
    }
    res.w_t = agent_a.final_beamformer();
    res.w_r = agent_b.final_beamformer();
    res.w_t_overall = overall_matrix(res.w_t);
    res.w_r_overall = overall_matrix(res.w_r);
    if (res.w_t_overall.rows() != g.m_t() || res.w_r_overall.rows() != g.m_r() ||
        res.w_t_overall.cols() != res.w_r_overall.cols())
        throw Error(ErrorCode::DimensionMismatch, "final beamformers do not match the channel");
    res.pilot_count = 2 * l * n_s;
    res.objective = logdet_abs_sq(adjoint_times(res.w_r_overall, g.g * res.w_t_overall));
    double var = opt.data_noise_var;
    if (!(var > 0.0))
        var = noise.sigma_b_sq > 0.0 ? noise.sigma_b_sq : 1.0;
    res.rate = achievable_rate(g, res.w_t_overall, res.w_r_overall, var);
    return res;
}

} // namespace pingpong
