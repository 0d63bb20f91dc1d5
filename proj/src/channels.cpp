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

#include "pingpong/channels.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace pingpong {

ChannelMatrix rayleigh_channel(std::size_t m_r, std::size_t m_t, Rng &rng) {
    if (m_r < 1 || m_t < 1)
        throw Error(ErrorCode::DimensionMismatch, "channel dimensions must be positive");
    return {sample_complex_gaussian(m_r, m_t, 1.0, rng), ChannelModel::Rayleigh, {}};
}

std::vector<cplx> steering_vector(std::size_t m, double angle) {
    std::vector<cplx> a(m);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < m; ++i)
        a[i] = std::polar(1.0, std::numbers::pi * static_cast<double>(i) * s);
    return a;
}

ComplexMatrix channel_from_paths(std::size_t m_r, std::size_t m_t, const std::vector<PathParams> &paths) {
    ComplexMatrix g(m_r, m_t);
    for (const auto &p : paths) {
        const auto a = steering_vector(m_r, p.aoa);
        const auto b = steering_vector(m_t, p.aod);
        for (std::size_t r = 0; r < m_r; ++r)
            for (std::size_t c = 0; c < m_t; ++c)
                g(r, c) += p.gain * a[r] * b[c];
    }
    return g;
}

ChannelMatrix mmwave_channel(std::size_t m_r, std::size_t m_t, std::size_t l_p, Rng &rng) {
    if (l_p < 1)
        throw Error(ErrorCode::DimensionMismatch, "mmwave channel needs at least one path");
    if (m_r < 1 || m_t < 1)
        throw Error(ErrorCode::DimensionMismatch, "channel dimensions must be positive");
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> deg(-60.0, 60.0);
    constexpr double to_rad = std::numbers::pi / 180.0;
    std::vector<PathParams> paths(l_p);
    for (auto &p : paths) {
        const double re = nd(rng), im = nd(rng);
        p.gain = cplx(re, im) * std::sqrt(0.5);
        p.aoa = deg(rng) * to_rad;
        p.aod = deg(rng) * to_rad;
    }
    return {channel_from_paths(m_r, m_t, paths), ChannelModel::SparseMmWave, std::move(paths)};
}

OptimalPair optimal_beamformers(const ChannelMatrix &g, std::size_t n_s) {
    SvdTopK s = svd_topk(g.g, n_s);
    return {std::move(s.right), std::move(s.left), std::move(s.singular_values)};
}

double achievable_rate(const ChannelMatrix &g, const ComplexMatrix &w_t, const ComplexMatrix &w_r, double noise_var) {
    if (!(noise_var > 0.0))
        throw Error(ErrorCode::DimensionMismatch, "noise variance must be positive");
    const std::size_t n = w_r.cols();
    ComplexMatrix c = adjoint_times(w_r, w_r) * cplx(noise_var);
    const LuResult lu = lu_decompose(c);
    if (lu.singular || std::abs(determinant(c)) < 1e-300)
        throw Error(ErrorCode::SingularCombiner, "W_r^H W_r is singular");
    const ComplexMatrix heff = adjoint_times(w_r, g.g * w_t);
    const ComplexMatrix s = heff * heff.adjoint();
    const ComplexMatrix m = ComplexMatrix::identity(n) + lu_solve(c, s);
    const cplx d = determinant(m);
    return std::log2(std::abs(d));
}

double perfect_csi_objective(const ChannelMatrix &g, std::size_t n_s) {
    const auto s = svd_topk(g.g, n_s).singular_values;
    double acc = 0.0;
    for (double v : s)
        acc += 2.0 * std::log(v);
    return std::max(acc, std::log(kLogDetFloor));
}

std::uint64_t channel_hash(const ChannelMatrix &g) {
    std::uint64_t h = mix64(g.g.rows() * 1315423911ULL + g.g.cols());
    for (const auto &x : g.g.data()) {
        h = mix64(h ^ std::bit_cast<std::uint64_t>(x.real()));
        h = mix64(h ^ std::bit_cast<std::uint64_t>(x.imag()));
    }
    return h;
}

} // namespace pingpong
