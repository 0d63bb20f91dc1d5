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

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pingpong/numerics.hpp"

namespace pingpong {

enum class ChannelModel { Rayleigh, SparseMmWave };

struct PathParams {
    cplx gain;
    double aoa; // radians
    double aod; // radians
};

struct ChannelMatrix {
    ComplexMatrix g; // M_r x M_t, maps agent A's transmit signal to agent B
    ChannelModel model = ChannelModel::Rayleigh;
    std::vector<PathParams> paths; // populated iff SparseMmWave

    std::size_t m_r() const { return g.rows(); }
    std::size_t m_t() const { return g.cols(); }
};

struct OptimalPair {
    ComplexMatrix w_t_star; // V_1
    ComplexMatrix w_r_star; // U_1
    std::vector<double> top_singular_values;
};

ChannelMatrix rayleigh_channel(std::size_t m_r, std::size_t m_t, Rng &rng);

/// Half-wavelength ULA response: entry i = exp(j*pi*i*sin(angle)).
std::vector<cplx> steering_vector(std::size_t m, double angle);

/// Sum of l_p paths alpha * a(aoa) * b(aod)^T with alpha ~ CN(0,1) and angles
/// uniform on (-60, 60) degrees.
ChannelMatrix mmwave_channel(std::size_t m_r, std::size_t m_t, std::size_t l_p, Rng &rng);

/// Rebuilds G from path parameters (plain transpose on the departure steering vector).
ComplexMatrix channel_from_paths(std::size_t m_r, std::size_t m_t, const std::vector<PathParams> &paths);

/// Perfect-CSI precoder/combiner with uniform power allocation.
OptimalPair optimal_beamformers(const ChannelMatrix &g, std::size_t n_s);

/// log2 det(I + C^{-1} W_r^H G W_t W_t^H G^H W_r), C = noise_var * W_r^H W_r.
double achievable_rate(const ChannelMatrix &g, const ComplexMatrix &w_t, const ComplexMatrix &w_r, double noise_var);

/// 2 * sum_{i < n_s} log(sigma_i), the largest attainable log|det(W_r^H G W_t)|^2.
double perfect_csi_objective(const ChannelMatrix &g, std::size_t n_s);

/// Order-sensitive 64-bit hash of the channel entries (bit patterns).
std::uint64_t channel_hash(const ChannelMatrix &g);

} // namespace pingpong
