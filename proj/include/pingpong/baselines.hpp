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

#include <memory>
#include <vector>

#include "pingpong/protocol.hpp"

namespace pingpong {

/// M x n matrix with orthonormal columns drawn from the Gaussian ensemble.
ComplexMatrix random_orthonormal(std::size_t m, std::size_t n, Rng &rng);
/// Uniform random phases in [0, 2 pi).
ComplexMatrix random_phase_matrix(std::size_t rows, std::size_t cols, Rng &rng);

/// Digital power iteration: each round the agent transmits Q from thin_qr of the
/// latest received pilots (or of their running sum when `summed`).
class PowerIterationPolicy : public AgentPolicy {
public:
    /// `initial` is W_0 for the agent that transmits first; the responder passes an empty matrix.
    explicit PowerIterationPolicy(ComplexMatrix initial, bool summed = false);

    Sensing next_sensing(std::size_t round) override;
    void receive(std::size_t round, const ComplexMatrix &y) override;
    Sensing final_beamformer() override;

    const ComplexMatrix &last_received() const { return last_received_; }
    const ComplexMatrix &accumulated() const { return accumulated_; }

private:
    ComplexMatrix initial_;
    bool summed_;
    ComplexMatrix last_received_;
    ComplexMatrix accumulated_;
    ComplexMatrix q_;
};

std::unique_ptr<AgentPolicy> power_iteration_policy(std::size_t n_s, ComplexMatrix initial = {});
std::unique_ptr<AgentPolicy> summed_power_policy(std::size_t n_s, ComplexMatrix initial = {});

/// Non-adaptive policy: the same sensing every round and a fixed final beamformer.
class FixedPolicy : public AgentPolicy {
public:
    FixedPolicy(Sensing sensing, Sensing final, ComplexMatrix receive_analog = {});
    Sensing next_sensing(std::size_t) override { return sensing_; }
    ComplexMatrix receive_analog(std::size_t) override;
    void receive(std::size_t, const ComplexMatrix &) override {}
    Sensing final_beamformer() override { return final_; }

private:
    Sensing sensing_;
    Sensing final_;
    ComplexMatrix analog_;
};

struct BeamformerPair {
    ComplexMatrix w_t; // M_t x N_s
    ComplexMatrix w_r; // M_r x N_s
};

/// Posterior mean of G under an i.i.d. CN(0,1) prior from Y = G P + N:
/// G_hat = Y P^H (P P^H + noise_var I)^{-1}.
ChannelMatrix lmmse_estimate(const ComplexMatrix &y, const ComplexMatrix &pilots, double noise_var);

/// Random unit-norm pilots (total_pilots columns, all A -> B), LMMSE estimate, top-n_s SVD.
BeamformerPair lmmse_svd_baseline(const ChannelMatrix &g, std::size_t n_s, std::size_t total_pilots,
                                  const NoiseSpec &noise, Rng &rng);

/// Angle grid for sparse channel recovery; dictionary column (i, j) is
/// vec(a(aoa_i) b(aod_j)^T) / sqrt(m_r m_t), stored column-major in G.
struct OmpGrid {
    std::size_t m_r = 0;
    std::size_t m_t = 0;
    std::vector<double> aoa_grid;
    std::vector<double> aod_grid;
    ComplexMatrix dictionary; // (m_r m_t) x (|aoa| |aod|)

    /// Grid uniform in sin(angle) over [sin(-60 deg), sin(60 deg)].
    static OmpGrid uniform(std::size_t m_r, std::size_t m_t, std::size_t n_aoa, std::size_t n_aod,
                           bool build_dictionary = true);
    std::size_t atoms() const { return aoa_grid.size() * aod_grid.size(); }
};

/// One hybrid A -> B measurement: received = receiver_analog^H (G transmit + N).
struct OmpMeasurement {
    ComplexMatrix receiver_analog;  // M_r x N_RF
    ComplexMatrix transmit_overall; // M_t x N_s
};

struct OmpResult {
    ChannelMatrix estimate;
    std::vector<std::size_t> support;  // atom indices i * |aod| + j in selection order
    std::vector<double> residual_norms; // before the first and after every iteration
};

/// Orthogonal matching pursuit over the grid dictionary seen through the measurement
/// operators. Stops after `sparsity` atoms or once the residual vanishes.
OmpResult omp_estimate(const std::vector<ComplexMatrix> &y_list, const std::vector<OmpMeasurement> &config,
                       const OmpGrid &grid, std::size_t sparsity);

struct HybridPair {
    HybridBeamformer tx;
    HybridBeamformer rx;
};

/// Splits W* (M x N_s) into analog (M x n_rf, unit modulus) and digital factors by
/// alternating phase projection and least squares; overall columns are unit-normalized.
HybridBeamformer hybrid_decompose(const ComplexMatrix &w_star, std::size_t n_rf, Rng &rng,
                                  std::size_t max_iter = 50, double rel_tol = 1e-8);

/// Random hybrid probes (total_pilots / n_s measurements, all A -> B), OMP with
/// `sparsity` atoms, top-n_s SVD of the estimate, hybrid decomposition on both sides.
HybridPair omp_svd_baseline(const ChannelMatrix &g, std::size_t n_s, std::size_t n_rf, std::size_t total_pilots,
                            const OmpGrid &grid, std::size_t sparsity, const NoiseSpec &noise, Rng &rng);

} // namespace pingpong
