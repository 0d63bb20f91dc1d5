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

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "pingpong/channels.hpp"

namespace pingpong {

inline constexpr double kPowerTol = 1e-9;
inline constexpr double kUnitModulusTol = 1e-12;

/// M x N_s pilot or data matrix; every column must have 2-norm <= 1.
struct BeamformerSet {
    ComplexMatrix matrix;
};

/// Analog phase matrix (M x N_RF, unit-modulus entries) times a digital block (N_RF x N_s).
struct HybridBeamformer {
    ComplexMatrix analog;
    ComplexMatrix digital;

    ComplexMatrix overall() const { return analog * digital; }
};

/// Rescales each digital column so the matching overall column has unit norm.
HybridBeamformer normalize_overall_columns(HybridBeamformer h);

/// Unit-modulus matrix exp(i * theta) from a real phase array (row-major).
ComplexMatrix phase_matrix(std::size_t rows, std::size_t cols, const std::vector<double> &theta);

struct NoiseSpec {
    double sigma_a_sq = 0.0; // noise at agent A (B -> A direction)
    double sigma_b_sq = 0.0; // noise at agent B (A -> B direction)

    /// SNR = 1 / sigma^2 on both links.
    static NoiseSpec from_snr_db(double snr_db);
    static NoiseSpec noiseless() { return {}; }
};

enum class Direction { AtoB, BtoA };
enum class Mode { Digital, Hybrid };

using Sensing = std::variant<BeamformerSet, HybridBeamformer>;

/// Overall M x N_s matrix of either alternative.
ComplexMatrix overall_matrix(const Sensing &s);

/// One side of the ping-pong exchange. The driver hands a policy nothing but its own
/// received pilots; policies never see the channel or the peer.
class AgentPolicy {
public:
    virtual ~AgentPolicy() = default;

    /// Beamformer transmitted in round `round` (A: before B, B: after its own receive).
    virtual Sensing next_sensing(std::size_t round) = 0;
    /// Analog combiner used while receiving in round `round` (hybrid mode only).
    virtual ComplexMatrix receive_analog(std::size_t round);
    /// Pilots received in round `round`: M x N_s (digital) or N_RF x N_s (hybrid).
    virtual void receive(std::size_t round, const ComplexMatrix &y) = 0;
    /// Data-phase precoder (A) or combiner (B) given everything received so far.
    /// Must not change the policy state, so it can be queried after every round.
    virtual Sensing final_beamformer() = 0;
};

/// Received pilots: G W + N_B (AtoB) or G^H W + N_A (BtoA).
ComplexMatrix probe(Direction dir, const ChannelMatrix &g, const BeamformerSet &sender, const NoiseSpec &noise,
                    Rng &rng);

/// F_r^H (G F_t W + N) for AtoB, F_r^H (G^H F_t W + N) for BtoA; N_RF x N_s.
ComplexMatrix hybrid_probe(Direction dir, const ChannelMatrix &g, const HybridBeamformer &sender,
                           const ComplexMatrix &receiver_analog, const NoiseSpec &noise, Rng &rng);

void check_power(const ComplexMatrix &w);
void check_unit_modulus(const ComplexMatrix &f);

struct EpisodeOptions {
    bool record_intermediates = false;
    /// Noise variance used for the rate; <= 0 falls back to sigma_b_sq, then to 1.
    double data_noise_var = 0.0;
};

struct EpisodeResult {
    Sensing w_t;
    Sensing w_r;
    ComplexMatrix w_t_overall;
    ComplexMatrix w_r_overall;
    std::vector<Sensing> sensing_a; // transmitted by A in rounds 0..L-1
    std::vector<Sensing> sensing_b; // transmitted by B in rounds 0..L-1
    std::vector<ComplexMatrix> received_a;
    std::vector<ComplexMatrix> received_b;
    /// (W_t, W_r) overall matrices after each round when requested.
    std::vector<std::pair<ComplexMatrix, ComplexMatrix>> intermediates;
    double objective = 0.0;
    double rate = 0.0;
    std::size_t pilot_count = 0;
};

/// Runs L rounds of A-transmit, B-receive/update, B-transmit, A-receive/update,
/// then asks both agents for their final beamformers.
EpisodeResult run_episode(const ChannelMatrix &g, AgentPolicy &agent_a, AgentPolicy &agent_b, std::size_t l,
                          const NoiseSpec &noise, Rng &rng, Mode mode, const EpisodeOptions &opt = {});

} // namespace pingpong
