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

// Learned ping-pong agents: a GRU per agent tracks each stream's received pilots,
// dense heads propose sensing corrections that are added to the received block
// and orthonormalized, and in hybrid mode further heads emit analog phases.
//
// All tensors are row-batched with one episode per row. Per-stream quantities
// are stacked stream-major: row i * B + b holds stream i of episode b.

#include <string>
#include <vector>

#include "pingpong/autodiff.hpp"
#include "pingpong/protocol.hpp"

namespace pingpong {

enum class Role { A, B };

struct AgentDims {
    Mode mode = Mode::Digital;
    Role role = Role::A;
    std::size_t m = 16;        // antennas at this agent
    std::size_t n_s = 2;
    std::size_t n_rf = 0;      // hybrid only
    std::size_t hidden = 64;   // GRU state length
    std::size_t width = 128;   // hidden width of every dense head
    std::size_t n_f = 16;      // hybrid: per-stream feature length fed to the analog heads

    /// Length of one received pilot column: m (digital) or n_rf (hybrid).
    std::size_t pilot_dim() const { return mode == Mode::Digital ? m : n_rf; }
};

struct GruParams {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    // Input weights are input_dim x hidden, recurrent weights hidden x hidden, biases 1 x hidden.
    ad::Parameter w_ir, w_hr, w_iz, w_hz, w_in, w_hn;
    ad::Parameter b_ir, b_hr, b_iz, b_hz, b_in, b_hn;

    GruParams() = default;
    GruParams(const std::string &prefix, std::size_t input_dim, std::size_t hidden_dim);
    std::vector<ad::Parameter *> params();
};

/// Fully connected network; relu between layers, linear output. Weights are in x out.
struct DenseParams {
    std::vector<ad::Parameter> weights;
    std::vector<ad::Parameter> biases;

    DenseParams() = default;
    DenseParams(const std::string &prefix, const std::vector<std::size_t> &dims);
    std::vector<ad::Parameter *> params();
    std::size_t in_dim() const { return weights.front().rows; }
    std::size_t out_dim() const { return weights.back().cols; }
};

/// Parameters of one agent. Digital agents use gru, sense, final_net and (agent A)
/// the initial sensing w0. Hybrid agents add linear_z, the two analog heads and
/// initial analog phases.
struct AgentParams {
    AgentDims dims;
    GruParams gru;
    DenseParams sense;     // hidden -> 2 * pilot_dim correction for the next sensing block
    DenseParams final_net; // hidden -> 2 * pilot_dim correction for the data beamformer
    ad::Parameter w0_re, w0_im; // n_s x pilot_dim, row i = column i of W_0 (agent A only)
    DenseParams linear_z;       // hidden -> n_f, single linear layer
    DenseParams analog_tx;      // n_s * n_f -> m * n_rf phases
    DenseParams analog_rx;
    ad::Parameter theta_t0; // 1 x m * n_rf, initial transmit phases (agent A only)
    ad::Parameter theta_r0; // 1 x m * n_rf, initial receive phases

    AgentParams() = default;
    explicit AgentParams(const AgentDims &dims);

    /// Every trainable array, in a fixed order.
    std::vector<ad::Parameter *> params();
    std::vector<const ad::Parameter *> params() const;
    std::size_t parameter_count() const;
};

using DigitalAgentParams = AgentParams;
using HybridAgentParams = AgentParams;

/// PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization; w0 and the
/// initial phases are drawn from the Gaussian and uniform ensembles.
void initialize(AgentParams &p, Rng &rng);

/// Zeroes the last layer of the sense and final heads so their outputs vanish
/// identically and every QR step sees the received block alone.
void zero_output_layers(AgentParams &p);

/// Dimensions of the two agents for a channel with m_r receive / m_t transmit antennas.
struct ModelDims {
    Mode mode = Mode::Digital;
    std::size_t m_t = 16;
    std::size_t m_r = 16;
    std::size_t n_s = 2;
    std::size_t n_rf = 0;
    std::size_t hidden = 64;
    std::size_t width = 128;
    std::size_t n_f = 16;

    AgentDims agent(Role role) const;
    bool operator==(const ModelDims &) const = default;
};

// ---- tape-level building blocks ---------------------------------------------------

struct BoundGru {
    ad::Tensor w_ir, w_hr, w_iz, w_hz, w_in, w_hn;
    ad::Tensor b_ir, b_hr, b_iz, b_hz, b_in, b_hn;
};

struct BoundDense {
    std::vector<ad::Tensor> w;
    std::vector<ad::Tensor> b;
};

BoundGru bind(ad::Tape &tape, GruParams &p, bool track = true);
BoundDense bind(ad::Tape &tape, DenseParams &p, bool track = true);
ad::Tensor gru_cell_forward(const BoundGru &p, const ad::Tensor &h_prev, const ad::Tensor &x);
ad::Tensor dense_forward(const BoundDense &p, const ad::Tensor &x);

ad::Tensor gru_cell_forward(ad::Tape &tape, GruParams &p, const ad::Tensor &h_prev, const ad::Tensor &x,
                            bool track = true);
ad::Tensor dense_forward(ad::Tape &tape, DenseParams &p, const ad::Tensor &x, bool track = true);

/// Stacks per-stream columns (each B x K) stream-major into (n_s B) x K.
ad::CTensor stack_streams(const std::vector<ad::CTensor> &cols);
/// Inverse of stack_streams for a (n_s B) x 2K real block split as [re | im].
std::vector<ad::CTensor> unstack_streams(const ad::Tensor &stacked, std::size_t n_s, std::size_t k);

/// Sensing or data beamformer of one agent for a batch. Digital: `digital` holds the
/// M-dim columns. Hybrid: `digital` holds N_RF-dim columns already scaled so that
/// each overall column analog * digital has unit norm.
struct BatchBeamformer {
    std::vector<ad::CTensor> digital;
    ad::CTensor analog; // B x (m * n_rf), hybrid only
    bool hybrid = false;
};

/// Running state of one agent over a batch of episodes on one tape.
class AgentRun {
public:
    AgentRun(AgentParams &params, ad::Tape &tape, std::size_t batch, bool track = true);

    const AgentDims &dims() const { return p_->dims; }
    std::size_t batch() const { return batch_; }
    bool has_received() const { return received_; }

    /// W_0 (agent A) including, in hybrid mode, the initial transmit analog matrix.
    BatchBeamformer initial_sensing();
    /// Analog combiner for the next receive (hybrid only), B x (m * n_rf).
    ad::CTensor receive_analog() const;
    /// Consumes one received block (per-stream B x pilot_dim columns) and returns the
    /// agent's next transmitted beamformer.
    BatchBeamformer sensing_step(const std::vector<ad::CTensor> &y);
    /// Data beamformer from the current state; does not advance the state.
    BatchBeamformer final_beamformer();

    const ad::Tensor &hidden() const { return h_; }

private:
    std::vector<ad::CTensor> qr_with_correction(const BoundDense &head, const std::vector<ad::CTensor> &y);
    BatchBeamformer hybrid_output(const std::vector<ad::CTensor> &digital, const ad::CTensor &analog);

    AgentParams *p_;
    ad::Tape *tape_;
    std::size_t batch_;
    bool track_;
    bool received_ = false;
    BoundGru gru_;
    BoundDense sense_, final_, linear_z_, analog_tx_, analog_rx_;
    ad::Tensor w0_re_, w0_im_, theta_t0_, theta_r0_;
    ad::Tensor h_;
    std::vector<ad::CTensor> last_y_;
    ad::CTensor f_t_;
    ad::CTensor f_r_;
};

/// Overall M x N_s matrix of row `b` of a batch beamformer (M = analog rows in hybrid mode).
ComplexMatrix overall_row(const BatchBeamformer &w, std::size_t b, std::size_t m);
/// Sensing value for row `b` (BeamformerSet or HybridBeamformer).
Sensing sensing_row(const BatchBeamformer &w, std::size_t b, std::size_t m);
/// Per-stream 1 x K constant columns from a K x N_s matrix.
std::vector<ad::CTensor> matrix_to_columns(ad::Tape &tape, const ComplexMatrix &y);

/// AgentPolicy adapter: runs the same tape computations as training on a batch of one.
class LearnedAgentPolicy : public AgentPolicy {
public:
    explicit LearnedAgentPolicy(AgentParams &params);

    Sensing next_sensing(std::size_t round) override;
    ComplexMatrix receive_analog(std::size_t round) override;
    void receive(std::size_t round, const ComplexMatrix &y) override;
    Sensing final_beamformer() override;

private:
    AgentParams *p_;
    ad::Tape tape_;
    AgentRun run_;
    std::optional<BatchBeamformer> pending_;
};

} // namespace pingpong
