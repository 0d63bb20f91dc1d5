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

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pingpong/activenet.hpp"

namespace pingpong {

struct TrainConfig {
    ModelDims dims;
    ChannelModel channel = ChannelModel::Rayleigh;
    std::size_t paths = 4; // mmWave path count
    std::size_t l = 6;
    double snr_db = 0.0;
    std::size_t batch_size = 128;
    std::size_t valid_size = 256;
    double lr = 1e-3;
    double lr_floor = 1e-5;
    double lr_decay = 0.5;
    std::size_t patience = 5; // evaluations without improvement before a decay
    std::size_t max_iterations = 2000;
    std::size_t eval_every = 50;
    bool multi_round = true; // sum the objective over every round instead of the last one only
    double max_seconds = 0.0; // wall-clock budget, 0 = unlimited
    std::string init_checkpoint; // warm start, empty = fresh initialization
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

/// Validates dimensions and schedule; throws ConfigError.
void validate(const TrainConfig &c);

struct HistoryEntry {
    std::size_t iteration = 0;
    double train_loss = 0.0; // mean over iterations since the previous evaluation
    double valid_loss = 0.0;
    double valid_objective = 0.0; // mean final-round objective on the validation set
    double lr = 0.0;
    std::size_t skipped = 0; // near-singular samples or failed batches so far
};

struct Checkpoint {
    ModelDims dims;
    std::string config_json; // echo of the producing configuration
    AgentParams a;
    AgentParams b;
    std::vector<HistoryEntry> history;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint &c, const std::string &path);
Checkpoint load_checkpoint(const std::string &path);
std::string serialize_checkpoint(const Checkpoint &c);
Checkpoint parse_checkpoint(const std::string &bytes);

/// Fresh agents for the given dimensions, initialized from `seed`.
Checkpoint initial_checkpoint(const ModelDims &dims, std::uint64_t seed);

std::vector<ChannelMatrix> sample_channels(ChannelModel model, std::size_t m_r, std::size_t m_t, std::size_t paths,
                                           std::size_t count, Rng &rng);

struct LossOptions {
    bool multi_round = true;
    /// Drop samples whose determinant falls under the floor in any scored round.
    bool mask_near_singular = true;
    bool track = true; // record gradients
};

struct LossTerms {
    ad::Tensor masked_sum; // 1 x 1: sum over kept samples of the summed per-round objectives
    std::size_t used = 0;
    std::size_t skipped = 0;
    std::vector<double> final_objective; // per sample, last round, clamped
    std::vector<double> total_objective; // per sample, scored rounds summed, clamped
};

/// Unrolls a full episode for every channel of the batch on `tape` and scores the
/// data beamformers after each round (or the last round only).
LossTerms episode_objectives(ad::Tape &tape, AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g,
                             std::size_t l, const NoiseSpec &noise, Rng &rng, const LossOptions &opt = {});

/// -mean over kept samples of the summed per-round log|det(W_r^H G W_t)|^2.
ad::Tensor episode_loss(ad::Tape &tape, AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g,
                        std::size_t l, const NoiseSpec &noise, Rng &rng, const LossOptions &opt = {});

struct TrainResult {
    Checkpoint best;
    std::vector<HistoryEntry> history;
    std::size_t iterations = 0;
};

using HistoryCallback = std::function<void(const HistoryEntry &)>;

/// Adam on fresh channels every iteration, plateau learning-rate decay on the validation
/// loss, best-validation snapshot returned.
TrainResult train(const TrainConfig &c, const std::string &config_json = "{}", const HistoryCallback &cb = {});

/// Mean validation loss and final-round objective of the agents on fixed channels/noise.
std::pair<double, double> evaluate_loss(AgentParams &a, AgentParams &b, const std::vector<ChannelMatrix> &g,
                                        std::size_t l, const NoiseSpec &noise, std::uint64_t noise_seed,
                                        std::size_t chunk, bool multi_round);

void write_history_csv(const std::vector<HistoryEntry> &h, std::ostream &out);

} // namespace pingpong
