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

#include <cmath>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pingpong/activenet.hpp"
#include "pingpong/baselines.hpp"
#include "pingpong/training.hpp"

namespace pingpong {

/// log|det(W_r^H G W_t)|^2 (floored).
double objective_metric(const ChannelMatrix &g, const ComplexMatrix &w_t, const ComplexMatrix &w_r);

enum class Side { Tx, Rx };

/// |w^H u_i| against every singular vector of the chosen side (right singular vectors
/// for Tx, left for Rx), ordered by descending singular value. Throws NonUnitInput
/// unless ||w|| = 1 within 1e-9.
std::vector<double> correlation_profile(const std::vector<cplx> &w, const ChannelMatrix &g, Side side);

/// Method names accepted by the benchmark.
const std::vector<std::string> &known_methods();
bool is_learned_method(const std::string &method);

struct BenchmarkConfig {
    std::vector<std::string> methods;
    std::size_t m_t = 16;
    std::size_t m_r = 16;
    std::size_t n_s = 2;
    std::size_t n_rf = 0; // used by omp_svd; learned methods take theirs from the checkpoint
    ChannelModel channel = ChannelModel::Rayleigh;
    std::size_t paths = 4;
    std::vector<double> snr_db{0.0};
    std::vector<std::size_t> rounds{1, 2, 4, 6};
    std::size_t episodes = 100;
    std::uint64_t seed = 1;
    std::map<std::string, std::string> checkpoints; // method -> checkpoint path
    std::string output;
    double data_snr_db = std::numeric_limits<double>::quiet_NaN(); // NaN: use the pilot SNR
    std::size_t grid_size = 64;
    std::size_t threads = 1;
};

struct ResultRow {
    std::string method;
    std::size_t m_t = 0, m_r = 0, n_s = 0, n_rf = 0;
    double snr_db = 0.0;
    std::size_t pilot_len = 0;
    std::uint64_t episode_seed = 0;
    double objective = 0.0;
    double rate_bits = 0.0;
    double chordal_tx = 0.0;
    double chordal_rx = 0.0;
    double wall_ms = 0.0;
    std::uint64_t channel_hash = 0;
    // Constraint diagnostics, not part of the CSV.
    std::size_t episode = 0;
    double perfect_objective = 0.0;
    double orthonormality_error = 0.0; // digital outputs, 0 for hybrid
    double unit_modulus_error = 0.0;   // hybrid analog entries, 0 for digital
    double column_norm_error = 0.0;    // max | ||w_i|| - 1 | over both sides
};

struct SummaryRow {
    std::string method;
    double snr_db = 0.0;
    std::size_t pilot_len = 0;
    std::size_t count = 0;
    double mean_objective = 0.0;
    double mean_rate = 0.0;
    double mean_wall_ms = 0.0;
};

struct BenchmarkResult {
    std::vector<ResultRow> rows; // sorted by (method order, snr, L, episode)
    std::vector<SummaryRow> summary;
    std::size_t failures = 0; // episodes dropped after numeric failures
};

inline constexpr const char *kCsvHeader =
    "method,m_t,m_r,n_s,n_rf,snr_db,pilot_len,episode_seed,objective,rate_bits,chordal_tx,chordal_rx,wall_ms,"
    "channel_hash";

/// Channel of benchmark episode `episode`; identical for every method, SNR and L.
ChannelMatrix benchmark_channel(const BenchmarkConfig &c, std::size_t episode);
/// Noise/sensing seed of one cell episode; identical across methods.
std::uint64_t episode_seed(const BenchmarkConfig &c, double snr_db, std::size_t l, std::size_t episode);

BenchmarkResult run_benchmark(const BenchmarkConfig &c);

void write_csv(const std::vector<ResultRow> &rows, std::ostream &out);
void print_summary(const std::vector<SummaryRow> &summary, std::ostream &out);
std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows);

/// Episode result of one method on one channel; exposed for tests and inspection.
struct MethodOutput {
    Sensing w_t;
    Sensing w_r;
    double wall_ms = 0.0;
};

class MethodRunner {
public:
    explicit MethodRunner(const BenchmarkConfig &c);
    MethodOutput run(const std::string &method, const ChannelMatrix &g, double snr_db, std::size_t l,
                     std::uint64_t seed);

private:
    const BenchmarkConfig &c_;
    std::map<std::string, Checkpoint> models_;
    std::unique_ptr<OmpGrid> grid_;
};

} // namespace pingpong
