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

#include "pingpong/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <exception>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <mutex>
#include <thread>

#include "pingpong/training.hpp"

namespace pingpong {

double objective_metric(const ChannelMatrix &g, const ComplexMatrix &w_t, const ComplexMatrix &w_r) {
    if (w_t.cols() != w_r.cols())
        throw Error(ErrorCode::DimensionMismatch, "precoder and combiner stream counts differ");
    return logdet_abs_sq(adjoint_times(w_r, g.g * w_t));
}

std::vector<double> correlation_profile(const std::vector<cplx> &w, const ChannelMatrix &g, Side side) {
    double n2 = 0.0;
    for (const auto &x : w)
        n2 += std::norm(x);
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-9)
        throw Error(ErrorCode::NonUnitInput, "profile vector has norm " + std::to_string(std::sqrt(n2)));
    const std::size_t expected = side == Side::Tx ? g.m_t() : g.m_r();
    if (w.size() != expected)
        throw Error(ErrorCode::DimensionMismatch, "profile vector length does not match the channel side");
    const SvdTopK s = svd_topk(g.g, std::min(g.m_r(), g.m_t()));
    const ComplexMatrix &basis = side == Side::Tx ? s.right : s.left;
    std::vector<double> out(basis.cols());
    for (std::size_t i = 0; i < basis.cols(); ++i) {
        cplx acc = 0.0;
        for (std::size_t r = 0; r < basis.rows(); ++r)
            acc += std::conj(w[r]) * basis(r, i);
        out[i] = std::abs(acc);
    }
    return out;
}

const std::vector<std::string> &known_methods() {
    static const std::vector<std::string> m{"perfect_csi", "power_iteration", "summed_power",
                                            "lmmse_svd",   "omp_svd",         "active_sensing"};
    return m;
}

bool is_learned_method(const std::string &method) { return method.rfind("active_sensing", 0) == 0; }

ChannelMatrix benchmark_channel(const BenchmarkConfig &c, std::size_t episode) {
    Rng rng = make_rng(c.seed, "bench-channel", episode);
    return c.channel == ChannelModel::Rayleigh ? rayleigh_channel(c.m_r, c.m_t, rng)
                                               : mmwave_channel(c.m_r, c.m_t, c.paths, rng);
}

std::uint64_t episode_seed(const BenchmarkConfig &c, double snr_db, std::size_t l, std::size_t episode) {
    const std::uint64_t cell = mix64(std::bit_cast<std::uint64_t>(snr_db) ^ mix64(l));
    return derive_seed(c.seed ^ cell, "bench-episode", episode);
}

// ---- methods ------------------------------------------------------------------------

MethodRunner::MethodRunner(const BenchmarkConfig &c) : c_(c) {
    for (const auto &m : c.methods) {
        if (is_learned_method(m)) {
            auto it = c.checkpoints.find(m);
            if (it == c.checkpoints.end() || it->second.empty())
                throw Error(ErrorCode::ConfigError, "method " + m + " needs bench.checkpoints." + m);
            Checkpoint ck = load_checkpoint(it->second);
            if (ck.dims.m_t != c.m_t || ck.dims.m_r != c.m_r || ck.dims.n_s != c.n_s)
                throw Error(ErrorCode::ConfigError, "checkpoint " + it->second + " was trained for other dimensions");
            models_.emplace(m, std::move(ck));
        } else if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
            throw Error(ErrorCode::ConfigError, "unknown method " + m);
        }
        if (m == "omp_svd" && !grid_) {
            if (c.n_rf < c.n_s || c.n_rf > std::min(c.m_t, c.m_r))
                throw Error(ErrorCode::ConfigError, "omp_svd needs n_s <= model.n_rf <= min(m_t, m_r)");
            grid_ = std::make_unique<OmpGrid>(OmpGrid::uniform(c.m_r, c.m_t, c.grid_size, c.grid_size, false));
        }
    }
}

MethodOutput MethodRunner::run(const std::string &method, const ChannelMatrix &g, double snr_db, std::size_t l,
                               std::uint64_t seed) {
    const NoiseSpec noise = NoiseSpec::from_snr_db(snr_db);
    const std::size_t pilots = 2 * l * c_.n_s;
    Rng rng(seed);
    MethodOutput out;
    const auto t0 = std::chrono::steady_clock::now();
    if (method == "perfect_csi") {
        OptimalPair p = optimal_beamformers(g, c_.n_s);
        out.w_t = BeamformerSet{std::move(p.w_t_star)};
        out.w_r = BeamformerSet{std::move(p.w_r_star)};
    } else if (method == "power_iteration" || method == "summed_power") {
        const bool summed = method == "summed_power";
        PowerIterationPolicy a(random_orthonormal(c_.m_t, c_.n_s, rng), summed);
        PowerIterationPolicy b(ComplexMatrix{}, summed);
        EpisodeResult e = run_episode(g, a, b, l, noise, rng, Mode::Digital);
        out.w_t = std::move(e.w_t);
        out.w_r = std::move(e.w_r);
    } else if (method == "lmmse_svd") {
        BeamformerPair p = lmmse_svd_baseline(g, c_.n_s, pilots, noise, rng);
        out.w_t = BeamformerSet{std::move(p.w_t)};
        out.w_r = BeamformerSet{std::move(p.w_r)};
    } else if (method == "omp_svd") {
        HybridPair p = omp_svd_baseline(g, c_.n_s, c_.n_rf, pilots, *grid_, std::max<std::size_t>(c_.paths, 1),
                                        noise, rng);
        out.w_t = std::move(p.tx);
        out.w_r = std::move(p.rx);
    } else if (is_learned_method(method)) {
        Checkpoint &ck = models_.at(method);
        LearnedAgentPolicy a(ck.a), b(ck.b);
        EpisodeResult e = run_episode(g, a, b, l, noise, rng, ck.dims.mode);
        out.w_t = std::move(e.w_t);
        out.w_r = std::move(e.w_r);
    } else {
        throw Error(ErrorCode::ConfigError, "unknown method " + method);
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---- benchmark ----------------------------------------------------------------------------

namespace {

double column_norm_error(const ComplexMatrix &w) {
    double e = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c)
        e = std::max(e, std::abs(w.column_norm(c) - 1.0));
    return e;
}

double unit_modulus_error(const ComplexMatrix &f) {
    double e = 0.0;
    for (const auto &x : f.data())
        e = std::max(e, std::abs(std::abs(x) - 1.0));
    return e;
}

double chordal_or_nan(const ComplexMatrix &w, const ComplexMatrix &u) {
    try {
        return chordal_distance(thin_qr(w).q, u);
    } catch (const Error &) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

ResultRow make_row(const BenchmarkConfig &c, const std::string &method, const ChannelMatrix &g,
                   const OptimalPair &opt, double perfect, const MethodOutput &o, double snr_db, std::size_t l,
                   std::size_t episode, std::uint64_t seed) {
    ResultRow r;
    r.method = method;
    r.m_t = c.m_t;
    r.m_r = c.m_r;
    r.n_s = c.n_s;
    const ComplexMatrix wt = overall_matrix(o.w_t), wr = overall_matrix(o.w_r);
    if (const auto *h = std::get_if<HybridBeamformer>(&o.w_t)) {
        r.n_rf = h->analog.cols();
        r.unit_modulus_error = std::max(unit_modulus_error(h->analog),
                                        unit_modulus_error(std::get<HybridBeamformer>(o.w_r).analog));
    } else {
        r.orthonormality_error = std::max(orthonormality_error(wt), orthonormality_error(wr));
    }
    r.column_norm_error = std::max(column_norm_error(wt), column_norm_error(wr));
    r.snr_db = snr_db;
    r.pilot_len = 2 * l * c.n_s;
    r.episode_seed = seed;
    r.objective = objective_metric(g, wt, wr);
    const double data_snr = std::isnan(c.data_snr_db) ? snr_db : c.data_snr_db;
    r.rate_bits = achievable_rate(g, wt, wr, std::pow(10.0, -data_snr / 10.0));
    r.chordal_tx = chordal_or_nan(wt, opt.w_t_star);
    r.chordal_rx = chordal_or_nan(wr, opt.w_r_star);
    r.wall_ms = o.wall_ms;
    r.channel_hash = channel_hash(g);
    r.episode = episode;
    r.perfect_objective = perfect;
    return r;
}

} // namespace

BenchmarkResult run_benchmark(const BenchmarkConfig &c) {
    if (c.episodes < 1)
        throw Error(ErrorCode::ConfigError, "bench.episodes must be at least 1");
    if (c.methods.empty() || c.snr_db.empty() || c.rounds.empty())
        throw Error(ErrorCode::ConfigError, "bench needs methods, snr_db and rounds");
    for (auto l : c.rounds)
        if (l < 1)
            throw Error(ErrorCode::ConfigError, "bench.rounds entries must be at least 1");
    MethodRunner runner(c);

    struct Channel {
        ChannelMatrix g;
        OptimalPair opt;
        double perfect;
    };
    std::vector<Channel> channels;
    channels.reserve(c.episodes);
    for (std::size_t e = 0; e < c.episodes; ++e) {
        ChannelMatrix g = benchmark_channel(c, e);
        OptimalPair opt = optimal_beamformers(g, c.n_s);
        const double perfect = perfect_csi_objective(g, c.n_s);
        channels.push_back({std::move(g), std::move(opt), perfect});
    }

    BenchmarkResult res;
    for (const auto &method : c.methods)
        for (double snr : c.snr_db)
            for (std::size_t l : c.rounds) {
                std::vector<std::optional<ResultRow>> cell(c.episodes);
                std::atomic<std::size_t> next{0};
                std::exception_ptr fatal;
                std::mutex fatal_mutex;
                auto work = [&]() {
                    for (std::size_t e = next++; e < c.episodes; e = next++) {
                        const std::uint64_t seed = episode_seed(c, snr, l, e);
                        try {
                            const MethodOutput o = runner.run(method, channels[e].g, snr, l, seed);
                            cell[e] = make_row(c, method, channels[e].g, channels[e].opt, channels[e].perfect, o, snr,
                                               l, e, seed);
                        } catch (const Error &err) {
                            if (err.code() == ErrorCode::ConfigError) {
                                std::lock_guard lock(fatal_mutex);
                                if (!fatal)
                                    fatal = std::current_exception();
                                next = c.episodes;
                            }
                        }
                    }
                };
                const std::size_t nt = std::max<std::size_t>(1, std::min(c.threads, c.episodes));
                if (nt == 1) {
                    work();
                } else {
                    std::vector<std::thread> pool;
                    for (std::size_t t = 0; t < nt; ++t)
                        pool.emplace_back(work);
                    for (auto &t : pool)
                        t.join();
                }
                if (fatal)
                    std::rethrow_exception(fatal);
                std::size_t ok = 0;
                for (auto &r : cell) {
                    if (r) {
                        res.rows.push_back(std::move(*r));
                        ++ok;
                    } else {
                        ++res.failures;
                    }
                }
                if (ok == 0)
                    throw Error(ErrorCode::NearSingular, "every episode of " + method + " failed numerically");
            }
    res.summary = summarize(res.rows);
    return res;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow> &rows) {
    std::vector<SummaryRow> out;
    for (const auto &r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow &s) {
            return s.method == r.method && s.snr_db == r.snr_db && s.pilot_len == r.pilot_len;
        });
        if (it == out.end()) {
            out.push_back({r.method, r.snr_db, r.pilot_len, 0, 0.0, 0.0, 0.0});
            it = out.end() - 1;
        }
        ++it->count;
        it->mean_objective += r.objective;
        it->mean_rate += r.rate_bits;
        it->mean_wall_ms += r.wall_ms;
    }
    for (auto &s : out) {
        const double n = static_cast<double>(s.count);
        s.mean_objective /= n;
        s.mean_rate /= n;
        s.mean_wall_ms /= n;
    }
    return out;
}

void write_csv(const std::vector<ResultRow> &rows, std::ostream &out) {
    out << kCsvHeader << '\n';
    std::ostringstream line;
    line.imbue(std::locale::classic());
    for (const auto &r : rows) {
        line.str("");
        line << std::setprecision(17) << r.method << ',' << r.m_t << ',' << r.m_r << ',' << r.n_s << ',' << r.n_rf
             << ',' << r.snr_db << ',' << r.pilot_len << ',' << r.episode_seed << ',' << r.objective << ','
             << r.rate_bits << ',' << r.chordal_tx << ',' << r.chordal_rx << ',' << std::setprecision(6) << r.wall_ms
             << ',' << r.channel_hash << '\n';
        out << line.str();
    }
}

void print_summary(const std::vector<SummaryRow> &summary, std::ostream &out) {
    out << std::left << std::setw(18) << "method" << std::right << std::setw(9) << "snr_db" << std::setw(10)
        << "pilots" << std::setw(8) << "n" << std::setw(14) << "objective" << std::setw(12) << "rate" << std::setw(12)
        << "wall_ms" << '\n';
    for (const auto &s : summary)
        out << std::left << std::setw(18) << s.method << std::right << std::setw(9) << std::fixed
            << std::setprecision(1) << s.snr_db << std::setw(10) << s.pilot_len << std::setw(8) << s.count
            << std::setw(14) << std::setprecision(4) << s.mean_objective << std::setw(12) << s.mean_rate
            << std::setw(12) << s.mean_wall_ms << '\n';
    out << std::defaultfloat;
}

} // namespace pingpong
