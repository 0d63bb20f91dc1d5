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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <Eigen/Dense>

#include "pingpong/activenet.hpp"
#include "pingpong/baselines.hpp"
#include "pingpong/channels.hpp"
#include "pingpong/config.hpp"
#include "pingpong/eval.hpp"
#include "pingpong/training.hpp"

using namespace pingpong;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 3) {
    std::ostringstream s;
    s << std::setprecision(prec) << v;
    return s.str();
}

Eigen::MatrixXcd to_eigen(const ComplexMatrix &a) {
    Eigen::MatrixXcd m(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            m(r, c) = a(r, c);
    return m;
}

ComplexMatrix from_eigen(const Eigen::MatrixXcd &m) {
    ComplexMatrix a(m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            a(r, c) = m(r, c);
    return a;
}

int run_command(const std::string &cmd, std::string &output) {
    FILE *p = popen((cmd + " 2>&1").c_str(), "r");
    if (!p)
        return -1;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p))
        output.append(buf, n);
    const int status = pclose(p);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---- 1 ------------------------------------------------------------------------------

Outcome power_iteration_convergence() {
    const auto t0 = Clock::now();
    double worst_chordal = 0.0, worst_gap = 0.0, worst_ratio = 0.0;
    std::size_t met = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        Rng rng = make_rng(101, "acceptance-power", k);
        const ChannelMatrix g = rayleigh_channel(16, 16, rng);
        PowerIterationPolicy a(random_orthonormal(16, 2, rng)), b(ComplexMatrix{});
        const EpisodeResult r = run_episode(g, a, b, 30, NoiseSpec::noiseless(), rng, Mode::Digital);
        const OptimalPair opt = optimal_beamformers(g, 2);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(to_eigen(g.g)).singularValues();
        const double perfect = 2.0 * (std::log(sv(0)) + std::log(sv(1)));
        const double chordal = chordal_distance(r.w_t_overall, opt.w_t_star);
        const double gap = std::abs(r.objective - perfect);
        worst_chordal = std::max(worst_chordal, chordal);
        worst_gap = std::max(worst_gap, gap);
        worst_ratio = std::max(worst_ratio, sv(2) / sv(1));
        met += chordal < 1e-6 && gap < 1e-6;
    }
    const double secs = seconds_since(t0);
    return {worst_chordal < 1e-6 && worst_gap < 1e-6 && secs < 5.0,
            "max chordal " + fmt(worst_chordal) + " (< 1e-6), max objective gap " + fmt(worst_gap) +
                " (< 1e-6), " + std::to_string(met) + "/100 channels within both, largest sigma3/sigma2 " +
                fmt(worst_ratio) + " (contraction per round (sigma3/sigma2)^2), " + fmt(secs) + " s (< 5 s)"};
}

// ---- 2 ------------------------------------------------------------------------------

Outcome convergence_rate_law() {
    Rng rng = make_rng(102, "acceptance-rate");
    Eigen::MatrixXcd u = Eigen::HouseholderQR<Eigen::MatrixXcd>(Eigen::MatrixXcd::Random(3, 3)).householderQ();
    Eigen::MatrixXcd v = Eigen::HouseholderQR<Eigen::MatrixXcd>(Eigen::MatrixXcd::Random(3, 3)).householderQ();
    const Eigen::Vector3d s(3.0, 1.0, 0.1);
    const Eigen::MatrixXcd ge = u * s.cast<cplx>().asDiagonal() * v.adjoint();
    ChannelMatrix g;
    g.g = from_eigen(ge);
    const ComplexMatrix w0 = random_orthonormal(3, 1, rng);
    PowerIterationPolicy a(w0), b(ComplexMatrix{});
    const EpisodeResult r = run_episode(g, a, b, 12, NoiseSpec::noiseless(), rng, Mode::Digital);

    // Oracle: W_l spans (G^H G)^l W_0.
    const Eigen::MatrixXcd gram = ge.adjoint() * ge;
    const Eigen::VectorXcd v1 = v.col(0);
    Eigen::MatrixXcd w = to_eigen(w0);
    double worst_ratio = 0.0, worst_track = 0.0;
    std::vector<double> err_sim, err_oracle;
    for (std::size_t l = 0; l < r.sensing_a.size(); ++l) {
        const Eigen::MatrixXcd ws = to_eigen(overall_matrix(r.sensing_a[l]));
        const Eigen::MatrixXcd wo = w / w.norm();
        err_sim.push_back((ws - v1 * (v1.adjoint() * ws)).norm());
        err_oracle.push_back((wo - v1 * (v1.adjoint() * wo)).norm());
        worst_track = std::max(worst_track, std::abs(std::abs((wo.adjoint() * ws)(0, 0)) - 1.0));
        w = gram * wo;
    }
    bool ok = true;
    for (std::size_t l = 3; l <= 10; ++l) {
        const double ratio = err_sim[l] / err_sim[l - 1];
        const double oracle_ratio = err_oracle[l] / err_oracle[l - 1];
        const double dev = std::abs(ratio - 1.0 / 9.0) / (1.0 / 9.0);
        worst_ratio = std::max(worst_ratio, dev);
        ok = ok && dev < 0.2 && std::abs(oracle_ratio - 1.0 / 9.0) / (1.0 / 9.0) < 0.2;
    }
    ok = ok && worst_track < 1e-9;
    return {ok, "max relative deviation from 1/9 over rounds 3-10: " + fmt(worst_ratio) +
                    " (< 0.2); subspace vs matrix-power oracle " + fmt(worst_track)};
}

// ---- 3 ------------------------------------------------------------------------------

Outcome reduction_property() {
    ModelDims d;
    d.m_t = d.m_r = 16;
    d.n_s = 2;
    d.hidden = 64;
    d.width = 128;
    d.n_f = 16;
    Checkpoint ck = initial_checkpoint(d, 103);
    zero_output_layers(ck.a);
    zero_output_layers(ck.b);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 50; ++k) {
        Rng rng = make_rng(103, "acceptance-reduction", k);
        const ChannelMatrix g = rayleigh_channel(16, 16, rng);
        const NoiseSpec noise = NoiseSpec::from_snr_db(0.0);
        const std::uint64_t seed = rng();
        Rng r1(seed), r2(seed);
        LearnedAgentPolicy la(ck.a), lb(ck.b);
        const EpisodeResult learned = run_episode(g, la, lb, 6, noise, r1, Mode::Digital, {.record_intermediates = true});
        PowerIterationPolicy pa(overall_matrix(learned.sensing_a[0])), pb(ComplexMatrix{});
        const EpisodeResult power = run_episode(g, pa, pb, 6, noise, r2, Mode::Digital, {.record_intermediates = true});
        for (std::size_t l = 0; l < 6; ++l) {
            worst = std::max(worst, max_abs_diff(overall_matrix(learned.sensing_a[l]), overall_matrix(power.sensing_a[l])));
            worst = std::max(worst, max_abs_diff(overall_matrix(learned.sensing_b[l]), overall_matrix(power.sensing_b[l])));
            worst = std::max(worst, max_abs_diff(learned.intermediates[l].first, power.intermediates[l].first));
            worst = std::max(worst, max_abs_diff(learned.intermediates[l].second, power.intermediates[l].second));
        }
    }
    return {worst < 1e-9, "max round-by-round difference " + fmt(worst) + " (< 1e-9) over 50 channels"};
}

// ---- 4 ------------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    std::string out;
    const int code = run_command(std::string(PINGPONG_CLI_PATH) + " gradcheck", out);
    const double secs = seconds_since(t0);
    std::cout << out;
    return {code == 0 && secs < 120.0, "exit " + std::to_string(code) + ", " + fmt(secs) + " s (< 120 s)"};
}

// ---- 5 ------------------------------------------------------------------------------

Eigen::MatrixXcd lmmse_oracle(const Eigen::MatrixXcd &y, const Eigen::MatrixXcd &p, double nv) {
    const Eigen::Index m_r = y.rows(), m_t = p.rows(), n = p.cols();
    // vec(Y) = (P^T kron I) vec(G) + vec(N), prior vec(G) ~ CN(0, I)
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(m_r * n, m_r * m_t);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index k = 0; k < m_t; ++k)
            for (Eigen::Index r = 0; r < m_r; ++r)
                a(c * m_r + r, k * m_r + r) = p(k, c);
    const Eigen::VectorXcd yv = Eigen::Map<const Eigen::VectorXcd>(y.data(), y.size());
    const Eigen::MatrixXcd cov = a * a.adjoint() + nv * Eigen::MatrixXcd::Identity(a.rows(), a.rows());
    const Eigen::VectorXcd gv = a.adjoint() * cov.ldlt().solve(yv);
    return Eigen::Map<const Eigen::MatrixXcd>(gv.data(), m_r, m_t);
}

Outcome lmmse_equivalence() {
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
        Rng rng = make_rng(105, "acceptance-lmmse", k);
        const ChannelMatrix g = rayleigh_channel(8, 8, rng);
        const ComplexMatrix p = normalize_columns(sample_complex_gaussian(8, 12, 1.0, rng));
        const NoiseSpec noise = NoiseSpec::from_snr_db(0.0);
        const ComplexMatrix y = probe(Direction::AtoB, g, {p}, noise, rng);
        const ChannelMatrix est = lmmse_estimate(y, p, noise.sigma_b_sq);
        const Eigen::MatrixXcd diff = to_eigen(est.g) - lmmse_oracle(to_eigen(y), to_eigen(p), noise.sigma_b_sq);
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
    return {worst < 1e-8, "max entry difference " + fmt(worst) + " (< 1e-8) over 20 instances"};
}

// ---- 6 ------------------------------------------------------------------------------

Outcome omp_exactness() {
    const OmpGrid grid = OmpGrid::uniform(16, 16, 64, 64);
    std::size_t exact = 0;
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        Rng rng = make_rng(106, "acceptance-omp", k);
        const std::size_t atom = std::uniform_int_distribution<std::size_t>(0, grid.atoms() - 1)(rng);
        std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
        const PathParams path{cplx(n01(rng), n01(rng)), grid.aoa_grid[atom / grid.aod_grid.size()],
                              grid.aod_grid[atom % grid.aod_grid.size()]};
        ChannelMatrix g;
        g.model = ChannelModel::SparseMmWave;
        g.paths = {path};
        g.g = channel_from_paths(16, 16, g.paths);
        std::vector<ComplexMatrix> ys;
        std::vector<OmpMeasurement> cfg;
        for (int m = 0; m < 8; ++m) {
            const HybridBeamformer tx = normalize_overall_columns(
                {random_phase_matrix(16, 4, rng), sample_complex_gaussian(4, 2, 1.0, rng)});
            const ComplexMatrix fr = random_phase_matrix(16, 4, rng);
            ys.push_back(hybrid_probe(Direction::AtoB, g, tx, fr, NoiseSpec::noiseless(), rng));
            cfg.push_back({fr, tx.overall()});
        }
        const OmpResult r = omp_estimate(ys, cfg, grid, 1);
        const double nmse = (r.estimate.g - g.g).frobenius_norm_sq() / g.g.frobenius_norm_sq();
        worst = std::max(worst, nmse);
        exact += nmse < 1e-8;
    }
    return {exact == 100, std::to_string(exact) + "/100 trials with NMSE < 1e-8, worst " + fmt(worst)};
}

// ---- benchmarks shared by 7-10 ----------------------------------------------------

struct Bench {
    BenchmarkConfig config;
    BenchmarkResult result;
    bool learned = false;
    std::string note;
};

Bench load_bench(const std::string &file, const std::string &checkpoint) {
    const fs::path root(PINGPONG_SOURCE_DIR);
    nlohmann::json cfg = resolve_config((root / "configs" / file).string(), {}, nullptr);
    Bench b;
    const fs::path ck = root / checkpoint;
    b.learned = fs::exists(ck);
    auto &methods = cfg["bench"]["methods"];
    if (b.learned) {
        cfg["bench"]["checkpoints"]["active_sensing"] = ck.string();
    } else {
        nlohmann::json kept = nlohmann::json::array();
        for (const auto &m : methods)
            if (!is_learned_method(m.get<std::string>()))
                kept.push_back(m);
        methods = kept;
        b.note = "missing " + ck.string();
    }
    b.config = bench_config_from(cfg);
    b.config.output.clear();
    const auto t0 = Clock::now();
    b.result = run_benchmark(b.config);
    std::cout << "  " << file << ": " << b.result.rows.size() << " rows in " << fmt(seconds_since(t0)) << " s\n";
    return b;
}

Outcome constraint_suite(const std::vector<const Bench *> &benches) {
    double ortho = 0.0, modulus = 0.0, norm = 0.0, excess = -1e300;
    std::size_t rows = 0, failures = 0;
    for (const Bench *b : benches) {
        failures += b->result.failures;
        for (const auto &r : b->result.rows) {
            ++rows;
            ortho = std::max(ortho, r.orthonormality_error);
            modulus = std::max(modulus, r.unit_modulus_error);
            norm = std::max(norm, r.column_norm_error);
            excess = std::max(excess, r.objective - r.perfect_objective);
        }
    }
    const bool ok = rows > 0 && failures == 0 && ortho < 1e-9 && modulus < 1e-12 && norm < 1e-9 && excess <= 1e-9;
    return {ok, std::to_string(rows) + " episodes: orthonormality " + fmt(ortho) + ", unit modulus " + fmt(modulus) +
                    ", column norm " + fmt(norm) + ", max excess over perfect CSI " + fmt(excess) + ", dropped " +
                    std::to_string(failures)};
}

// Paired bootstrap of mean(learned - best baseline) over episodes.
Outcome learning_win(const Bench &b, const std::vector<std::string> &baselines) {
    if (!b.learned)
        return {false, b.note};
    const std::size_t n = b.config.episodes;
    auto per_episode = [&](const std::string &method) {
        std::vector<double> v(n, std::numeric_limits<double>::quiet_NaN());
        for (const auto &r : b.result.rows)
            if (r.method == method)
                v[r.episode] = r.objective;
        return v;
    };
    auto mean = [](const std::vector<double> &v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    const std::vector<double> learned = per_episode("active_sensing");
    std::string best;
    double best_mean = -1e300;
    std::ostringstream means;
    means << "learned " << fmt(mean(learned), 4);
    for (const auto &m : baselines) {
        const double mu = mean(per_episode(m));
        means << ", " << m << " " << fmt(mu, 4);
        if (mu > best_mean) {
            best_mean = mu;
            best = m;
        }
    }
    const std::vector<double> base = per_episode(best);
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i)
        diff[i] = learned[i] - base[i];
    if (std::any_of(diff.begin(), diff.end(), [](double x) { return std::isnan(x); }))
        return {false, "unpaired episodes; " + means.str()};
    Rng rng = make_rng(108, "acceptance-bootstrap");
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> boot(4000);
    for (auto &x : boot) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += diff[pick(rng)];
        x = s / n;
    }
    std::sort(boot.begin(), boot.end());
    const double lower = boot[static_cast<std::size_t>(0.025 * boot.size())];
    return {lower > 0.0, means.str() + "; best baseline " + best + ", mean difference " + fmt(mean(diff), 4) +
                             ", bootstrap 95% lower bound " + fmt(lower, 4) + " (> 0), n = " + std::to_string(n)};
}

Outcome timing_report(const std::vector<const Bench *> &benches) {
    bool ok = true;
    for (const Bench *b : benches) {
        print_summary(b->result.summary, std::cout);
        for (const auto &r : b->result.rows)
            ok = ok && std::isfinite(r.wall_ms) && r.wall_ms >= 0.0;
    }
    // End-to-end: the CLI writes wall_ms per row and a summary with a wall_ms column.
    const fs::path csv = fs::temp_directory_path() / "pingpong_acceptance_timing.csv";
    std::string out;
    const int code = run_command(std::string(PINGPONG_CLI_PATH) +
                                     " bench -s model.m_t=8 model.m_r=8 bench.episodes=5 bench.rounds=[2] -o " +
                                     csv.string(),
                                 out);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    ok = ok && code == 0 && header.find(",wall_ms,") != std::string::npos && out.find("wall_ms") != std::string::npos;
    return {ok, "per-method mean wall_ms reported (no numeric threshold)"};
}

} // namespace

int main() {
    std::vector<std::pair<int, Outcome>> results;
    auto record = [&](int id, const std::string &name, const std::function<Outcome()> &fn) {
        std::cout << "-- " << id << " " << name << "\n" << std::flush;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        results.emplace_back(id, o);
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << " " << name << ": " << o.detail << "\n" << std::flush;
    };

    record(1, "power-iteration convergence (noiseless)", power_iteration_convergence);
    record(2, "convergence-rate law", convergence_rate_law);
    record(3, "reduction to power iteration", reduction_property);
    record(4, "gradient fidelity", gradient_fidelity);
    record(5, "LMMSE oracle equivalence", lmmse_equivalence);
    record(6, "OMP exactness", omp_exactness);

    Bench digital, hybrid;
    bool benches_ok = true;
    try {
        std::cout << "-- running benchmarks\n" << std::flush;
        digital = load_bench("bench_digital.json", "models/digital/checkpoint.ckpt");
        hybrid = load_bench("bench_hybrid.json", "models/hybrid/checkpoint.ckpt");
    } catch (const std::exception &e) {
        benches_ok = false;
        std::cout << "benchmark failed: " << e.what() << "\n";
    }
    const std::vector<const Bench *> both{&digital, &hybrid};
    record(7, "constraint suite", [&] { return benches_ok ? constraint_suite(both) : Outcome{false, "no benchmark"}; });
    record(8, "learning win (digital)", [&] {
        return benches_ok ? learning_win(digital, {"power_iteration", "summed_power", "lmmse_svd"})
                          : Outcome{false, "no benchmark"};
    });
    record(9, "learning win (hybrid)",
           [&] { return benches_ok ? learning_win(hybrid, {"omp_svd"}) : Outcome{false, "no benchmark"}; });
    record(10, "timing report", [&] { return benches_ok ? timing_report(both) : Outcome{false, "no benchmark"}; });

    std::cout << "\nsummary\n";
    int failed = 0;
    for (const auto &[id, o] : results) {
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << "\n";
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
