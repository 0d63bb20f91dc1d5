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

#include "pingpong/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace pingpong {

ComplexMatrix random_orthonormal(std::size_t m, std::size_t n, Rng &rng) {
    return thin_qr(sample_complex_gaussian(m, n, 1.0, rng)).q;
}

ComplexMatrix random_phase_matrix(std::size_t rows, std::size_t cols, Rng &rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    std::vector<double> theta(rows * cols);
    for (auto &t : theta)
        t = u(rng);
    return phase_matrix(rows, cols, theta);
}

// ---- power iteration --------------------------------------------------------

PowerIterationPolicy::PowerIterationPolicy(ComplexMatrix initial, bool summed)
    : initial_(std::move(initial)), summed_(summed) {}

Sensing PowerIterationPolicy::next_sensing(std::size_t) {
    if (!q_.empty())
        return BeamformerSet{q_};
    if (initial_.empty())
        throw Error(ErrorCode::DimensionMismatch, "power iteration has nothing to transmit before receiving");
    return BeamformerSet{initial_};
}

void PowerIterationPolicy::receive(std::size_t, const ComplexMatrix &y) {
    if (!last_received_.empty() && (y.rows() != last_received_.rows() || y.cols() != last_received_.cols()))
        throw Error(ErrorCode::DimensionMismatch, "received pilots changed shape");
    last_received_ = y;
    if (accumulated_.empty())
        accumulated_ = y;
    else
        accumulated_ += y;
    q_ = thin_qr(summed_ ? accumulated_ : y).q;
}

Sensing PowerIterationPolicy::final_beamformer() {
    if (q_.empty())
        throw Error(ErrorCode::DimensionMismatch, "power iteration has not received any pilots");
    return BeamformerSet{q_};
}

std::unique_ptr<AgentPolicy> power_iteration_policy(std::size_t n_s, ComplexMatrix initial) {
    if (!initial.empty() && initial.cols() != n_s)
        throw Error(ErrorCode::DimensionMismatch, "initial sensing must have n_s columns");
    return std::make_unique<PowerIterationPolicy>(std::move(initial), false);
}

std::unique_ptr<AgentPolicy> summed_power_policy(std::size_t n_s, ComplexMatrix initial) {
    if (!initial.empty() && initial.cols() != n_s)
        throw Error(ErrorCode::DimensionMismatch, "initial sensing must have n_s columns");
    return std::make_unique<PowerIterationPolicy>(std::move(initial), true);
}

FixedPolicy::FixedPolicy(Sensing sensing, Sensing final, ComplexMatrix receive_analog)
    : sensing_(std::move(sensing)), final_(std::move(final)), analog_(std::move(receive_analog)) {}

ComplexMatrix FixedPolicy::receive_analog(std::size_t round) {
    if (analog_.empty())
        return AgentPolicy::receive_analog(round);
    return analog_;
}

// ---- LMMSE ------------------------------------------------------------------

ChannelMatrix lmmse_estimate(const ComplexMatrix &y, const ComplexMatrix &pilots, double noise_var) {
    if (y.cols() != pilots.cols())
        throw Error(ErrorCode::DimensionMismatch, "pilot count differs from observation count");
    // G_hat^H = (P P^H + s I)^{-1} P Y^H, the system matrix being Hermitian.
    ComplexMatrix a = pilots * pilots.adjoint();
    for (std::size_t i = 0; i < a.rows(); ++i)
        a(i, i) += noise_var;
    const ComplexMatrix rhs = pilots * y.adjoint();
    return {lu_solve(a, rhs).adjoint(), ChannelModel::Rayleigh, {}};
}

BeamformerPair lmmse_svd_baseline(const ChannelMatrix &g, std::size_t n_s, std::size_t total_pilots,
                                  const NoiseSpec &noise, Rng &rng) {
    if (total_pilots < 1)
        throw Error(ErrorCode::DimensionMismatch, "LMMSE needs at least one pilot");
    const std::size_t m_t = g.m_t();
    ComplexMatrix pilots = normalize_columns(
        sample_complex_gaussian(m_t, total_pilots, 1.0 / static_cast<double>(m_t), rng));
    const ComplexMatrix y = probe(Direction::AtoB, g, BeamformerSet{pilots}, noise, rng);
    const ChannelMatrix g_hat = lmmse_estimate(y, pilots, noise.sigma_b_sq);
    SvdTopK s = svd_topk(g_hat.g, n_s);
    return {std::move(s.right), std::move(s.left)};
}

// ---- OMP ----------------------------------------------------------------------

OmpGrid OmpGrid::uniform(std::size_t m_r, std::size_t m_t, std::size_t n_aoa, std::size_t n_aod,
                         bool build_dictionary) {
    if (n_aoa < 1 || n_aod < 1)
        throw Error(ErrorCode::DimensionMismatch, "grid needs at least one point per axis");
    const double lo = std::sin(-std::numbers::pi / 3.0), hi = std::sin(std::numbers::pi / 3.0);
    auto axis = [lo, hi](std::size_t n) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = n == 1 ? 0.0 : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            v[i] = std::asin(s);
        }
        return v;
    };
    OmpGrid grid;
    grid.m_r = m_r;
    grid.m_t = m_t;
    grid.aoa_grid = axis(n_aoa);
    grid.aod_grid = axis(n_aod);
    if (build_dictionary) {
        const double s = 1.0 / std::sqrt(static_cast<double>(m_r * m_t));
        grid.dictionary = ComplexMatrix(m_r * m_t, n_aoa * n_aod);
        for (std::size_t i = 0; i < n_aoa; ++i) {
            const auto a = steering_vector(m_r, grid.aoa_grid[i]);
            for (std::size_t j = 0; j < n_aod; ++j) {
                const auto b = steering_vector(m_t, grid.aod_grid[j]);
                for (std::size_t c = 0; c < m_t; ++c)
                    for (std::size_t r = 0; r < m_r; ++r)
                        grid.dictionary(c * m_r + r, i * n_aod + j) = s * a[r] * b[c];
            }
        }
    }
    return grid;
}

namespace {

ComplexMatrix steering_matrix(std::size_t m, const std::vector<double> &angles) {
    ComplexMatrix out(m, angles.size());
    for (std::size_t j = 0; j < angles.size(); ++j)
        out.set_col(j, steering_vector(m, angles[j]));
    return out;
}

} // namespace

OmpResult omp_estimate(const std::vector<ComplexMatrix> &y_list, const std::vector<OmpMeasurement> &config,
                       const OmpGrid &grid, std::size_t sparsity) {
    if (sparsity < 1)
        throw Error(ErrorCode::DimensionMismatch, "sparsity must be at least 1");
    if (y_list.size() != config.size() || y_list.empty())
        throw Error(ErrorCode::DimensionMismatch, "one measurement configuration per observation required");
    const std::size_t n_aoa = grid.aoa_grid.size(), n_aod = grid.aod_grid.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(grid.m_r * grid.m_t));
    const ComplexMatrix ar = steering_matrix(grid.m_r, grid.aoa_grid);
    const ComplexMatrix at = steering_matrix(grid.m_t, grid.aod_grid);

    // Per probe k the atom (i, j) is observed as scale * u_ki v_kj^T with
    // u = F_r^H a(aoa_i) and v = T^T b(aod_j).
    const std::size_t kp = y_list.size();
    std::vector<ComplexMatrix> u(kp), v(kp);
    std::size_t total = 0;
    for (std::size_t k = 0; k < kp; ++k) {
        if (config[k].receiver_analog.rows() != grid.m_r || config[k].transmit_overall.rows() != grid.m_t)
            throw Error(ErrorCode::DimensionMismatch, "measurement does not match the grid dimensions");
        u[k] = adjoint_times(config[k].receiver_analog, ar);
        v[k] = config[k].transmit_overall.transpose() * at;
        if (y_list[k].rows() != u[k].rows() || y_list[k].cols() != v[k].rows())
            throw Error(ErrorCode::DimensionMismatch, "observation shape does not match its configuration");
        total += y_list[k].size();
    }
    std::vector<double> atom_norm(n_aoa * n_aod, 0.0);
    for (std::size_t k = 0; k < kp; ++k)
        for (std::size_t i = 0; i < n_aoa; ++i) {
            const double nu = u[k].column_norm(i);
            for (std::size_t j = 0; j < n_aod; ++j) {
                const double nv = v[k].column_norm(j);
                atom_norm[i * n_aod + j] += nu * nu * nv * nv;
            }
        }
    for (auto &x : atom_norm)
        x = scale * std::sqrt(x);

    auto measured_atom = [&](std::size_t idx) {
        const std::size_t i = idx / n_aod, j = idx % n_aod;
        std::vector<cplx> col;
        col.reserve(total);
        for (std::size_t k = 0; k < kp; ++k)
            for (std::size_t r = 0; r < u[k].rows(); ++r)
                for (std::size_t c = 0; c < v[k].rows(); ++c)
                    col.push_back(scale * u[k](r, i) * v[k](c, j));
        return col;
    };

    ComplexMatrix yvec(total, 1);
    {
        std::size_t p = 0;
        for (const auto &y : y_list)
            for (const auto &x : y.data())
                yvec(p++, 0) = x;
    }
    const double y_norm = yvec.frobenius_norm();

    OmpResult res;
    ComplexMatrix residual = yvec;
    ComplexMatrix phi(total, 0);
    ComplexMatrix coef;
    res.residual_norms.push_back(y_norm);
    for (std::size_t it = 0; it < sparsity; ++it) {
        if (residual.frobenius_norm() <= 1e-13 * y_norm)
            break;
        // Correlations C = sum_k U_k^H R_k conj(V_k), R_k the residual block of probe k.
        ComplexMatrix corr(n_aoa, n_aod);
        std::size_t p = 0;
        for (std::size_t k = 0; k < kp; ++k) {
            ComplexMatrix rk(y_list[k].rows(), y_list[k].cols());
            for (auto &x : rk.data())
                x = residual(p++, 0);
            corr += adjoint_times(u[k], rk * v[k].conj());
        }
        std::size_t best = 0;
        double best_val = -1.0;
        for (std::size_t idx = 0; idx < n_aoa * n_aod; ++idx) {
            if (atom_norm[idx] <= 0.0 || std::find(res.support.begin(), res.support.end(), idx) != res.support.end())
                continue;
            const double val = std::abs(corr.data()[idx]) * scale / atom_norm[idx];
            if (val > best_val) {
                best_val = val;
                best = idx;
            }
        }
        if (best_val < 0.0)
            break;
        res.support.push_back(best);
        ComplexMatrix grown(total, res.support.size());
        for (std::size_t r = 0; r < total; ++r)
            for (std::size_t c = 0; c + 1 < res.support.size(); ++c)
                grown(r, c) = phi(r, c);
        grown.set_col(res.support.size() - 1, measured_atom(best));
        phi = std::move(grown);
        try {
            coef = least_squares(phi, yvec);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::DegenerateColumns)
                throw;
            throw Error(ErrorCode::RankDeficientRefit,
                        "active set of " + std::to_string(res.support.size()) + " atoms is rank deficient");
        }
        residual = yvec - phi * coef;
        res.residual_norms.push_back(residual.frobenius_norm());
    }

    std::vector<PathParams> paths;
    for (std::size_t m = 0; m < res.support.size(); ++m) {
        const std::size_t i = res.support[m] / n_aod, j = res.support[m] % n_aod;
        paths.push_back({coef(m, 0) * scale, grid.aoa_grid[i], grid.aod_grid[j]});
    }
    res.estimate = {channel_from_paths(grid.m_r, grid.m_t, paths), ChannelModel::SparseMmWave, std::move(paths)};
    return res;
}

// ---- hybrid decomposition ----------------------------------------------------------

namespace {

// (F^H F + eps I)^{-1} F^H W; the ridge keeps the refit defined for collinear analog columns.
ComplexMatrix digital_refit(const ComplexMatrix &f, const ComplexMatrix &w) {
    ComplexMatrix a = adjoint_times(f, f);
    const double eps = 1e-12 * (1.0 + a.frobenius_norm());
    for (std::size_t i = 0; i < a.rows(); ++i)
        a(i, i) += eps;
    return lu_solve(a, adjoint_times(f, w));
}

ComplexMatrix phase_projection(const ComplexMatrix &x) {
    ComplexMatrix f(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const cplx z = x.data()[i];
        f.data()[i] = std::abs(z) > 0.0 ? z / std::abs(z) : cplx(1.0, 0.0);
    }
    return f;
}

} // namespace

HybridBeamformer hybrid_decompose(const ComplexMatrix &w_star, std::size_t n_rf, Rng &rng, std::size_t max_iter,
                                  double rel_tol) {
    const std::size_t m = w_star.rows(), n_s = w_star.cols();
    if (n_rf < n_s)
        throw Error(ErrorCode::DimensionMismatch, "hybrid decomposition needs n_rf >= n_s");
    HybridBeamformer h;
    if (n_rf >= 2 * n_s) {
        // Every entry x with |x| <= 2 equals exp(i a) + exp(i b), a, b = arg x -/+ acos(|x| / 2),
        // so two RF chains per stream represent W* exactly.
        double peak = 0.0;
        for (const auto &x : w_star.data())
            peak = std::max(peak, std::abs(x));
        if (peak == 0.0)
            throw Error(ErrorCode::DegenerateColumns, "cannot decompose a zero beamformer");
        const double c = peak / 2.0;
        h.analog = random_phase_matrix(m, n_rf, rng);
        h.digital = ComplexMatrix(n_rf, n_s);
        for (std::size_t s = 0; s < n_s; ++s) {
            for (std::size_t r = 0; r < m; ++r) {
                const cplx x = w_star(r, s) / c;
                const double mag = std::min(std::abs(x), 2.0);
                const double arg = std::arg(x), delta = std::acos(mag / 2.0);
                h.analog(r, 2 * s) = std::polar(1.0, arg + delta);
                h.analog(r, 2 * s + 1) = std::polar(1.0, arg - delta);
            }
            h.digital(2 * s, s) = c;
            h.digital(2 * s + 1, s) = c;
        }
        return normalize_overall_columns(std::move(h));
    }
    ComplexMatrix f = random_phase_matrix(m, n_rf, rng);
    for (std::size_t s = 0; s < n_s; ++s)
        for (std::size_t r = 0; r < m; ++r)
            f(r, s) = std::abs(w_star(r, s)) > 0.0 ? w_star(r, s) / std::abs(w_star(r, s)) : cplx(1.0, 0.0);
    ComplexMatrix d = digital_refit(f, w_star);
    double err = (w_star - f * d).frobenius_norm();
    for (std::size_t it = 0; it < max_iter; ++it) {
        const ComplexMatrix f_new = phase_projection(w_star * d.adjoint());
        const ComplexMatrix d_new = digital_refit(f_new, w_star);
        const double err_new = (w_star - f_new * d_new).frobenius_norm();
        if (err_new > err)
            break;
        const double improvement = err - err_new;
        f = f_new;
        d = d_new;
        err = err_new;
        if (improvement <= rel_tol * std::max(err, 1e-300))
            break;
    }
    h.analog = std::move(f);
    h.digital = std::move(d);
    return normalize_overall_columns(std::move(h));
}

HybridPair omp_svd_baseline(const ChannelMatrix &g, std::size_t n_s, std::size_t n_rf, std::size_t total_pilots,
                            const OmpGrid &grid, std::size_t sparsity, const NoiseSpec &noise, Rng &rng) {
    if (total_pilots < n_s || total_pilots % n_s != 0)
        throw Error(ErrorCode::DimensionMismatch, "pilot budget must be a positive multiple of n_s");
    if (grid.m_r != g.m_r() || grid.m_t != g.m_t())
        throw Error(ErrorCode::DimensionMismatch, "grid built for a different array size");
    const std::size_t probes = total_pilots / n_s;
    std::vector<ComplexMatrix> ys;
    std::vector<OmpMeasurement> cfg;
    for (std::size_t k = 0; k < probes; ++k) {
        HybridBeamformer tx{random_phase_matrix(g.m_t(), n_rf, rng), sample_complex_gaussian(n_rf, n_s, 1.0, rng)};
        tx = normalize_overall_columns(std::move(tx));
        const ComplexMatrix fr = random_phase_matrix(g.m_r(), n_rf, rng);
        ys.push_back(hybrid_probe(Direction::AtoB, g, tx, fr, noise, rng));
        cfg.push_back({fr, tx.overall()});
    }
    const OmpResult est = omp_estimate(ys, cfg, grid, sparsity);
    SvdTopK s = svd_topk(est.estimate.g, n_s);
    HybridPair out;
    out.tx = hybrid_decompose(s.right, n_rf, rng);
    out.rx = hybrid_decompose(s.left, n_rf, rng);
    return out;
}

} // namespace pingpong
