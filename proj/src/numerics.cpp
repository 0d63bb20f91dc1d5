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

#include "pingpong/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pingpong {

const char *to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DegenerateColumns: return "DegenerateColumns";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::NonOrthonormalInput: return "NonOrthonormalInput";
    case ErrorCode::NonUnitInput: return "NonUnitInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PowerViolation: return "PowerViolation";
    case ErrorCode::UnitModulusViolation: return "UnitModulusViolation";
    case ErrorCode::SingularCombiner: return "SingularCombiner";
    case ErrorCode::RankDeficientRefit: return "RankDeficientRefit";
    case ErrorCode::NearSingular: return "NearSingular";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

namespace {

void require_same_shape(const ComplexMatrix &a, const ComplexMatrix &b, const char *op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

} // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw Error(ErrorCode::ShapeMismatch, "entry count does not match rows*cols");
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto &r : rows) {
        if (r.size() != cols_)
            throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> d, std::size_t rows, std::size_t cols) {
    ComplexMatrix m(rows, cols);
    for (std::size_t i = 0; i < d.size() && i < rows && i < cols; ++i)
        m(i, i) = d[i];
    return m;
}

ComplexMatrix ComplexMatrix::column(std::span<const cplx> v) {
    return ComplexMatrix(v.size(), 1, std::vector<cplx>(v.begin(), v.end()));
}

std::vector<cplx> ComplexMatrix::col(std::size_t c) const {
    std::vector<cplx> v(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        v[r] = (*this)(r, c);
    return v;
}

void ComplexMatrix::set_col(std::size_t c, std::span<const cplx> v) {
    if (v.size() != rows_)
        throw Error(ErrorCode::ShapeMismatch, "set_col length");
    for (std::size_t r = 0; r < rows_; ++r)
        (*this)(r, c) = v[r];
}

ComplexMatrix ComplexMatrix::cols_range(std::size_t first, std::size_t count) const {
    if (first + count > cols_)
        throw Error(ErrorCode::ShapeMismatch, "cols_range out of bounds");
    ComplexMatrix m(rows_, count);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < count; ++c)
            m(r, c) = (*this)(r, first + c);
    return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            m(c, r) = std::conj((*this)(r, c));
    return m;
}

ComplexMatrix ComplexMatrix::transpose() const {
    ComplexMatrix m(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            m(c, r) = (*this)(r, c);
    return m;
}

ComplexMatrix ComplexMatrix::conj() const {
    ComplexMatrix m = *this;
    for (auto &x : m.data_)
        x = std::conj(x);
    return m;
}

double ComplexMatrix::frobenius_norm_sq() const {
    double s = 0.0;
    for (const auto &x : data_)
        s += std::norm(x);
    return s;
}

double ComplexMatrix::frobenius_norm() const { return std::sqrt(frobenius_norm_sq()); }

double ComplexMatrix::column_norm(std::size_t c) const {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r)
        s += std::norm((*this)(r, c));
    return std::sqrt(s);
}

ComplexMatrix &ComplexMatrix::operator+=(const ComplexMatrix &o) {
    require_same_shape(*this, o, "operator+");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += o.data_[i];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator-=(const ComplexMatrix &o) {
    require_same_shape(*this, o, "operator-");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= o.data_[i];
    return *this;
}

ComplexMatrix &ComplexMatrix::operator*=(cplx s) {
    for (auto &x : data_)
        x *= s;
    return *this;
}

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (a.cols() != b.rows())
        throw Error(ErrorCode::ShapeMismatch, "matmul inner dimensions " + std::to_string(a.cols()) + " vs " +
                                                  std::to_string(b.rows()));
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{})
                continue;
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += aik * b(k, j);
        }
    return c;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b) { return a -= b; }
ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

ComplexMatrix adjoint_times(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (a.rows() != b.rows())
        throw Error(ErrorCode::ShapeMismatch, "adjoint_times row counts");
    ComplexMatrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k)
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const cplx aki = std::conj(a(k, i));
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += aki * b(k, j);
        }
    return c;
}

double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double orthonormality_error(const ComplexMatrix &w) {
    ComplexMatrix g = adjoint_times(w, w);
    g -= ComplexMatrix::identity(w.cols());
    return g.frobenius_norm();
}

bool all_finite(const ComplexMatrix &a) {
    return std::all_of(a.data().begin(), a.data().end(),
                       [](const cplx &x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
}

// The arithmetic below mirrors the differentiable Gram-Schmidt in autodiff.cpp
// operation for operation (split real/imaginary sums, multiply by the reciprocal
// norm) so both paths produce identical bits.
QrResult thin_qr(const ComplexMatrix &a, double pivot_tol) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m < n)
        throw Error(ErrorCode::ShapeMismatch, "thin_qr needs rows >= cols");
    std::vector<std::vector<double>> qre(n, std::vector<double>(m)), qim(n, std::vector<double>(m));
    ComplexMatrix r(n, n);
    std::vector<double> vr(m), vi(m);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            vr[i] = a(i, j).real();
            vi[i] = a(i, j).imag();
        }
        for (std::size_t k = 0; k < j; ++k) {
            const auto &qr = qre[k];
            const auto &qi = qim[k];
            double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
            for (std::size_t i = 0; i < m; ++i) s1 += qr[i] * vr[i];
            for (std::size_t i = 0; i < m; ++i) s2 += qi[i] * vi[i];
            for (std::size_t i = 0; i < m; ++i) s3 += qr[i] * vi[i];
            for (std::size_t i = 0; i < m; ++i) s4 += qi[i] * vr[i];
            const double rr = s1 + s2;
            const double ri = s3 - s4;
            for (std::size_t i = 0; i < m; ++i) {
                const double tr = qr[i] * rr - qi[i] * ri;
                const double ti = qi[i] * rr + qr[i] * ri;
                vr[i] = vr[i] - tr;
                vi[i] = vi[i] - ti;
            }
            r(k, j) = cplx(rr, ri);
        }
        double n1 = 0.0, n2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) n1 += vr[i] * vr[i];
        for (std::size_t i = 0; i < m; ++i) n2 += vi[i] * vi[i];
        const double nrm = std::sqrt(n1 + n2);
        if (!(nrm >= pivot_tol))
            throw Error(ErrorCode::DegenerateColumns,
                        "pivot norm " + std::to_string(nrm) + " at column " + std::to_string(j));
        const double inv = 1.0 / nrm;
        for (std::size_t i = 0; i < m; ++i) {
            qre[j][i] = vr[i] * inv;
            qim[j][i] = vi[i] * inv;
        }
        r(j, j) = nrm;
    }
    ComplexMatrix q(m, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i)
            q(i, j) = cplx(qre[j][i], qim[j][i]);
    return {std::move(q), std::move(r)};
}

namespace {

struct JacobiSvd {
    ComplexMatrix u; // m x n, columns scaled by singular values before normalization
    ComplexMatrix v; // n x n
    std::vector<double> sigma;
};

// One-sided (Hestenes) Jacobi on a tall matrix (rows >= cols).
JacobiSvd jacobi_svd_tall(const ComplexMatrix &a) {
    const std::size_t m = a.rows(), n = a.cols();
    ComplexMatrix u = a;
    ComplexMatrix v = ComplexMatrix::identity(n);
    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0;
                cplx gamma{};
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += std::norm(u(i, p));
                    beta += std::norm(u(i, q));
                    gamma += std::conj(u(i, p)) * u(i, q);
                }
                const double g = std::abs(gamma);
                if (g == 0.0 || g <= eps * std::sqrt(alpha * beta))
                    continue;
                rotated = true;
                const cplx phase = gamma / g; // column q is rotated by conj(phase) so u_p^H u_q is real
                const double zeta = (beta - alpha) / (2.0 * g);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                auto rotate = [&](ComplexMatrix &x, std::size_t rows) {
                    for (std::size_t i = 0; i < rows; ++i) {
                        const cplx xp = x(i, p);
                        const cplx xq = x(i, q) * std::conj(phase);
                        x(i, p) = c * xp - s * xq;
                        x(i, q) = s * xp + c * xq;
                    }
                };
                rotate(u, m);
                rotate(v, n);
            }
        if (!rotated)
            break;
    }
    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j)
        sigma[j] = u.column_norm(j);
    return {std::move(u), std::move(v), std::move(sigma)};
}

// Replaces columns [from, k) of `q` with unit vectors orthogonal to all earlier columns.
void complete_orthonormal(ComplexMatrix &q, std::size_t from) {
    const std::size_t m = q.rows();
    std::size_t candidate = 0;
    for (std::size_t j = from; j < q.cols(); ++j) {
        for (; candidate < m; ++candidate) {
            std::vector<cplx> v(m);
            v[candidate] = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (std::size_t k = 0; k < j; ++k) {
                    cplx proj{};
                    for (std::size_t i = 0; i < m; ++i)
                        proj += std::conj(q(i, k)) * v[i];
                    for (std::size_t i = 0; i < m; ++i)
                        v[i] -= proj * q(i, k);
                }
            double nrm = 0.0;
            for (const auto &x : v)
                nrm += std::norm(x);
            nrm = std::sqrt(nrm);
            if (nrm > 1e-6) {
                for (std::size_t i = 0; i < m; ++i)
                    q(i, j) = v[i] / nrm;
                ++candidate;
                break;
            }
        }
    }
}

} // namespace

SvdTopK svd_topk(const ComplexMatrix &a, std::size_t k) {
    const std::size_t kmax = std::min(a.rows(), a.cols());
    if (k < 1 || k > kmax)
        throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
    const bool wide = a.rows() < a.cols();
    JacobiSvd js = jacobi_svd_tall(wide ? a.adjoint() : a);
    const std::size_t n = js.sigma.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return js.sigma[x] > js.sigma[y]; });

    const std::size_t m = js.u.rows();
    ComplexMatrix uk(m, k), vk(n, k);
    std::vector<double> s(k);
    const double scale = js.sigma[order[0]];
    std::size_t nonzero = k;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t src = order[j];
        s[j] = js.sigma[src];
        for (std::size_t i = 0; i < n; ++i)
            vk(i, j) = js.v(i, src);
        if (s[j] <= 1e-14 * std::max(scale, 1e-300)) {
            nonzero = std::min(nonzero, j);
            continue;
        }
        for (std::size_t i = 0; i < m; ++i)
            uk(i, j) = js.u(i, src) / s[j];
    }
    if (nonzero < k)
        complete_orthonormal(uk, nonzero);
    if (wide)
        return {std::move(vk), std::move(s), std::move(uk)};
    return {std::move(uk), std::move(s), std::move(vk)};
}

std::vector<double> singular_values(const ComplexMatrix &a) {
    return svd_topk(a, std::min(a.rows(), a.cols())).singular_values;
}

LuResult lu_decompose(const ComplexMatrix &a) {
    if (a.rows() != a.cols())
        throw Error(ErrorCode::DimensionMismatch, "LU needs a square matrix");
    const std::size_t n = a.rows();
    LuResult res{a, std::vector<std::size_t>(n), 1, false};
    std::iota(res.perm.begin(), res.perm.end(), 0);
    ComplexMatrix &lu = res.lu;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu(i, k)) > best) {
                best = std::abs(lu(i, k));
                piv = i;
            }
        if (best == 0.0) {
            res.singular = true;
            continue;
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(lu(k, j), lu(piv, j));
            std::swap(res.perm[k], res.perm[piv]);
            res.sign = -res.sign;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            lu(i, k) /= lu(k, k);
            const cplx f = lu(i, k);
            for (std::size_t j = k + 1; j < n; ++j)
                lu(i, j) -= f * lu(k, j);
        }
    }
    return res;
}

cplx determinant(const ComplexMatrix &a) {
    const LuResult lu = lu_decompose(a);
    if (lu.singular)
        return 0.0;
    cplx d = static_cast<double>(lu.sign);
    for (std::size_t i = 0; i < a.rows(); ++i)
        d *= lu.lu(i, i);
    return d;
}

double logdet_abs_sq(const ComplexMatrix &a) {
    if (a.rows() != a.cols() || a.rows() > 8)
        throw Error(ErrorCode::DimensionMismatch, "logdet_abs_sq needs a square matrix of size <= 8");
    const double floor = std::log(kLogDetFloor);
    const LuResult lu = lu_decompose(a);
    if (lu.singular)
        return floor;
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        s += std::log(std::norm(lu.lu(i, i)));
    return std::max(s, floor);
}

ComplexMatrix lu_solve(const ComplexMatrix &a, const ComplexMatrix &b) {
    if (b.rows() != a.rows())
        throw Error(ErrorCode::ShapeMismatch, "lu_solve right-hand side rows");
    const LuResult lu = lu_decompose(a);
    if (lu.singular)
        throw Error(ErrorCode::NearSingular, "singular system");
    const std::size_t n = a.rows();
    ComplexMatrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
        std::vector<cplx> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            cplx s = b(lu.perm[i], c);
            for (std::size_t j = 0; j < i; ++j)
                s -= lu.lu(i, j) * y[j];
            y[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            cplx s = y[i];
            for (std::size_t j = i + 1; j < n; ++j)
                s -= lu.lu(i, j) * x(j, c);
            x(i, c) = s / lu.lu(i, i);
        }
    }
    return x;
}

ComplexMatrix inverse(const ComplexMatrix &a) { return lu_solve(a, ComplexMatrix::identity(a.rows())); }

ComplexMatrix least_squares(const ComplexMatrix &a, const ComplexMatrix &b) {
    const QrResult qr = thin_qr(a, 1e-12);
    const ComplexMatrix qtb = adjoint_times(qr.q, b);
    const std::size_t n = a.cols();
    ComplexMatrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c)
        for (std::size_t i = n; i-- > 0;) {
            cplx s = qtb(i, c);
            for (std::size_t j = i + 1; j < n; ++j)
                s -= qr.r(i, j) * x(j, c);
            x(i, c) = s / qr.r(i, i);
        }
    return x;
}

double chordal_distance(const ComplexMatrix &w, const ComplexMatrix &u) {
    if (w.rows() != u.rows() || w.cols() != u.cols())
        throw Error(ErrorCode::ShapeMismatch, "chordal_distance shapes differ");
    if (orthonormality_error(w) > 1e-6 || orthonormality_error(u) > 1e-6)
        throw Error(ErrorCode::NonOrthonormalInput, "chordal_distance needs orthonormal columns");
    const double k = static_cast<double>(w.cols());
    const double overlap = adjoint_times(u, w).frobenius_norm_sq();
    return std::sqrt(std::max(0.0, k - overlap));
}

ComplexMatrix sample_complex_gaussian(std::size_t rows, std::size_t cols, double variance, Rng &rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    const double sd = std::sqrt(std::max(0.0, variance) / 2.0);
    ComplexMatrix m(rows, cols);
    for (auto &x : m.data()) {
        const double re = nd(rng);
        const double im = nd(rng);
        x = cplx(sd * re, sd * im);
    }
    return m;
}

ComplexMatrix normalize_columns(ComplexMatrix a) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
        const double n = a.column_norm(c);
        if (n == 0.0)
            continue;
        for (std::size_t r = 0; r < a.rows(); ++r)
            a(r, c) /= n;
    }
    return a;
}

} // namespace pingpong
