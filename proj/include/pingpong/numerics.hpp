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

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "pingpong/errors.hpp"
#include "pingpong/rng.hpp"

namespace pingpong {

using cplx = std::complex<double>;

/// Dense complex matrix, row-major. Small sizes only (a few hundred rows).
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data);
    /// Row-wise literal, e.g. {{1, 2}, {3, 4}}.
    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const cplx> d, std::size_t rows, std::size_t cols);
    static ComplexMatrix column(std::span<const cplx> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    cplx &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx &operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    std::vector<cplx> col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const cplx> v);
    ComplexMatrix cols_range(std::size_t first, std::size_t count) const;

    ComplexMatrix adjoint() const;
    ComplexMatrix transpose() const;
    ComplexMatrix conj() const;

    double frobenius_norm_sq() const;
    double frobenius_norm() const;
    double column_norm(std::size_t c) const;

    ComplexMatrix &operator+=(const ComplexMatrix &o);
    ComplexMatrix &operator-=(const ComplexMatrix &o);
    ComplexMatrix &operator*=(cplx s);

    bool operator==(const ComplexMatrix &o) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

ComplexMatrix operator*(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix &b);
ComplexMatrix operator*(ComplexMatrix a, cplx s);
ComplexMatrix operator*(cplx s, ComplexMatrix a);

/// a^H b without materializing the adjoint.
ComplexMatrix adjoint_times(const ComplexMatrix &a, const ComplexMatrix &b);

double max_abs_diff(const ComplexMatrix &a, const ComplexMatrix &b);
/// ||w^H w - I||_F
double orthonormality_error(const ComplexMatrix &w);
bool all_finite(const ComplexMatrix &a);

struct QrResult {
    ComplexMatrix q;
    ComplexMatrix r;
};

/// Modified Gram-Schmidt thin QR with a real nonnegative R diagonal.
/// Throws DegenerateColumns when a pivot norm drops below `pivot_tol`.
QrResult thin_qr(const ComplexMatrix &a, double pivot_tol = 1e-10);

struct SvdTopK {
    ComplexMatrix left;                  // rows x k, orthonormal columns
    std::vector<double> singular_values; // nonincreasing
    ComplexMatrix right;                 // cols x k, orthonormal columns
};

/// Top-k singular triple via one-sided Jacobi. Throws InvalidK unless 1 <= k <= min(rows, cols).
SvdTopK svd_topk(const ComplexMatrix &a, std::size_t k);
/// All min(rows, cols) singular values, nonincreasing.
std::vector<double> singular_values(const ComplexMatrix &a);

inline constexpr double kLogDetFloor = 1e-30;

/// log(|det a|^2) by partial-pivot LU, clamped below at log(1e-30). Square, n <= 8.
double logdet_abs_sq(const ComplexMatrix &a);

/// sqrt(k - ||u^H w||_F^2) for orthonormal-column w, u.
double chordal_distance(const ComplexMatrix &w, const ComplexMatrix &u);

/// i.i.d. CN(0, variance) entries. Draws are consumed even when variance is zero,
/// so streams stay aligned across noise levels.
ComplexMatrix sample_complex_gaussian(std::size_t rows, std::size_t cols, double variance, Rng &rng);

struct LuResult {
    ComplexMatrix lu;
    std::vector<std::size_t> perm;
    int sign = 1;
    bool singular = false;
};

LuResult lu_decompose(const ComplexMatrix &a);
cplx determinant(const ComplexMatrix &a);
/// Solves a x = b for square a. Throws NearSingular when a pivot vanishes.
ComplexMatrix lu_solve(const ComplexMatrix &a, const ComplexMatrix &b);
ComplexMatrix inverse(const ComplexMatrix &a);

/// Least squares min ||a x - b|| via thin QR; throws DegenerateColumns on rank deficiency.
ComplexMatrix least_squares(const ComplexMatrix &a, const ComplexMatrix &b);

/// Scales every column to unit 2-norm (zero columns are left as is).
ComplexMatrix normalize_columns(ComplexMatrix a);

} // namespace pingpong
