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

// Reverse-mode differentiation over 2-D real tensors recorded on a tape.
//
// Complex quantities are carried as (re, im) pairs of real tensors. Batched
// computations put one episode per row, so a batch of complex M-vectors is a
// CTensor of two (B x M) tensors.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pingpong/errors.hpp"
#include "pingpong/rng.hpp"

namespace pingpong::ad {

/// Trainable array that outlives any tape.
struct Parameter {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter() = default;
    Parameter(std::string n, std::size_t r, std::size_t c)
        : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tape *tape, std::size_t index) : tape_(tape), index_(index) {}

    Tape *tape() const { return tape_; }
    std::size_t index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t size() const { return rows() * cols(); }
    std::span<const double> value() const;
    std::span<const double> grad() const;
    double item() const; // value of a 1x1 tensor
    double at(std::size_t r, std::size_t c) const { return value()[r * cols() + c]; }
    bool requires_grad() const;

private:
    Tape *tape_ = nullptr;
    std::size_t index_ = 0;
};

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = false;
    Parameter *param = nullptr;
    // Propagates this node's grad into its parents' grads.
    std::function<void(Tape &, std::size_t)> backward;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape &) = delete;
    Tape &operator=(const Tape &) = delete;

    Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
    Tensor constant(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Leaf whose gradient is retained across backward passes.
    Tensor variable(std::size_t rows, std::size_t cols, std::vector<double> values);
    /// Leaf bound to a parameter; its gradient is added to `p.grad` by flush_param_grads().
    /// With track == false the parameter enters as a constant.
    Tensor param(Parameter &p, bool track = true);

    /// Seeds d(loss)/d(loss) = 1 and runs every pullback in reverse recording order.
    /// Interior gradients are recomputed from scratch; leaf gradients accumulate.
    void backward(const Tensor &loss);
    void zero_grad();
    /// Adds every parameter leaf gradient (times `scale`) into its Parameter::grad.
    void flush_param_grads(double scale = 1.0);

    std::size_t size() const { return nodes_.size(); }
    Node &node(std::size_t i) { return nodes_[i]; }
    const Node &node(std::size_t i) const { return nodes_[i]; }
    /// Grad buffer of node i, allocated on first use.
    std::vector<double> &grad_of(std::size_t i);

    Tensor push(Node n);

private:
    std::vector<Node> nodes_;
};

// Fault injection for testing the gradient checker: multiplies the pullback of
// the named primitive by `factor`. Empty name disables it.
void set_fault_injection(const std::string &op, double factor = 1.5);
double fault_factor(const char *op);

// ---- primitives ------------------------------------------------------------
// Binary elementwise ops broadcast along any dimension of size 1.
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double s);
Tensor neg(const Tensor &a);
Tensor add_scalar(const Tensor &a, double s);
Tensor matmul(const Tensor &a, const Tensor &b);
/// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(const std::vector<Tensor> &parts, int axis);
Tensor slice(const Tensor &a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols);
Tensor relu(const Tensor &a);
Tensor sigmoid(const Tensor &a);
Tensor tanh(const Tensor &a);
Tensor sqrt(const Tensor &a);
Tensor reciprocal(const Tensor &a);
Tensor log(const Tensor &a);
Tensor cos(const Tensor &a);
Tensor sin(const Tensor &a);
/// max(a, floor) elementwise; the gradient is zero where the floor is active.
Tensor clamp_min(const Tensor &a, double floor);
/// Sum of all entries, 1x1.
Tensor sum(const Tensor &a);
/// Per-row sum, B x 1.
Tensor rowsum(const Tensor &a);
/// Repeats a 1 x n tensor into rows x n.
Tensor broadcast_rows(const Tensor &a, std::size_t rows);
/// Row-batched matrix-vector product: row b of `mats` holds an m x n matrix in
/// row-major order; returns y_b = A_b x_b (B x m), or A_b^T x_b (B x n) when transposed.
Tensor batched_matvec(const Tensor &mats, const Tensor &x, std::size_t m, std::size_t n, bool transposed);

// ---- complex helpers -------------------------------------------------------
struct CTensor {
    Tensor re;
    Tensor im;
};

CTensor cadd(const CTensor &a, const CTensor &b);
CTensor csub(const CTensor &a, const CTensor &b);
CTensor cmul(const CTensor &a, const CTensor &b); // elementwise, broadcasting
/// (a_re + i a_im)(b_re + i b_im) as real matrix products.
CTensor complex_matmul(const Tensor &a_re, const Tensor &a_im, const Tensor &b_re, const Tensor &b_im);
/// Row-batched complex matvec; `adjoint` applies A_b^H instead of A_b.
CTensor cbatched_matvec(const CTensor &mats, const CTensor &x, std::size_t m, std::size_t n, bool adjoint);
/// Per-row sum(conj(a) * b), B x 1.
CTensor cinner(const CTensor &a, const CTensor &b);
/// Per-row squared 2-norm, B x 1.
Tensor cnorm_sq(const CTensor &a);
/// Unit-modulus entries exp(i*theta).
CTensor cexp_i(const Tensor &theta);

/// Modified Gram-Schmidt over the columns of a batch of M x N matrices, given as
/// N column CTensors of shape B x M. Arithmetic matches numerics::thin_qr.
/// Throws DegenerateColumns when any pivot norm is below `pivot_tol`.
std::vector<CTensor> differentiable_gram_schmidt(const std::vector<CTensor> &columns, double pivot_tol = 1e-8);

/// Complex determinant of an n x n batch (n <= 4) by cofactor expansion;
/// entries[i][j] are B x 1 complex scalars.
CTensor cdeterminant(const std::vector<std::vector<CTensor>> &entries);
/// log(|det|^2) with the argument floored at 1e-30; B x 1.
Tensor logdet_abs_sq_diff(const std::vector<std::vector<CTensor>> &entries);
/// Single-matrix form used by tests: a_re, a_im are n x n.
Tensor logdet_abs_sq_diff(const Tensor &a_re, const Tensor &a_im);

// ---- optimizer ---------------------------------------------------------------
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

/// Bias-corrected Adam update of every parameter from its grad.
void adam_step(std::span<Parameter *const> params, AdamState &state);

// ---- gradient checking -----------------------------------------------------
/// Evaluates the scalar loss at the current parameter values. When `with_grad`
/// is set it must also leave d(loss)/d(param) in each Parameter::grad (zeroed first).
using LossFn = std::function<double(bool with_grad)>;

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t max_coords = 200; // coordinates sampled when the parameter set is larger
    std::uint64_t seed = 7;
    double abs_floor = 1e-6;      // denominator floor for near-zero gradients
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst_param;
};

GradCheckReport grad_check(const LossFn &loss, std::span<Parameter *const> params, GradCheckOptions opt = {});

} // namespace pingpong::ad
