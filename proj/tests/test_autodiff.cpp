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

#include <doctest.h>

#include <cmath>
#include <functional>

#include "pingpong/autodiff.hpp"
#include "pingpong/numerics.hpp"
#include "test_util.hpp"

using namespace pingpong;
using namespace pingpong::ad;
using testutil::to_eigen;

namespace {

struct Shape {
    std::size_t rows, cols;
};

using Builder = std::function<Tensor(Tape &, const std::vector<Tensor> &)>;

std::vector<double> gaussian(std::size_t n, Rng &rng, double offset = 0.0) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto &x : v)
        x = d(rng) + offset;
    return v;
}

// loss = sum(out .* weights) evaluated on fresh tapes.
double eval(const Builder &f, const std::vector<Shape> &shapes, const std::vector<std::vector<double>> &inputs,
            const std::vector<double> &weights, std::vector<std::vector<double>> *grads) {
    Tape tape;
    std::vector<Tensor> vars;
    for (std::size_t k = 0; k < shapes.size(); ++k)
        vars.push_back(tape.variable(shapes[k].rows, shapes[k].cols, inputs[k]));
    const Tensor out = f(tape, vars);
    REQUIRE(out.size() == weights.size());
    const Tensor loss = sum(mul(out, tape.constant(out.rows(), out.cols(), weights)));
    if (grads) {
        tape.backward(loss);
        grads->clear();
        for (const auto &v : vars)
            grads->emplace_back(v.grad().begin(), v.grad().end());
    }
    return loss.item();
}

// Worst relative error between the recorded pullbacks and central differences.
double fd_error(const Builder &f, const std::vector<Shape> &shapes, Rng &rng, double offset = 0.0,
                double step = 1e-5) {
    std::vector<std::vector<double>> inputs;
    for (const auto &s : shapes)
        inputs.push_back(gaussian(s.rows * s.cols, rng, offset));
    Tape probe_tape;
    std::vector<Tensor> probe_vars;
    for (std::size_t k = 0; k < shapes.size(); ++k)
        probe_vars.push_back(probe_tape.constant(shapes[k].rows, shapes[k].cols, inputs[k]));
    const Tensor out = f(probe_tape, probe_vars);
    const std::vector<double> weights = gaussian(out.size(), rng);

    std::vector<std::vector<double>> grads;
    eval(f, shapes, inputs, weights, &grads);
    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k)
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            auto plus = inputs, minus = inputs;
            plus[k][i] += step;
            minus[k][i] -= step;
            const double fd =
                (eval(f, shapes, plus, weights, nullptr) - eval(f, shapes, minus, weights, nullptr)) / (2 * step);
            const double a = grads[k][i];
            worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6}));
        }
    return worst;
}

} // namespace

TEST_CASE("sigmoid derivative at zero") {
    Tape tape;
    const Tensor x = tape.variable(1, 1, {0.0});
    tape.backward(sigmoid(x));
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("primitive pullbacks match central differences") {
    Rng rng(1);
    const double tol = 1e-5;
    SUBCASE("elementwise binary with broadcasting") {
        CHECK(fd_error([](Tape &, auto &v) { return add(v[0], v[1]); }, {{3, 4}, {1, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return sub(v[0], v[1]); }, {{3, 4}, {3, 1}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return mul(v[0], v[1]); }, {{3, 4}, {3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return mul(v[0], v[1]); }, {{1, 1}, {2, 5}}, rng) < tol);
    }
    SUBCASE("scalar ops") {
        CHECK(fd_error([](Tape &, auto &v) { return scale(v[0], -1.7); }, {{2, 3}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return add_scalar(v[0], 0.3); }, {{2, 3}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return neg(v[0]); }, {{2, 3}}, rng) < tol);
    }
    SUBCASE("matmul") {
        CHECK(fd_error([](Tape &, auto &v) { return matmul(v[0], v[1]); }, {{4, 3}, {3, 2}}, rng) < tol);
    }
    SUBCASE("structural") {
        CHECK(fd_error([](Tape &, auto &v) { return concat({v[0], v[1]}, 0); }, {{2, 3}, {1, 3}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return concat({v[0], v[1]}, 1); }, {{2, 3}, {2, 2}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return slice(v[0], 1, 2, 1, 3); }, {{4, 5}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return sum(v[0]); }, {{3, 3}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return rowsum(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return broadcast_rows(v[0], 3); }, {{1, 4}}, rng) < tol);
    }
    SUBCASE("unary") {
        CHECK(fd_error([](Tape &, auto &v) { return relu(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return sigmoid(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return ad::tanh(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return ad::sqrt(v[0]); }, {{3, 4}}, rng, 5.0) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return reciprocal(v[0]); }, {{3, 4}}, rng, 5.0) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return ad::log(v[0]); }, {{3, 4}}, rng, 5.0) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return ad::cos(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return ad::sin(v[0]); }, {{3, 4}}, rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return clamp_min(v[0], 0.1); }, {{3, 4}}, rng) < tol);
    }
    SUBCASE("batched matvec") {
        CHECK(fd_error([](Tape &, auto &v) { return batched_matvec(v[0], v[1], 3, 2, false); }, {{4, 6}, {4, 2}},
                       rng) < tol);
        CHECK(fd_error([](Tape &, auto &v) { return batched_matvec(v[0], v[1], 3, 2, true); }, {{4, 6}, {4, 3}},
                       rng) < tol);
    }
    SUBCASE("complex helpers") {
        CHECK(fd_error(
                  [](Tape &, auto &v) {
                      const CTensor c = complex_matmul(v[0], v[1], v[2], v[3]);
                      return concat({c.re, c.im}, 1);
                  },
                  {{3, 4}, {3, 4}, {4, 2}, {4, 2}}, rng) < tol);
        CHECK(fd_error(
                  [](Tape &, auto &v) {
                      const CTensor c = cbatched_matvec({v[0], v[1]}, {v[2], v[3]}, 2, 3, true);
                      return concat({c.re, c.im}, 1);
                  },
                  {{2, 6}, {2, 6}, {2, 2}, {2, 2}}, rng) < tol);
        CHECK(fd_error(
                  [](Tape &, auto &v) {
                      const CTensor c = cinner({v[0], v[1]}, {v[2], v[3]});
                      return concat({c.re, c.im, cnorm_sq({v[0], v[1]})}, 1);
                  },
                  {{2, 3}, {2, 3}, {2, 3}, {2, 3}}, rng) < tol);
        CHECK(fd_error(
                  [](Tape &, auto &v) {
                      const CTensor c = cexp_i(v[0]);
                      return concat({c.re, c.im}, 1);
                  },
                  {{2, 3}}, rng) < tol);
    }
}

TEST_CASE("gradient of sum of concat equals the concatenated gradients") {
    Tape tape;
    const Tensor a = tape.variable(2, 2, {1, 2, 3, 4}), b = tape.variable(1, 2, {5, 6});
    tape.backward(sum(concat({a, b}, 0)));
    for (double g : a.grad())
        CHECK(g == 1.0);
    for (double g : b.grad())
        CHECK(g == 1.0);
}

TEST_CASE("shape mismatches are reported") {
    Tape tape;
    const Tensor a = tape.variable(2, 3, std::vector<double>(6, 1.0)), b = tape.variable(2, 2, std::vector<double>(4, 1.0));
    CHECK_THROWS_AS(add(a, b), Error);
    CHECK_THROWS_AS(matmul(a, a), Error);
    CHECK_THROWS_AS(concat({a, b}, 0), Error);
}

TEST_CASE("leaf gradients accumulate across backward passes") {
    Tape tape;
    const Tensor x = tape.variable(1, 3, {1.0, -2.0, 0.5});
    const Tensor loss = sum(mul(x, x));
    tape.backward(loss);
    const std::vector<double> once(x.grad().begin(), x.grad().end());
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(x.grad()[i] == 2.0 * once[i]);
    tape.zero_grad();
    tape.backward(loss);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(x.grad()[i] == once[i]);
}

TEST_CASE("complex_matmul identities") {
    Tape tape;
    Rng rng(2);
    const std::vector<double> vr = gaussian(6, rng), vi = gaussian(6, rng);
    std::vector<double> eye(9, 0.0), zero(9, 0.0);
    eye[0] = eye[4] = eye[8] = 1.0;
    const CTensor c = complex_matmul(tape.constant(3, 3, eye), tape.constant(3, 3, zero), tape.constant(3, 2, vr),
                                     tape.constant(3, 2, vi));
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(c.re.value()[i] == vr[i]);
        CHECK(c.im.value()[i] == vi[i]);
    }
    const CTensor ii = complex_matmul(tape.constant(3, 3, zero), tape.constant(3, 3, eye), tape.constant(3, 3, zero),
                                      tape.constant(3, 3, eye));
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(ii.re.value()[i] == -eye[i]);
        CHECK(ii.im.value()[i] == 0.0);
    }
}

namespace {

// Batch of one M x N matrix as N column CTensors of shape 1 x M.
std::vector<CTensor> columns_of(Tape &tape, const ComplexMatrix &a) {
    std::vector<CTensor> cols;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        std::vector<double> re(a.rows()), im(a.rows());
        for (std::size_t r = 0; r < a.rows(); ++r) {
            re[r] = a(r, c).real();
            im[r] = a(r, c).imag();
        }
        cols.push_back({tape.variable(1, a.rows(), re), tape.variable(1, a.rows(), im)});
    }
    return cols;
}

ComplexMatrix matrix_of(const std::vector<CTensor> &cols) {
    ComplexMatrix a(cols[0].re.cols(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < a.rows(); ++r)
            a(r, c) = cplx(cols[c].re.value()[r], cols[c].im.value()[r]);
    return a;
}

} // namespace

TEST_CASE("differentiable Gram-Schmidt forward pass") {
    Rng rng(3);
    SUBCASE("orthonormal input is a fixed point") {
        const ComplexMatrix q = thin_qr(sample_complex_gaussian(8, 2, 1.0, rng)).q;
        Tape tape;
        CHECK(max_abs_diff(matrix_of(differentiable_gram_schmidt(columns_of(tape, q))), q) < 1e-10);
    }
    SUBCASE("matches thin_qr") {
        for (int t = 0; t < 10; ++t) {
            const ComplexMatrix a = sample_complex_gaussian(8, 2, 1.0, rng);
            Tape tape;
            CHECK(max_abs_diff(matrix_of(differentiable_gram_schmidt(columns_of(tape, a))), thin_qr(a).q) < 1e-9);
        }
    }
    SUBCASE("orthonormal output for moderately conditioned inputs") {
        for (double cond : {1e2, 1e4, 9e5}) {
            const ComplexMatrix u = thin_qr(sample_complex_gaussian(6, 3, 1.0, rng)).q;
            const ComplexMatrix v = thin_qr(sample_complex_gaussian(3, 3, 1.0, rng)).q;
            ComplexMatrix s(3, 3);
            s(0, 0) = 1.0;
            s(1, 1) = std::sqrt(cond);
            s(2, 2) = cond;
            Tape tape;
            const Eigen::MatrixXcd q = to_eigen(matrix_of(differentiable_gram_schmidt(columns_of(tape, u * s * v))));
            CHECK(testutil::max_abs(q.adjoint() * q - Eigen::MatrixXcd::Identity(3, 3)) < 1e-9);
        }
    }
    SUBCASE("dependent columns") {
        ComplexMatrix a(4, 2);
        for (std::size_t r = 0; r < 4; ++r)
            a(r, 0) = a(r, 1) = cplx(double(r), 1.0);
        Tape tape;
        try {
            differentiable_gram_schmidt(columns_of(tape, a));
            FAIL("expected DegenerateColumns");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::DegenerateColumns);
        }
    }
}

TEST_CASE("differentiable Gram-Schmidt gradient") {
    Rng rng(4);
    const double err = fd_error(
        [](Tape &, auto &v) {
            const auto q = differentiable_gram_schmidt({{v[0], v[1]}, {v[2], v[3]}});
            return concat({q[0].re, q[0].im, q[1].re, q[1].im}, 1);
        },
        {{3, 8}, {3, 8}, {3, 8}, {3, 8}}, rng);
    CHECK(err < 1e-4);
}

TEST_CASE("logdet_abs_sq_diff values") {
    Tape tape;
    CHECK(logdet_abs_sq_diff(tape.constant(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), tape.constant(3, 3, 0.0)).item() ==
          doctest::Approx(0.0));
    CHECK(logdet_abs_sq_diff(tape.constant(2, 2, {2, 0, 0, 0}), tape.constant(2, 2, {0, 0, 0, 1})).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        const ComplexMatrix a = sample_complex_gaussian(4, 4, 1.0, rng);
        std::vector<double> re, im;
        for (const auto &x : a.data()) {
            re.push_back(x.real());
            im.push_back(x.imag());
        }
        Tape tp;
        CHECK(std::abs(logdet_abs_sq_diff(tp.constant(4, 4, re), tp.constant(4, 4, im)).item() - logdet_abs_sq(a)) <
              1e-10);
    }
}

TEST_CASE("logdet_abs_sq_diff gradient equals 2 Re tr(A^-1 dA)") {
    Rng rng(6);
    for (std::size_t n : {2u, 3u, 4u}) {
        const ComplexMatrix a = sample_complex_gaussian(n, n, 1.0, rng);
        std::vector<double> re, im;
        for (const auto &x : a.data()) {
            re.push_back(x.real());
            im.push_back(x.imag());
        }
        Tape tape;
        const Tensor ar = tape.variable(n, n, re), ai = tape.variable(n, n, im);
        tape.backward(logdet_abs_sq_diff(ar, ai));
        const Eigen::MatrixXcd inv = to_eigen(a).inverse();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(std::abs(ar.grad()[i * n + j] - 2.0 * inv(j, i).real()) < 1e-9);
                CHECK(std::abs(ai.grad()[i * n + j] + 2.0 * inv(j, i).imag()) < 1e-9);
            }
    }
}

TEST_CASE("adam") {
    SUBCASE("first step moves by lr against the gradient sign") {
        Parameter p("p", 1, 3);
        p.value = {0.0, 1.0, -1.0};
        p.grad = {2.0, -0.5, 1e-3};
        AdamState s;
        Parameter *ps[] = {&p};
        adam_step(ps, s);
        CHECK(p.value[0] == doctest::Approx(-1e-3).epsilon(1e-6));
        CHECK(p.value[1] == doctest::Approx(1.0 + 1e-3).epsilon(1e-6));
        CHECK(p.value[2] == doctest::Approx(-1.0 - 1e-3).epsilon(1e-4));
    }
    SUBCASE("zero gradients leave parameters unchanged") {
        Parameter p("p", 2, 2);
        p.value = {1, 2, 3, 4};
        AdamState s;
        Parameter *ps[] = {&p};
        for (int i = 0; i < 50; ++i)
            adam_step(ps, s);
        CHECK(p.value == std::vector<double>{1, 2, 3, 4});
    }
    SUBCASE("minimizes a quadratic") {
        Parameter p("x", 1, 1);
        p.value = {3.0};
        AdamState s;
        s.lr = 0.05;
        Parameter *ps[] = {&p};
        const double start = (p.value[0] - 1.0) * (p.value[0] - 1.0);
        for (int i = 0; i < 200; ++i) {
            p.grad = {2.0 * (p.value[0] - 1.0)};
            adam_step(ps, s);
        }
        CHECK((p.value[0] - 1.0) * (p.value[0] - 1.0) < 0.01 * start);
    }
}

TEST_CASE("grad_check") {
    Parameter w("w", 2, 3);
    Rng rng(7);
    w.value = gaussian(6, rng);
    const std::vector<double> c = gaussian(6, rng);
    Parameter *ps[] = {&w};
    auto linear = [&](bool with_grad) {
        Tape tape;
        const Tensor loss = sum(mul(tape.param(w), tape.constant(2, 3, c)));
        if (with_grad) {
            w.zero_grad();
            tape.backward(loss);
            tape.flush_param_grads();
        }
        return loss.item();
    };
    CHECK(grad_check(linear, ps).max_rel_error < 1e-9);

    auto cubic = [&](bool with_grad) {
        Tape tape;
        const Tensor x = tape.param(w);
        const Tensor loss = sum(mul(mul(x, x), matmul(x, tape.constant(3, 3, 0.5))));
        if (with_grad) {
            w.zero_grad();
            tape.backward(loss);
            tape.flush_param_grads();
        }
        return loss.item();
    };
    CHECK(grad_check(cubic, ps).max_rel_error < 1e-6);
    set_fault_injection("mul", 1.5);
    const double faulty = grad_check(cubic, ps).max_rel_error;
    set_fault_injection("");
    CHECK(faulty > 1e-2);
}
