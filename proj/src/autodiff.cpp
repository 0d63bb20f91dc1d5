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

#include "pingpong/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pingpong::ad {

namespace {

std::string g_fault_op;
double g_fault_factor = 1.0;

std::string shape_str(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

Tape &same_tape(const Tensor &a, const Tensor &b) {
    if (!a.valid() || !b.valid() || a.tape() != b.tape())
        throw Error(ErrorCode::ShapeMismatch, "tensors live on different tapes");
    return *a.tape();
}

// Creates a node whose requires_grad is inherited from the given parents.
Node make_node(Tape &t, std::size_t rows, std::size_t cols, std::initializer_list<std::size_t> parents) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value.assign(rows * cols, 0.0);
    for (auto p : parents)
        n.requires_grad = n.requires_grad || t.node(p).requires_grad;
    return n;
}

// Unary elementwise op: forward f(x), pullback g * df(x, y).
template <class F, class D>
Tensor unary(const Tensor &a, const char *name, F f, D df) {
    Tape &t = *a.tape();
    const std::size_t ai = a.index();
    Node n = make_node(t, t.node(ai).rows, t.node(ai).cols, {ai});
    const auto &x = t.node(ai).value;
    for (std::size_t i = 0; i < x.size(); ++i)
        n.value[i] = f(x[i]);
    if (n.requires_grad)
        n.backward = [ai, name, df](Tape &tp, std::size_t self) {
            const double k = fault_factor(name);
            const Node &s = tp.node(self);
            auto &ga = tp.grad_of(ai);
            const auto &xv = tp.node(ai).value;
            for (std::size_t i = 0; i < s.grad.size(); ++i)
                ga[i] += k * s.grad[i] * df(xv[i], s.value[i]);
        };
    return t.push(std::move(n));
}

enum class BinOp { Add, Sub, Mul };

Tensor binary(const Tensor &a, const Tensor &b, BinOp op) {
    Tape &t = same_tape(a, b);
    const std::size_t ai = a.index(), bi = b.index();
    const std::size_t ar = t.node(ai).rows, ac = t.node(ai).cols;
    const std::size_t br = t.node(bi).rows, bc = t.node(bi).cols;
    if ((ar != br && ar != 1 && br != 1) || (ac != bc && ac != 1 && bc != 1))
        throw Error(ErrorCode::ShapeMismatch, "broadcast " + shape_str(ar, ac) + " with " + shape_str(br, bc));
    const std::size_t R = std::max(ar, br), C = std::max(ac, bc);
    Node n = make_node(t, R, C, {ai, bi});
    const auto &av = t.node(ai).value;
    const auto &bv = t.node(bi).value;
    const bool same = ar == br && ac == bc;
    auto ia = [ar, ac](std::size_t r, std::size_t c) { return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c); };
    auto ib = [br, bc](std::size_t r, std::size_t c) { return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c); };
    if (same) {
        for (std::size_t i = 0; i < av.size(); ++i)
            n.value[i] = op == BinOp::Add ? av[i] + bv[i] : op == BinOp::Sub ? av[i] - bv[i] : av[i] * bv[i];
    } else {
        for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
                const double x = av[ia(r, c)], y = bv[ib(r, c)];
                n.value[r * C + c] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
            }
    }
    if (n.requires_grad)
        n.backward = [=](Tape &tp, std::size_t self) {
            const char *name = op == BinOp::Add ? "add" : op == BinOp::Sub ? "sub" : "mul";
            const double k = fault_factor(name);
            const Node &s = tp.node(self);
            const bool need_a = tp.node(ai).requires_grad, need_b = tp.node(bi).requires_grad;
            std::vector<double> *ga = need_a ? &tp.grad_of(ai) : nullptr;
            std::vector<double> *gb = need_b ? &tp.grad_of(bi) : nullptr;
            const auto &avv = tp.node(ai).value;
            const auto &bvv = tp.node(bi).value;
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                    const double g = k * s.grad[r * C + c];
                    const std::size_t xa = ia(r, c), xb = ib(r, c);
                    switch (op) {
                    case BinOp::Add:
                        if (ga) (*ga)[xa] += g;
                        if (gb) (*gb)[xb] += g;
                        break;
                    case BinOp::Sub:
                        if (ga) (*ga)[xa] += g;
                        if (gb) (*gb)[xb] -= g;
                        break;
                    case BinOp::Mul:
                        if (ga) (*ga)[xa] += g * bvv[xb];
                        if (gb) (*gb)[xb] += g * avv[xa];
                        break;
                    }
                }
        };
    return t.push(std::move(n));
}

using v2d = double __attribute__((vector_size(16)));

// C (n x m) += A (n x t) * B (t x m), row-major. Each C entry sums its products in
// increasing index order.
__attribute__((target_clones("avx2", "default"))) void gemm_acc(double *C, const double *A, const double *B, std::size_t n, std::size_t t, std::size_t m) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double *a0 = A + i * t, *a1 = a0 + t, *a2 = a1 + t, *a3 = a2 + t;
        double *c0 = C + i * m, *c1 = c0 + m, *c2 = c1 + m, *c3 = c2 + m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            v2d x0, y0, x1, y1, x2, y2, x3, y3;
            __builtin_memcpy(&x0, c0 + j, 16), __builtin_memcpy(&y0, c0 + j + 2, 16);
            __builtin_memcpy(&x1, c1 + j, 16), __builtin_memcpy(&y1, c1 + j + 2, 16);
            __builtin_memcpy(&x2, c2 + j, 16), __builtin_memcpy(&y2, c2 + j + 2, 16);
            __builtin_memcpy(&x3, c3 + j, 16), __builtin_memcpy(&y3, c3 + j + 2, 16);
            const double *b = B + j;
            for (std::size_t k = 0; k < t; ++k, b += m) {
                v2d bl, bh;
                __builtin_memcpy(&bl, b, 16);
                __builtin_memcpy(&bh, b + 2, 16);
                const v2d s0 = {a0[k], a0[k]}, s1 = {a1[k], a1[k]}, s2 = {a2[k], a2[k]}, s3 = {a3[k], a3[k]};
                x0 += s0 * bl, y0 += s0 * bh;
                x1 += s1 * bl, y1 += s1 * bh;
                x2 += s2 * bl, y2 += s2 * bh;
                x3 += s3 * bl, y3 += s3 * bh;
            }
            __builtin_memcpy(c0 + j, &x0, 16), __builtin_memcpy(c0 + j + 2, &y0, 16);
            __builtin_memcpy(c1 + j, &x1, 16), __builtin_memcpy(c1 + j + 2, &y1, 16);
            __builtin_memcpy(c2 + j, &x2, 16), __builtin_memcpy(c2 + j + 2, &y2, 16);
            __builtin_memcpy(c3 + j, &x3, 16), __builtin_memcpy(c3 + j + 2, &y3, 16);
        }
        for (; j < m; ++j)
            for (std::size_t r = 0; r < 4; ++r) {
                const double *a = A + (i + r) * t;
                double acc = C[(i + r) * m + j];
                for (std::size_t k = 0; k < t; ++k)
                    acc += a[k] * B[k * m + j];
                C[(i + r) * m + j] = acc;
            }
    }
    for (; i < n; ++i) {
        const double *a = A + i * t;
        double *c = C + i * m;
        for (std::size_t k = 0; k < t; ++k) {
            const double aik = a[k];
            const double *b = B + k * m;
            for (std::size_t j = 0; j < m; ++j)
                c[j] += aik * b[j];
        }
    }
}

std::vector<double> transposed(const double *x, std::size_t rows, std::size_t cols, double scale = 1.0) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[c * rows + r] = scale == 1.0 ? x[r * cols + c] : scale * x[r * cols + c];
    return out;
}

} // namespace

void set_fault_injection(const std::string &op, double factor) {
    g_fault_op = op;
    g_fault_factor = factor;
}

double fault_factor(const char *op) {
    if (g_fault_op.empty() || g_fault_op != op)
        return 1.0;
    return g_fault_factor;
}

// ---- Tensor / Tape -----------------------------------------------------------

std::size_t Tensor::rows() const { return tape_->node(index_).rows; }
std::size_t Tensor::cols() const { return tape_->node(index_).cols; }
std::span<const double> Tensor::value() const { return tape_->node(index_).value; }
std::span<const double> Tensor::grad() const { return tape_->node(index_).grad; }
bool Tensor::requires_grad() const { return tape_->node(index_).requires_grad; }

double Tensor::item() const {
    if (size() != 1)
        throw Error(ErrorCode::ShapeMismatch, "item() on " + shape_str(rows(), cols()));
    return value()[0];
}

Tensor Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
        throw Error(ErrorCode::ShapeMismatch, "constant value count");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.value = std::move(values);
    n.leaf = true;
    return push(std::move(n));
}

Tensor Tape::constant(std::size_t rows, std::size_t cols, double fill) {
    return constant(rows, cols, std::vector<double>(rows * cols, fill));
}

Tensor Tape::variable(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Tensor t = constant(rows, cols, std::move(values));
    nodes_[t.index()].requires_grad = true;
    return t;
}

Tensor Tape::param(Parameter &p, bool track) {
    Tensor t = constant(p.rows, p.cols, p.value);
    if (track) {
        nodes_[t.index()].requires_grad = true;
        nodes_[t.index()].param = &p;
    }
    return t;
}

std::vector<double> &Tape::grad_of(std::size_t i) {
    Node &n = nodes_[i];
    if (n.grad.size() != n.value.size())
        n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::backward(const Tensor &loss) {
    if (loss.tape() != this)
        throw Error(ErrorCode::ShapeMismatch, "loss tensor from another tape");
    if (loss.size() != 1)
        throw Error(ErrorCode::ShapeMismatch, "backward needs a scalar loss");
    for (auto &n : nodes_)
        if (!n.leaf && !n.grad.empty())
            std::fill(n.grad.begin(), n.grad.end(), 0.0);
    grad_of(loss.index())[0] += 1.0;
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
        Node &n = nodes_[i];
        if (n.backward && n.requires_grad && !n.grad.empty())
            n.backward(*this, i);
    }
}

void Tape::zero_grad() {
    for (auto &n : nodes_)
        std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tape::flush_param_grads(double scale) {
    for (auto &n : nodes_) {
        if (!n.param || n.grad.empty())
            continue;
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            n.param->grad[i] += scale * n.grad[i];
    }
}

// ---- primitives ----------------------------------------------------------------

Tensor add(const Tensor &a, const Tensor &b) { return binary(a, b, BinOp::Add); }
Tensor sub(const Tensor &a, const Tensor &b) { return binary(a, b, BinOp::Sub); }
Tensor mul(const Tensor &a, const Tensor &b) { return binary(a, b, BinOp::Mul); }

Tensor scale(const Tensor &a, double s) {
    return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor &a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor &a, double s) {
    return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor &a, const Tensor &b) {
    Tape &t = same_tape(a, b);
    const std::size_t ai = a.index(), bi = b.index();
    const std::size_t n = t.node(ai).rows, k = t.node(ai).cols, p = t.node(bi).cols;
    if (t.node(bi).rows != k)
        throw Error(ErrorCode::ShapeMismatch,
                    "matmul " + shape_str(n, k) + " by " + shape_str(t.node(bi).rows, p));
    Node out = make_node(t, n, p, {ai, bi});
    const double *A = t.node(ai).value.data();
    const double *B = t.node(bi).value.data();
    gemm_acc(out.value.data(), A, B, n, k, p);
    if (out.requires_grad)
        out.backward = [ai, bi, n, k, p](Tape &tp, std::size_t self) {
            const double f = fault_factor("matmul");
            const double *G = tp.node(self).grad.data();
            const double *Av = tp.node(ai).value.data();
            const double *Bv = tp.node(bi).value.data();
            std::vector<double> scaled;
            if (f != 1.0) {
                scaled.assign(G, G + n * p);
                for (auto &g : scaled)
                    g *= f;
                G = scaled.data();
            }
            if (tp.node(ai).requires_grad) // GA += G B^T
                gemm_acc(tp.grad_of(ai).data(), G, transposed(Bv, k, p).data(), n, p, k);
            if (tp.node(bi).requires_grad) // GB += A^T G
                gemm_acc(tp.grad_of(bi).data(), transposed(Av, n, k).data(), G, k, n, p);
        };
    return t.push(std::move(out));
}

Tensor concat(const std::vector<Tensor> &parts, int axis) {
    if (parts.empty())
        throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
    Tape &t = *parts.front().tape();
    std::vector<std::size_t> idx;
    std::size_t R = 0, C = 0;
    for (const auto &p : parts) {
        if (p.tape() != &t)
            throw Error(ErrorCode::ShapeMismatch, "concat across tapes");
        idx.push_back(p.index());
        if (axis == 1) {
            if (R && p.rows() != R)
                throw Error(ErrorCode::ShapeMismatch, "concat cols: row counts differ");
            R = p.rows();
            C += p.cols();
        } else {
            if (C && p.cols() != C)
                throw Error(ErrorCode::ShapeMismatch, "concat rows: col counts differ");
            C = p.cols();
            R += p.rows();
        }
    }
    Node n;
    n.rows = R;
    n.cols = C;
    n.value.assign(R * C, 0.0);
    for (auto i : idx)
        n.requires_grad = n.requires_grad || t.node(i).requires_grad;
    std::size_t offset = 0;
    for (auto i : idx) {
        const Node &p = t.node(i);
        for (std::size_t r = 0; r < p.rows; ++r)
            for (std::size_t c = 0; c < p.cols; ++c) {
                if (axis == 1)
                    n.value[r * C + offset + c] = p.value[r * p.cols + c];
                else
                    n.value[(offset + r) * C + c] = p.value[r * p.cols + c];
            }
        offset += axis == 1 ? p.cols : p.rows;
    }
    if (n.requires_grad)
        n.backward = [idx, axis, C](Tape &tp, std::size_t self) {
            const double f = fault_factor("concat");
            const auto &g = tp.node(self).grad;
            std::size_t off = 0;
            for (auto i : idx) {
                const std::size_t pr = tp.node(i).rows, pc = tp.node(i).cols;
                if (tp.node(i).requires_grad) {
                    auto &gp = tp.grad_of(i);
                    for (std::size_t r = 0; r < pr; ++r)
                        for (std::size_t c = 0; c < pc; ++c)
                            gp[r * pc + c] += f * (axis == 1 ? g[r * C + off + c] : g[(off + r) * C + c]);
                }
                off += axis == 1 ? pc : pr;
            }
        };
    return t.push(std::move(n));
}

Tensor slice(const Tensor &a, std::size_t row0, std::size_t nrows, std::size_t col0, std::size_t ncols) {
    Tape &t = *a.tape();
    const std::size_t ai = a.index();
    const std::size_t ar = t.node(ai).rows, ac = t.node(ai).cols;
    if (row0 + nrows > ar || col0 + ncols > ac)
        throw Error(ErrorCode::ShapeMismatch, "slice out of range of " + shape_str(ar, ac));
    Node n = make_node(t, nrows, ncols, {ai});
    const auto &v = t.node(ai).value;
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t c = 0; c < ncols; ++c)
            n.value[r * ncols + c] = v[(row0 + r) * ac + col0 + c];
    if (n.requires_grad)
        n.backward = [=](Tape &tp, std::size_t self) {
            const double f = fault_factor("slice");
            const auto &g = tp.node(self).grad;
            auto &ga = tp.grad_of(ai);
            for (std::size_t r = 0; r < nrows; ++r)
                for (std::size_t c = 0; c < ncols; ++c)
                    ga[(row0 + r) * ac + col0 + c] += f * g[r * ncols + c];
        };
    return t.push(std::move(n));
}

Tensor relu(const Tensor &a) {
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor &a) {
    return unary(a, "sigmoid",
                 [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor &a) {
    return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sqrt(const Tensor &a) {
    return unary(a, "sqrt", [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor reciprocal(const Tensor &a) {
    return unary(a, "reciprocal", [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Tensor log(const Tensor &a) {
    return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor cos(const Tensor &a) {
    return unary(a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Tensor sin(const Tensor &a) {
    return unary(a, "sin", [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Tensor clamp_min(const Tensor &a, double floor) {
    return unary(a, "clamp_min", [floor](double x) { return x > floor ? x : floor; },
                 [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor sum(const Tensor &a) {
    Tape &t = *a.tape();
    const std::size_t ai = a.index();
    Node n = make_node(t, 1, 1, {ai});
    double s = 0.0;
    for (double x : t.node(ai).value)
        s += x;
    n.value[0] = s;
    if (n.requires_grad)
        n.backward = [ai](Tape &tp, std::size_t self) {
            const double g = fault_factor("sum") * tp.node(self).grad[0];
            for (auto &x : tp.grad_of(ai))
                x += g;
        };
    return t.push(std::move(n));
}

Tensor rowsum(const Tensor &a) {
    Tape &t = *a.tape();
    const std::size_t ai = a.index();
    const std::size_t R = t.node(ai).rows, C = t.node(ai).cols;
    Node n = make_node(t, R, 1, {ai});
    const auto &v = t.node(ai).value;
    for (std::size_t r = 0; r < R; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < C; ++c)
            s += v[r * C + c];
        n.value[r] = s;
    }
    if (n.requires_grad)
        n.backward = [ai, R, C](Tape &tp, std::size_t self) {
            const double f = fault_factor("rowsum");
            const auto &g = tp.node(self).grad;
            auto &ga = tp.grad_of(ai);
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < C; ++c)
                    ga[r * C + c] += f * g[r];
        };
    return t.push(std::move(n));
}

Tensor broadcast_rows(const Tensor &a, std::size_t rows) {
    if (a.rows() != 1)
        throw Error(ErrorCode::ShapeMismatch, "broadcast_rows needs a single row");
    Tape &t = *a.tape();
    const std::size_t ai = a.index();
    const std::size_t C = t.node(ai).cols;
    Node n = make_node(t, rows, C, {ai});
    const auto &v = t.node(ai).value;
    for (std::size_t r = 0; r < rows; ++r)
        std::copy(v.begin(), v.end(), n.value.begin() + static_cast<std::ptrdiff_t>(r * C));
    if (n.requires_grad)
        n.backward = [ai, rows, C](Tape &tp, std::size_t self) {
            const double f = fault_factor("broadcast_rows");
            const auto &g = tp.node(self).grad;
            auto &ga = tp.grad_of(ai);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < C; ++c)
                    ga[c] += f * g[r * C + c];
        };
    return t.push(std::move(n));
}

Tensor batched_matvec(const Tensor &mats, const Tensor &x, std::size_t m, std::size_t n, bool transposed) {
    Tape &t = same_tape(mats, x);
    const std::size_t ai = mats.index(), xi = x.index();
    const std::size_t B = t.node(ai).rows;
    const std::size_t in = transposed ? m : n, out = transposed ? n : m;
    if (t.node(ai).cols != m * n || t.node(xi).rows != B || t.node(xi).cols != in)
        throw Error(ErrorCode::ShapeMismatch, "batched_matvec: mats " + shape_str(B, t.node(ai).cols) + ", x " +
                                                  shape_str(t.node(xi).rows, t.node(xi).cols));
    Node node = make_node(t, B, out, {ai, xi});
    const double *A = t.node(ai).value.data();
    const double *X = t.node(xi).value.data();
    for (std::size_t b = 0; b < B; ++b) {
        const double *Ab = A + b * m * n;
        const double *xb = X + b * in;
        double *yb = node.value.data() + b * out;
        if (!transposed) {
            for (std::size_t i = 0; i < m; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += Ab[i * n + j] * xb[j];
                yb[i] = s;
            }
        } else {
            for (std::size_t i = 0; i < m; ++i) {
                const double xv = xb[i];
                for (std::size_t j = 0; j < n; ++j)
                    yb[j] += Ab[i * n + j] * xv;
            }
        }
    }
    if (node.requires_grad)
        node.backward = [=](Tape &tp, std::size_t self) {
            const double f = fault_factor("batched_matvec");
            const double *G = tp.node(self).grad.data();
            const double *Av = tp.node(ai).value.data();
            const double *Xv = tp.node(xi).value.data();
            double *GA = tp.node(ai).requires_grad ? tp.grad_of(ai).data() : nullptr;
            double *GX = tp.node(xi).requires_grad ? tp.grad_of(xi).data() : nullptr;
            for (std::size_t b = 0; b < B; ++b) {
                const double *Ab = Av + b * m * n;
                const double *xb = Xv + b * in;
                const double *gb = G + b * out;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        // forward: y_i += A_ij x_j, or y_j += A_ij x_i when transposed
                        const double gy = f * (transposed ? gb[j] : gb[i]);
                        const double xv = transposed ? xb[i] : xb[j];
                        if (GA)
                            GA[b * m * n + i * n + j] += gy * xv;
                        if (GX)
                            GX[b * in + (transposed ? i : j)] += gy * Ab[i * n + j];
                    }
            }
        };
    return t.push(std::move(node));
}

// ---- complex helpers -------------------------------------------------------------

CTensor cadd(const CTensor &a, const CTensor &b) { return {add(a.re, b.re), add(a.im, b.im)}; }
CTensor csub(const CTensor &a, const CTensor &b) { return {sub(a.re, b.re), sub(a.im, b.im)}; }

CTensor cmul(const CTensor &a, const CTensor &b) {
    return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
}

CTensor complex_matmul(const Tensor &a_re, const Tensor &a_im, const Tensor &b_re, const Tensor &b_im) {
    return {sub(matmul(a_re, b_re), matmul(a_im, b_im)), add(matmul(a_re, b_im), matmul(a_im, b_re))};
}

CTensor cbatched_matvec(const CTensor &mats, const CTensor &x, std::size_t m, std::size_t n, bool adjoint) {
    if (!adjoint)
        return {sub(batched_matvec(mats.re, x.re, m, n, false), batched_matvec(mats.im, x.im, m, n, false)),
                add(batched_matvec(mats.re, x.im, m, n, false), batched_matvec(mats.im, x.re, m, n, false))};
    return {add(batched_matvec(mats.re, x.re, m, n, true), batched_matvec(mats.im, x.im, m, n, true)),
            sub(batched_matvec(mats.re, x.im, m, n, true), batched_matvec(mats.im, x.re, m, n, true))};
}

CTensor cinner(const CTensor &a, const CTensor &b) {
    return {add(rowsum(mul(a.re, b.re)), rowsum(mul(a.im, b.im))),
            sub(rowsum(mul(a.re, b.im)), rowsum(mul(a.im, b.re)))};
}

Tensor cnorm_sq(const CTensor &a) { return add(rowsum(mul(a.re, a.re)), rowsum(mul(a.im, a.im))); }

CTensor cexp_i(const Tensor &theta) { return {cos(theta), sin(theta)}; }

std::vector<CTensor> differentiable_gram_schmidt(const std::vector<CTensor> &columns, double pivot_tol) {
    std::vector<CTensor> q;
    q.reserve(columns.size());
    if (!columns.empty() && columns.front().re.cols() < columns.size())
        throw Error(ErrorCode::ShapeMismatch, "Gram-Schmidt needs rows >= cols");
    for (std::size_t j = 0; j < columns.size(); ++j) {
        Tensor vr = columns[j].re, vi = columns[j].im;
        for (std::size_t k = 0; k < j; ++k) {
            const CTensor r = cinner(q[k], {vr, vi});
            const Tensor tr = sub(mul(q[k].re, r.re), mul(q[k].im, r.im));
            const Tensor ti = add(mul(q[k].im, r.re), mul(q[k].re, r.im));
            vr = sub(vr, tr);
            vi = sub(vi, ti);
        }
        const Tensor nrm = sqrt(add(rowsum(mul(vr, vr)), rowsum(mul(vi, vi))));
        for (double v : nrm.value())
            if (!(v >= pivot_tol))
                throw Error(ErrorCode::DegenerateColumns,
                            "pivot norm " + std::to_string(v) + " at column " + std::to_string(j));
        const Tensor inv = reciprocal(nrm);
        q.push_back({mul(vr, inv), mul(vi, inv)});
    }
    return q;
}

CTensor cdeterminant(const std::vector<std::vector<CTensor>> &e) {
    const std::size_t n = e.size();
    if (n == 0 || n > 4)
        throw Error(ErrorCode::DimensionMismatch, "cofactor determinant supports 1 <= n <= 4");
    for (const auto &row : e)
        if (row.size() != n)
            throw Error(ErrorCode::ShapeMismatch, "determinant needs a square matrix");
    if (n == 1)
        return e[0][0];
    if (n == 2)
        return csub(cmul(e[0][0], e[1][1]), cmul(e[0][1], e[1][0]));
    CTensor acc;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<std::vector<CTensor>> minor(n - 1);
        for (std::size_t r = 1; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (c != j)
                    minor[r - 1].push_back(e[r][c]);
        const CTensor term = cmul(e[0][j], cdeterminant(minor));
        if (j == 0)
            acc = term;
        else
            acc = (j % 2) ? csub(acc, term) : cadd(acc, term);
    }
    return acc;
}

Tensor logdet_abs_sq_diff(const std::vector<std::vector<CTensor>> &entries) {
    const CTensor d = cdeterminant(entries);
    return log(clamp_min(add(mul(d.re, d.re), mul(d.im, d.im)), 1e-30));
}

Tensor logdet_abs_sq_diff(const Tensor &a_re, const Tensor &a_im) {
    const std::size_t n = a_re.rows();
    if (a_re.cols() != n || a_im.rows() != n || a_im.cols() != n)
        throw Error(ErrorCode::ShapeMismatch, "logdet needs square re/im parts");
    std::vector<std::vector<CTensor>> e(n, std::vector<CTensor>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            e[i][j] = {slice(a_re, i, 1, j, 1), slice(a_im, i, 1, j, 1)};
    return logdet_abs_sq_diff(e);
}

// ---- optimizer ------------------------------------------------------------------

void adam_step(std::span<Parameter *const> params, AdamState &state) {
    if (state.first_moment.size() != params.size()) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (const auto *p : params) {
            state.first_moment.emplace_back(p->size(), 0.0);
            state.second_moment.emplace_back(p->size(), 0.0);
        }
    }
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter &p = *params[k];
        auto &m = state.first_moment[k];
        auto &v = state.second_moment[k];
        if (m.size() != p.size() || p.grad.size() != p.size())
            throw Error(ErrorCode::ShapeMismatch, "adam state does not match parameter " + p.name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ---- gradient checking -------------------------------------------------------------

GradCheckReport grad_check(const LossFn &loss, std::span<Parameter *const> params, GradCheckOptions opt) {
    for (auto *p : params)
        p->zero_grad();
    loss(true);
    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k]->size(); ++i)
            coords.emplace_back(k, i);
    if (coords.size() > opt.max_coords) {
        Rng rng(opt.seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(opt.max_coords);
    }
    std::vector<double> analytic;
    analytic.reserve(coords.size());
    for (auto [k, i] : coords)
        analytic.push_back(params[k]->grad[i]);

    GradCheckReport rep;
    for (std::size_t c = 0; c < coords.size(); ++c) {
        auto [k, i] = coords[c];
        double &x = params[k]->value[i];
        const double saved = x;
        x = saved + opt.step;
        const double fp = loss(false);
        x = saved - opt.step;
        const double fm = loss(false);
        x = saved;
        const double fd = (fp - fm) / (2.0 * opt.step);
        const double a = analytic[c];
        const double denom = std::max({std::abs(a), std::abs(fd), opt.abs_floor});
        const double rel = std::abs(a - fd) / denom;
        if (rel > rep.max_rel_error || !std::isfinite(rel)) {
            rep.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
            rep.worst_param = params[k]->name + "[" + std::to_string(i) + "]";
        }
        ++rep.coords_checked;
    }
    return rep;
}

} // namespace pingpong::ad
