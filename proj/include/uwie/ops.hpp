#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "uwie/kernels.hpp"
#include "uwie/tape.hpp"

// Differentiable tensor operations. Forward work runs through the OpenMP
// kernels (or plain loops for elementwise ops); each op records a backward
// closure on the tape.

namespace uwie {

namespace detail {

template <typename T>
void check_binary(const Var<T>& a, const Var<T>& b, const char* op) {
    if (!a.valid() || !b.valid()) throw StateError(std::string(op) + ": operand has no tape");
    if (a.tape != b.tape) throw StateError(std::string(op) + ": operands live on different tapes");
    if (!same_shape(a.val().shape, b.val().shape))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.val().shape) + " vs " +
                         shape_str(b.val().shape));
}

template <typename T>
void check_unary(const Var<T>& a, const char* op) {
    if (!a.valid()) throw StateError(std::string(op) + ": operand has no tape");
}

// F: y = f(x); DF: dy/dx from (x, y)
template <typename T, typename F, typename DF>
Var<T> unary_ew(Var<T> a, const char* name, F f, DF df) {
    check_unary(a, name);
    TapeT<T>& t = *a.tape;
    const TensorT<T>& x = a.val();
    TensorT<T> y(x.shape);
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
    const int out = t.push(std::move(y), name);
    t.record({out}, [ida = a.id, out, df](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        const TensorT<T>& xv = tp.val(ida);
        const TensorT<T>& yv = tp.val(out);
        TensorT<T>& dst = tp.grad_buffer(ida);
        const std::int64_t m = g.size();
        for (std::int64_t i = 0; i < m; ++i) dst[i] += df(xv[i], yv[i]) * g[i];
    });
    return {&t, out};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::check_binary(a, b, "add");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&xa = a.val(), &xb = b.val();
    TensorT<T> y(xa.shape);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
    const int out = t.push(std::move(y), "add");
    t.record({out}, [ia = a.id, ib = b.id, out](TapeT<T>& tp) {
        tp.accum(ia, tp.grad(out));
        tp.accum(ib, tp.grad(out));
    });
    return {&t, out};
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    detail::check_binary(a, b, "sub");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&xa = a.val(), &xb = b.val();
    TensorT<T> y(xa.shape);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = xa[i] - xb[i];
    const int out = t.push(std::move(y), "sub");
    t.record({out}, [ia = a.id, ib = b.id, out](TapeT<T>& tp) {
        tp.accum(ia, tp.grad(out));
        tp.accum_scaled(ib, tp.grad(out), T(-1));
    });
    return {&t, out};
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::check_binary(a, b, "mul");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&xa = a.val(), &xb = b.val();
    TensorT<T> y(xa.shape);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
    const int out = t.push(std::move(y), "mul");
    t.record({out}, [ia = a.id, ib = b.id, out](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        const TensorT<T>&va = tp.val(ia), &vb = tp.val(ib);
        TensorT<T>&da = tp.grad_buffer(ia), &db = tp.grad_buffer(ib);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            da[i] += vb[i] * g[i];
            db[i] += va[i] * g[i];
        }
    });
    return {&t, out};
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
    detail::check_binary(a, b, "div");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&xa = a.val(), &xb = b.val();
    TensorT<T> y(xa.shape);
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = xa[i] / xb[i];
    const int out = t.push(std::move(y), "div");
    t.record({out}, [ia = a.id, ib = b.id, out](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        const TensorT<T>&vb = tp.val(ib), &vy = tp.val(out);
        TensorT<T>&da = tp.grad_buffer(ia), &db = tp.grad_buffer(ib);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            da[i] += g[i] / vb[i];
            db[i] -= g[i] * vy[i] / vb[i];
        }
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// scalar broadcast

template <typename T>
Var<T> add_scalar(Var<T> a, T c) {
    return detail::unary_ew(
        a, "add_scalar", [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> mul_scalar(Var<T> a, T c) {
    return detail::unary_ew(
        a, "mul_scalar", [c](T x) { return x * c; }, [c](T, T) { return c; });
}

// ---------------------------------------------------------------------------
// elementwise unary

template <typename T>
Var<T> relu(Var<T> a) {
    return detail::unary_ew(
        a, "relu", [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
    return detail::unary_ew(
        a, "sigmoid",
        [](T x) {
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            const T e = std::exp(x);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

// tanh approximation: 0.5x(1 + tanh(sqrt(2/pi)(x + 0.044715 x^3)))
template <typename T>
Var<T> gelu(Var<T> a) {
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    return detail::unary_ew(
        a, "gelu",
        [](T x) {
            const double xd = static_cast<double>(x);
            const double u = kC * (xd + kA * xd * xd * xd);
            return static_cast<T>(0.5 * xd * (1.0 + std::tanh(u)));
        },
        [](T x, T) {
            const double xd = static_cast<double>(x);
            const double u = kC * (xd + kA * xd * xd * xd);
            const double th = std::tanh(u);
            const double du = kC * (1.0 + 3.0 * kA * xd * xd);
            return static_cast<T>(0.5 * (1.0 + th) + 0.5 * xd * (1.0 - th * th) * du);
        });
}

template <typename T>
Var<T> abs_op(Var<T> a) {
    return detail::unary_ew(
        a, "abs", [](T x) { return std::abs(x); },
        [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var<T> square(Var<T> a) {
    return detail::unary_ew(
        a, "square", [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Var<T> sqrt_op(Var<T> a) {
    return detail::unary_ew(
        a, "sqrt", [](T x) { return std::sqrt(x); },
        [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> log_op(Var<T> a) {
    return detail::unary_ew(
        a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Var<T> clamp_min_op(Var<T> a, T floor) {
    return detail::unary_ew(
        a, "clamp_min", [floor](T x) { return x > floor ? x : floor; },
        [floor](T x, T) { return x > floor ? T(1) : T(0); });
}

// kind selector used by config-driven model code
enum class Activation { kGelu, kSigmoid, kRelu };

template <typename T>
Var<T> activation(Var<T> a, Activation kind) {
    switch (kind) {
        case Activation::kGelu: return gelu(a);
        case Activation::kSigmoid: return sigmoid(a);
        case Activation::kRelu: return relu(a);
    }
    throw ConfigError("unknown activation kind");
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Var<T> sum_all(Var<T> a) {
    detail::check_unary(a, "sum");
    TapeT<T>& t = *a.tape;
    const double s = kernels::sum_chunked(a.val().ptr(), a.val().size());
    const int out = t.push(TensorT<T>::scalar(static_cast<T>(s)), "sum");
    t.record({out}, [ia = a.id, out](TapeT<T>& tp) {
        const T g = tp.grad(out)[0];
        TensorT<T>& dst = tp.grad_buffer(ia);
        for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += g;
    });
    return {&t, out};
}

template <typename T>
Var<T> mean_all(Var<T> a) {
    detail::check_unary(a, "mean");
    TapeT<T>& t = *a.tape;
    const std::int64_t n = a.val().size();
    const double s = kernels::sum_chunked(a.val().ptr(), n) / static_cast<double>(n);
    const int out = t.push(TensorT<T>::scalar(static_cast<T>(s)), "mean");
    t.record({out}, [ia = a.id, out, n](TapeT<T>& tp) {
        const T g = tp.grad(out)[0] / static_cast<T>(n);
        TensorT<T>& dst = tp.grad_buffer(ia);
        for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += g;
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// structural ops

template <typename T>
Var<T> reshape(Var<T> a, Shape s) {
    detail::check_unary(a, "reshape");
    TapeT<T>& t = *a.tape;
    if (shape_numel(s) != a.val().size())
        throw ShapeError("reshape: cannot view " + shape_str(a.val().shape) + " as " + shape_str(s));
    TensorT<T> y(s, a.val().data);
    const int out = t.push(std::move(y), "reshape");
    t.record({out}, [ia = a.id, out](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>& dst = tp.grad_buffer(ia);
        for (std::int64_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    });
    return {&t, out};
}

template <typename T>
Var<T> transpose2d(Var<T> a) {
    detail::check_unary(a, "transpose2d");
    TapeT<T>& t = *a.tape;
    const TensorT<T>& x = a.val();
    if (x.rank() != 2) throw ShapeError("transpose2d: expected rank-2, got " + shape_str(x.shape));
    const int A = x.dim(0), B = x.dim(1);
    TensorT<T> y({B, A});
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < B; ++j) y.at(j, i) = x.at(i, j);
    const int out = t.push(std::move(y), "transpose2d");
    t.record({out}, [ia = a.id, out, A, B](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>& dst = tp.grad_buffer(ia);
        for (int i = 0; i < A; ++i)
            for (int j = 0; j < B; ++j) dst.at(i, j) += g.at(j, i);
    });
    return {&t, out};
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
    detail::check_unary(a, "concat_channels");
    detail::check_unary(b, "concat_channels");
    if (a.tape != b.tape) throw StateError("concat_channels: operands on different tapes");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&xa = a.val(), &xb = b.val();
    if (xa.rank() != 3 || xb.rank() != 3 || xa.dim(1) != xb.dim(1) || xa.dim(2) != xb.dim(2))
        throw ShapeError("concat_channels: incompatible shapes " + shape_str(xa.shape) + " / " +
                         shape_str(xb.shape));
    const int Ca = xa.dim(0), Cb = xb.dim(0), H = xa.dim(1), W = xa.dim(2);
    TensorT<T> y({Ca + Cb, H, W});
    std::copy(xa.data.begin(), xa.data.end(), y.data.begin());
    std::copy(xb.data.begin(), xb.data.end(), y.data.begin() + xa.size());
    const int out = t.push(std::move(y), "concat_channels");
    t.record({out}, [ia = a.id, ib = b.id, out, na = xa.size()](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>&da = tp.grad_buffer(ia), &db = tp.grad_buffer(ib);
        for (std::int64_t i = 0; i < na; ++i) da[i] += g[i];
        for (std::int64_t i = na; i < g.size(); ++i) db[i - na] += g[i];
    });
    return {&t, out};
}

template <typename T>
Var<T> slice_channels(Var<T> a, int start, int count) {
    detail::check_unary(a, "slice_channels");
    TapeT<T>& t = *a.tape;
    const TensorT<T>& x = a.val();
    if (x.rank() != 3) throw ShapeError("slice_channels: expected [C,H,W]");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (start < 0 || count < 1 || start + count > C)
        throw ShapeError("slice_channels: range [" + std::to_string(start) + "," +
                         std::to_string(start + count) + ") out of " + std::to_string(C));
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    TensorT<T> y({count, H, W});
    std::copy(x.data.begin() + start * plane, x.data.begin() + (start + count) * plane, y.data.begin());
    const int out = t.push(std::move(y), "slice_channels");
    t.record({out}, [ia = a.id, out, start, plane](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>& dst = tp.grad_buffer(ia);
        const std::int64_t off = start * plane;
        for (std::int64_t i = 0; i < g.size(); ++i) dst[off + i] += g[i];
    });
    return {&t, out};
}

// rows of a [N,M] matrix by index; used to subsample pixels for losses
template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<int> idx) {
    detail::check_unary(a, "gather_rows");
    TapeT<T>& t = *a.tape;
    const TensorT<T>& x = a.val();
    if (x.rank() != 2) throw ShapeError("gather_rows: expected rank-2");
    const int N = x.dim(0), M = x.dim(1);
    for (int i : idx)
        if (i < 0 || i >= N) throw ShapeError("gather_rows: index out of range");
    TensorT<T> y({static_cast<int>(idx.size()), M});
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy(x.data.begin() + static_cast<std::int64_t>(idx[r]) * M,
                  x.data.begin() + static_cast<std::int64_t>(idx[r] + 1) * M,
                  y.data.begin() + static_cast<std::int64_t>(r) * M);
    const int out = t.push(std::move(y), "gather_rows");
    t.record({out}, [ia = a.id, out, idx = std::move(idx), M](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>& dst = tp.grad_buffer(ia);
        for (size_t r = 0; r < idx.size(); ++r)
            for (int j = 0; j < M; ++j)
                dst[static_cast<std::int64_t>(idx[r]) * M + j] += g[static_cast<std::int64_t>(r) * M + j];
    });
    return {&t, out};
}

// append the same k-vector to every row: [N,M] + [k] -> [N,M+k]
template <typename T>
Var<T> concat_cols_bcast(Var<T> a, Var<T> c) {
    detail::check_unary(a, "concat_cols");
    detail::check_unary(c, "concat_cols");
    if (a.tape != c.tape) throw StateError("concat_cols: operands on different tapes");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&x = a.val(), &v = c.val();
    if (x.rank() != 2 || v.rank() != 1) throw ShapeError("concat_cols: expected [N,M] and [k]");
    const int N = x.dim(0), M = x.dim(1), K = v.dim(0);
    TensorT<T> y({N, M + K});
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < M; ++j) y.at(i, j) = x.at(i, j);
        for (int j = 0; j < K; ++j) y.at(i, M + j) = v[j];
    }
    const int out = t.push(std::move(y), "concat_cols");
    t.record({out}, [ia = a.id, ic = c.id, out, N, M, K](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T>&da = tp.grad_buffer(ia), &dc = tp.grad_buffer(ic);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < M; ++j) da.at(i, j) += g.at(i, j);
            for (int j = 0; j < K; ++j) dc[j] += g.at(i, M + j);
        }
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// broadcast adds

template <typename T>
Var<T> add_rowvec(Var<T> x, Var<T> b) {
    detail::check_unary(x, "add_rowvec");
    detail::check_unary(b, "add_rowvec");
    if (x.tape != b.tape) throw StateError("add_rowvec: operands on different tapes");
    TapeT<T>& t = *x.tape;
    const TensorT<T>&xv = x.val(), &bv = b.val();
    if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1))
        throw ShapeError("add_rowvec: " + shape_str(xv.shape) + " + " + shape_str(bv.shape));
    const int N = xv.dim(0), M = xv.dim(1);
    TensorT<T> y(xv.shape);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) y.at(i, j) = xv.at(i, j) + bv[j];
    const int out = t.push(std::move(y), "add_rowvec");
    t.record({out}, [ix = x.id, ib = b.id, out, N, M](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        tp.accum(ix, g);
        TensorT<T>& db = tp.grad_buffer(ib);
        for (int j = 0; j < M; ++j) {
            T acc = T(0);
            for (int i = 0; i < N; ++i) acc += g.at(i, j);
            db[j] += acc;
        }
    });
    return {&t, out};
}

template <typename T>
Var<T> add_channel_bias(Var<T> x, Var<T> b) {
    detail::check_unary(x, "add_channel_bias");
    detail::check_unary(b, "add_channel_bias");
    if (x.tape != b.tape) throw StateError("add_channel_bias: operands on different tapes");
    TapeT<T>& t = *x.tape;
    const TensorT<T>&xv = x.val(), &bv = b.val();
    if (xv.rank() != 3 || bv.rank() != 1 || bv.dim(0) != xv.dim(0))
        throw ShapeError("add_channel_bias: " + shape_str(xv.shape) + " + " + shape_str(bv.shape));
    const int C = xv.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    TensorT<T> y(xv.shape);
    for (int c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < plane; ++i) y[c * plane + i] = xv[c * plane + i] + bv[c];
    const int out = t.push(std::move(y), "add_channel_bias");
    t.record({out}, [ix = x.id, ib = b.id, out, C, plane](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        tp.accum(ix, g);
        TensorT<T>& db = tp.grad_buffer(ib);
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(g[c * plane + i]);
            db[c] += static_cast<T>(acc);
        }
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// matmul

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    detail::check_unary(a, "matmul");
    detail::check_unary(b, "matmul");
    if (a.tape != b.tape) throw StateError("matmul: operands on different tapes");
    TapeT<T>& t = *a.tape;
    const TensorT<T>&A = a.val(), &B = b.val();
    if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0))
        throw ShapeError("matmul: " + shape_str(A.shape) + " x " + shape_str(B.shape));
    const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    TensorT<T> y({m, n});
    kernels::gemm_nn(m, n, k, A.ptr(), B.ptr(), y.ptr(), false);
    const int out = t.push(std::move(y), "matmul");
    t.record({out}, [ia = a.id, ib = b.id, out, m, k, n](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        const TensorT<T>&A2 = tp.val(ia), &B2 = tp.val(ib);
        kernels::gemm_nt(m, k, n, g.ptr(), B2.ptr(), tp.grad_buffer(ia).ptr(), true);
        kernels::gemm_tn(k, n, m, A2.ptr(), g.ptr(), tp.grad_buffer(ib).ptr(), true);
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// conv2d (x:[C,H,W], k:[O,C,kh,kw])

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> k, int stride, Pad pad) {
    detail::check_unary(x, "conv2d");
    detail::check_unary(k, "conv2d");
    if (x.tape != k.tape) throw StateError("conv2d: operands on different tapes");
    TapeT<T>& t = *x.tape;
    const TensorT<T>&xv = x.val(), &kv = k.val();
    if (xv.rank() != 3 || kv.rank() != 4) throw ShapeError("conv2d: expected x [C,H,W], k [O,C,kh,kw]");
    if (xv.dim(0) != kv.dim(1))
        throw ShapeError("conv2d: channel mismatch, input has " + std::to_string(xv.dim(0)) +
                         ", kernel expects " + std::to_string(kv.dim(1)));
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int O = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
    int Ho, Wo;
    kernels::conv2d_output_shape(H, W, kh, kw, stride, pad, Ho, Wo);
    TensorT<T> y({O, Ho, Wo});
    if (kh == 1 && kw == 1 && stride == 1) {
        // 1x1 stride-1 convolution is a gemm over positions
        kernels::gemm_nn(O, H * W, C, kv.ptr(), xv.ptr(), y.ptr(), false);
    } else {
        kernels::conv2d_forward(xv.ptr(), C, H, W, kv.ptr(), O, kh, kw, stride, pad, y.ptr());
    }
    const int out = t.push(std::move(y), "conv2d");
    t.record({out}, [ix = x.id, ik = k.id, out, C, H, W, O, kh, kw, stride, pad](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        const TensorT<T>&xv2 = tp.val(ix), &kv2 = tp.val(ik);
        if (kh == 1 && kw == 1 && stride == 1) {
            // dX = Kᵀ·G, dK = G·Xᵀ
            kernels::gemm_tn(C, H * W, O, kv2.ptr(), g.ptr(), tp.grad_buffer(ix).ptr(), true);
            kernels::gemm_nt(O, C, H * W, g.ptr(), xv2.ptr(), tp.grad_buffer(ik).ptr(), true);
            return;
        }
        TensorT<T> gx({C, H, W});
        kernels::conv2d_backward_input(g.ptr(), kv2.ptr(), C, H, W, O, kh, kw, stride, pad, gx.ptr());
        tp.accum(ix, gx);
        TensorT<T> gk({O, C, kh, kw});
        kernels::conv2d_backward_kernel(g.ptr(), xv2.ptr(), C, H, W, O, kh, kw, stride, pad, gk.ptr());
        tp.accum(ik, gk);
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// layer norm over one axis (default: last)

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps, int axis = -1) {
    detail::check_unary(x, "layer_norm");
    detail::check_unary(gamma, "layer_norm");
    detail::check_unary(beta, "layer_norm");
    if (x.tape != gamma.tape || x.tape != beta.tape)
        throw StateError("layer_norm: operands on different tapes");
    if (eps <= T(0)) throw ConfigError("layer_norm: eps must be positive");
    TapeT<T>& t = *x.tape;
    const TensorT<T>& xv = x.val();
    const int r = xv.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("layer_norm: axis out of range");
    const std::int64_t L = xv.dim(axis);
    if (gamma.val().size() != L || beta.val().size() != L)
        throw ShapeError("layer_norm: gamma/beta must have length " + std::to_string(L));
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xv.dim(i);
    for (int i = axis + 1; i < r; ++i) inner *= xv.dim(i);

    TensorT<T> y(xv.shape), xhat(xv.shape), inv_std(Shape{static_cast<int>(outer * inner)});
    kernels::layer_norm_forward(xv.ptr(), outer, L, inner, gamma.val().ptr(), beta.val().ptr(), eps,
                                y.ptr(), xhat.ptr(), inv_std.ptr());
    const int out = t.push(std::move(y), "layer_norm");
    t.record({out}, [ix = x.id, ig = gamma.id, ibt = beta.id, out, outer, L, inner,
                     xhat = std::move(xhat), inv_std = std::move(inv_std)](TapeT<T>& tp) {
        const TensorT<T>& g = tp.grad(out);
        TensorT<T> gx(tp.val(ix).shape);
        kernels::layer_norm_backward(g.ptr(), xhat.ptr(), inv_std.ptr(), tp.val(ig).ptr(), outer, L,
                                     inner, gx.ptr());
        tp.accum(ix, gx);
        kernels::layer_norm_param_grads(g.ptr(), xhat.ptr(), outer, L, inner,
                                        tp.grad_buffer(ig).ptr(), tp.grad_buffer(ibt).ptr());
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// bilinear resize [C,H,W] -> [C,Ho,Wo]

template <typename T>
Var<T> bilinear_resize(Var<T> x, int Ho, int Wo) {
    detail::check_unary(x, "bilinear_resize");
    TapeT<T>& t = *x.tape;
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 3) throw ShapeError("bilinear_resize: expected [C,H,W]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    TensorT<T> y({C, Ho, Wo});
    kernels::bilinear_forward(xv.ptr(), C, H, W, Ho, Wo, y.ptr());
    const int out = t.push(std::move(y), "bilinear_resize");
    t.record({out}, [ix = x.id, out, C, H, W, Ho, Wo](TapeT<T>& tp) {
        TensorT<T> gx({C, H, W});
        kernels::bilinear_backward(tp.grad(out).ptr(), C, H, W, Ho, Wo, gx.ptr());
        tp.accum(ix, gx);
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// block/grid partition

template <typename T>
Var<T> partition(Var<T> x, PartMode mode, int p) {
    detail::check_unary(x, "partition");
    TapeT<T>& t = *x.tape;
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 3) throw ShapeError("partition: expected [C,H,W]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int G = kernels::partition_groups(H, W, mode, p);
    TensorT<T> y({G, C, p * p});
    kernels::partition_forward(xv.ptr(), C, H, W, mode, p, y.ptr());
    const int out = t.push(std::move(y), "partition");
    t.record({out}, [ix = x.id, out, C, H, W, mode, p](TapeT<T>& tp) {
        TensorT<T> gx({C, H, W});
        kernels::partition_inverse(tp.grad(out).ptr(), C, H, W, mode, p, gx.ptr());
        tp.accum(ix, gx);
    });
    return {&t, out};
}

template <typename T>
Var<T> unpartition(Var<T> y, PartMode mode, int p, int H, int W) {
    detail::check_unary(y, "unpartition");
    TapeT<T>& t = *y.tape;
    const TensorT<T>& yv = y.val();
    if (yv.rank() != 3 || yv.dim(2) != p * p)
        throw ShapeError("unpartition: expected [G,C,p*p], got " + shape_str(yv.shape));
    const int C = yv.dim(1);
    if (kernels::partition_groups(H, W, mode, p) != yv.dim(0))
        throw ShapeError("unpartition: group count does not match target extents");
    TensorT<T> x({C, H, W});
    kernels::partition_inverse(yv.ptr(), C, H, W, mode, p, x.ptr());
    const int out = t.push(std::move(x), "unpartition");
    t.record({out}, [iy = y.id, out, C, H, W, mode, p](TapeT<T>& tp) {
        const int G = kernels::partition_groups(H, W, mode, p);
        TensorT<T> gy({G, C, p * p});
        kernels::partition_forward(tp.grad(out).ptr(), C, H, W, mode, p, gy.ptr());
        tp.accum(iy, gy);
    });
    return {&t, out};
}

// ---------------------------------------------------------------------------
// fft2d: real [H,W] -> (re, im), both [H,W]

template <typename T>
std::pair<Var<T>, Var<T>> fft2d(Var<T> x) {
    detail::check_unary(x, "fft2d");
    TapeT<T>& t = *x.tape;
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 2) throw ShapeError("fft2d: expected rank-2 [H,W]");
    const int H = xv.dim(0), W = xv.dim(1);
    TensorT<T> re({H, W}), im({H, W});
    kernels::fft2d_forward(xv.ptr(), H, W, re.ptr(), im.ptr());
    const int ore = t.push(std::move(re), "fft2d");
    const int oim = t.push(std::move(im), "fft2d");
    t.record({ore, oim}, [ix = x.id, ore, oim, H, W](TapeT<T>& tp) {
        TensorT<T> gx({H, W});
        kernels::fft2d_adjoint(tp.grad(ore).ptr(), tp.grad(oim).ptr(), H, W, gx.ptr());
        tp.accum(ix, gx);
    });
    return {{&t, ore}, {&t, oim}};
}

}  // namespace uwie
