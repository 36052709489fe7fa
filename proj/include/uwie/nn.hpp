#pragma once

#include <string>
#include <vector>

#include "uwie/ops.hpp"

namespace uwie {

template <typename T>
struct ParamRef {
    std::string name;
    TensorT<T>* tensor;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

// Fan-in uniform init; `scale` shrinks layers that should start near zero.
template <typename T>
struct LinearT {
    TensorT<T> w;  // [in, out]
    TensorT<T> b;  // [out]

    void init(int in, int out, Rng& rng, double scale = 1.0) {
        w = TensorT<T>({in, out});
        b = TensorT<T>::zeros(Shape{out});
        const double s = scale / std::sqrt(static_cast<double>(in));
        fill_uniform(w, rng, -s, s);
    }

    Var<T> forward(TapeT<T>& t, Var<T> x) { return add_rowvec(matmul(x, t.param(w)), t.param(b)); }

    void collect(ParamList<T>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w});
        out.push_back({prefix + ".b", &b});
    }
};

template <typename T>
struct ConvT {
    TensorT<T> w;  // [O,C,kh,kw]
    TensorT<T> b;  // [O]
    int stride = 1;
    Pad pad = Pad::kSame;

    void init(int in_c, int out_c, int k, int stride_, Pad pad_, Rng& rng, double scale = 1.0) {
        stride = stride_;
        pad = pad_;
        w = TensorT<T>({out_c, in_c, k, k});
        b = TensorT<T>::zeros(Shape{out_c});
        const double s = scale / std::sqrt(static_cast<double>(in_c) * k * k);
        fill_uniform(w, rng, -s, s);
    }

    Var<T> forward(TapeT<T>& t, Var<T> x) {
        return add_channel_bias(conv2d(x, t.param(w), stride, pad), t.param(b));
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        out.push_back({prefix + ".w", &w});
        out.push_back({prefix + ".b", &b});
    }
};

template <typename T>
struct NormT {
    TensorT<T> gamma;
    TensorT<T> beta;

    void init(int c) {
        gamma = TensorT<T>::full(Shape{c}, T(1));
        beta = TensorT<T>::zeros(Shape{c});
    }

    Var<T> forward(TapeT<T>& t, Var<T> x, int axis) {
        return layer_norm(x, t.param(gamma), t.param(beta), T(1e-5), axis);
    }

    void collect(ParamList<T>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma});
        out.push_back({prefix + ".beta", &beta});
    }
};

template <typename T>
std::int64_t param_count(const ParamList<T>& params) {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.tensor->size();
    return n;
}

}  // namespace uwie
