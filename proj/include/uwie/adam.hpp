#pragma once

#include <cmath>
#include <vector>

#include "uwie/nn.hpp"

namespace uwie {

template <typename T>
struct AdamStateT {
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    std::int64_t step = 0;
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;

    void init(const ParamList<T>& params) {
        step = 0;
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.push_back(TensorT<T>::zeros(p.tensor->shape));
            v.push_back(TensorT<T>::zeros(p.tensor->shape));
        }
    }
};

using AdamState = AdamStateT<float>;

// Standard bias-corrected Adam. grads[i] may not be null.
template <typename T>
void adam_step(ParamList<T>& params, const std::vector<const TensorT<T>*>& grads,
               AdamStateT<T>& st, double lr) {
    if (params.size() != grads.size() || params.size() != st.m.size())
        throw StateError("adam_step: parameter/gradient/state arity mismatch");
    st.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(st.beta1), static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(st.beta2), static_cast<double>(st.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const TensorT<T>* g = grads[i];
        if (g == nullptr)
            throw StateError("adam_step: missing gradient for parameter '" + params[i].name + "'");
        TensorT<T>& p = *params[i].tensor;
        if (!same_shape(g->shape, p.shape))
            throw ShapeError("adam_step: gradient shape mismatch for '" + params[i].name + "'");
        TensorT<T>&mi = st.m[i], &vi = st.v[i];
        const T b1 = st.beta1, b2 = st.beta2;
        for (std::int64_t j = 0; j < p.size(); ++j) {
            const T gj = (*g)[j];
            mi[j] = b1 * mi[j] + (T(1) - b1) * gj;
            vi[j] = b2 * vi[j] + (T(1) - b2) * gj * gj;
            const double mhat = static_cast<double>(mi[j]) / bc1;
            const double vhat = static_cast<double>(vi[j]) / bc2;
            p[j] = static_cast<T>(static_cast<double>(p[j]) -
                                  lr * mhat / (std::sqrt(vhat) + static_cast<double>(st.eps)));
        }
    }
}

template <typename T>
double global_grad_norm(const std::vector<TensorT<T>>& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (std::int64_t i = 0; i < g.size(); ++i) s += static_cast<double>(g[i]) * g[i];
    return std::sqrt(s);
}

// Scales all gradients so the global norm is at most max_norm.
template <typename T>
void clip_global_norm(std::vector<TensorT<T>>& grads, double max_norm) {
    const double n = global_grad_norm(grads);
    if (!std::isfinite(n)) throw NumericError("gradient norm is non-finite");
    if (n <= max_norm || n == 0.0) return;
    const T s = static_cast<T>(max_norm / n);
    for (auto& g : grads)
        for (std::int64_t i = 0; i < g.size(); ++i) g[i] *= s;
}

}  // namespace uwie
