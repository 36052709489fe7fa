#include "uwie/tape.hpp"

#include "uwie/kernels.hpp"

namespace uwie {

template <typename T>
Var<T> TapeT<T>::leaf(TensorT<T> v, const char* opname) {
    return {this, push(std::move(v), opname)};
}

template <typename T>
Var<T> TapeT<T>::param(TensorT<T>& p, const std::string& name) {
    auto it = param_ids_.find(&p);
    if (it != param_ids_.end()) return {this, it->second};
    const int id = push(p, name.empty() ? "param" : name.c_str());
    param_ids_.emplace(&p, id);
    params_.emplace_back(&p, id);
    return {this, id};
}

template <typename T>
int TapeT<T>::push(TensorT<T> value, const char* opname) {
    if (consumed_)
        throw StateError("tape already consumed by backward(); reset() before reuse");
    if (!kernels::all_finite(value.ptr(), value.size()))
        throw NumericError(std::string("non-finite value produced by op '") + opname + "'");
    values_.push_back(std::move(value));
    return static_cast<int>(values_.size()) - 1;
}

template <typename T>
void TapeT<T>::record(std::vector<int> out_ids, std::function<void(TapeT<T>&)> fn) {
    if (!grad_enabled_) return;
    nodes_.push_back(Node{std::move(out_ids), std::move(fn)});
}

template <typename T>
const TensorT<T>& TapeT<T>::grad(int id) const {
    if (!has_grad(id)) throw StateError("gradient not available for value " + std::to_string(id));
    return grads_[static_cast<size_t>(id)];
}

template <typename T>
TensorT<T>& TapeT<T>::grad_buffer(int id) {
    if (grads_.size() < values_.size()) grads_.resize(values_.size());
    TensorT<T>& g = grads_[static_cast<size_t>(id)];
    if (g.data.empty()) g = TensorT<T>::zeros(values_[static_cast<size_t>(id)].shape);
    return g;
}

template <typename T>
void TapeT<T>::accum(int id, const TensorT<T>& g) {
    TensorT<T>& dst = grad_buffer(id);
    if (!same_shape(dst.shape, g.shape))
        throw ShapeError("gradient shape " + shape_str(g.shape) + " does not match value shape " +
                         shape_str(dst.shape));
    const std::int64_t n = dst.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

template <typename T>
void TapeT<T>::accum_scaled(int id, const TensorT<T>& g, T scale) {
    TensorT<T>& dst = grad_buffer(id);
    const std::int64_t n = dst.size();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += scale * g[i];
}

template <typename T>
const TensorT<T>* TapeT<T>::grad_for(const TensorT<T>* p) const {
    auto it = param_ids_.find(p);
    if (it == param_ids_.end()) return nullptr;
    if (!has_grad(it->second)) return nullptr;
    return &grads_[static_cast<size_t>(it->second)];
}

template <typename T>
void TapeT<T>::backward(const Var<T>& loss) {
    if (!loss.valid() || loss.tape != this)
        throw StateError("backward: loss is not registered on this tape");
    if (!grad_enabled_) throw StateError("backward: gradient recording is disabled on this tape");
    if (consumed_) throw StateError("backward: tape already consumed");
    if (val(loss.id).size() != 1)
        throw StateError("backward: loss must be scalar, got shape " + shape_str(val(loss.id).shape));

    grads_.assign(values_.size(), TensorT<T>());
    grad_buffer(loss.id)[0] = T(1);

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        bool any = false;
        for (int out : it->outs)
            if (has_grad(out)) { any = true; break; }
        if (!any) continue;
        // materialize zero grads for multi-output nodes with partial demand
        for (int out : it->outs) grad_buffer(out);
        it->fn(*this);
    }

    // every registered parameter gets a gradient tensor, zero if disconnected
    for (auto& [ptr, id] : params_) grad_buffer(id);

    consumed_ = true;
}

template <typename T>
void TapeT<T>::reset() {
    values_.clear();
    grads_.clear();
    nodes_.clear();
    params_.clear();
    param_ids_.clear();
    consumed_ = false;
}

template class TapeT<float>;
template class TapeT<double>;

}  // namespace uwie
