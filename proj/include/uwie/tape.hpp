#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

template <typename T>
class TapeT;

// Handle to a value living on a tape.
template <typename T>
struct Var {
    TapeT<T>* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const TensorT<T>& val() const;
};

// Reverse-mode tape. Values are recorded in creation order (a topological
// order by construction); backward() walks nodes in reverse. One tape per
// thread per forward pass; tensors themselves are inert values.
template <typename T>
class TapeT {
public:
    explicit TapeT(std::uint64_t seed = 0) : seed_(seed) {}

    TapeT(const TapeT&) = delete;
    TapeT& operator=(const TapeT&) = delete;

    std::uint64_t seed() const { return seed_; }

    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    // Constant input (no gradient demanded, but gradients may still flow
    // through it to parameters upstream — there are none for leaves).
    Var<T> leaf(TensorT<T> v, const char* opname = "leaf");

    // Trainable parameter living outside the tape. Registering the same
    // tensor twice yields the same Var.
    Var<T> param(TensorT<T>& p, const std::string& name = "");

    const TensorT<T>& val(int id) const { return values_.at(static_cast<size_t>(id)); }
    bool has_grad(int id) const {
        return id < static_cast<int>(grads_.size()) && !grads_[static_cast<size_t>(id)].data.empty();
    }
    const TensorT<T>& grad(int id) const;

    // Gradient for a registered parameter after backward(); null if the
    // tensor was never registered on this tape.
    const TensorT<T>* grad_for(const TensorT<T>* p) const;

    void backward(const Var<T>& loss);
    bool consumed() const { return consumed_; }
    void reset();

    size_t num_values() const { return values_.size(); }

    // --- op-construction interface (used by ops.hpp) ---
    int push(TensorT<T> value, const char* opname);
    void record(std::vector<int> out_ids, std::function<void(TapeT<T>&)> fn);
    // accumulate g into grads_[id] (lazily materialized as zeros)
    void accum(int id, const TensorT<T>& g);
    void accum_scaled(int id, const TensorT<T>& g, T scale);
    TensorT<T>& grad_buffer(int id);

private:
    struct Node {
        std::vector<int> outs;
        std::function<void(TapeT<T>&)> fn;
    };

    std::uint64_t seed_ = 0;
    bool grad_enabled_ = true;
    bool consumed_ = false;
    // deques keep references from val()/grad() stable while the tape grows
    std::deque<TensorT<T>> values_;
    std::deque<TensorT<T>> grads_;
    std::vector<Node> nodes_;
    std::vector<std::pair<const TensorT<T>*, int>> params_;  // registration order
    std::unordered_map<const TensorT<T>*, int> param_ids_;
};

template <typename T>
const TensorT<T>& Var<T>::val() const {
    if (!valid()) throw StateError("use of an unregistered tensor handle (no tape)");
    return tape->val(id);
}

using Tape = TapeT<float>;

extern template class TapeT<float>;
extern template class TapeT<double>;

}  // namespace uwie
