#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uwie {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto exit codes.

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Misuse of stateful machinery (backward without tape, missing gradient, ...).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Non-finite value produced by a numeric operation. Always a hard error.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Malformed file contents (PPM, .cube, checkpoints).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Dataset-level problems (missing pairs, empty directories).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shapes

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) {
        if (e <= 0) throw ShapeError("shape has non-positive extent");
        n *= e;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// ---------------------------------------------------------------------------
// Tensor: dense row-major N-d array. float for training/inference, double for
// gradient verification; the whole engine is instantiated for both.

template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), T(0)) {}
    TensorT(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
            throw ShapeError("tensor data length does not match shape " + shape_str(shape));
    }

    static TensorT zeros(Shape s) { return TensorT(std::move(s)); }
    static TensorT full(Shape s, T v) {
        TensorT t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }
    static TensorT scalar(T v) { return TensorT({1}, {v}); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    T& operator[](std::int64_t i) { return data[static_cast<size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data[static_cast<size_t>(i)]; }

    T& at(int i, int j) { return data[static_cast<size_t>(i) * dim(1) + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * dim(1) + j]; }
    T& at(int i, int j, int k) {
        return data[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    const T& at(int i, int j, int k) const {
        return data[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
    }
    T& at(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }
    const T& at(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
    }

    T item() const {
        if (size() != 1) throw ShapeError("item() requires a scalar tensor, got " + shape_str(shape));
        return data[0];
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;
// Images are [3,H,W] tensors with values in [0,1].
using Image = TensorT<float>;

// ---------------------------------------------------------------------------
// Kernel knobs shared by ops and kernels.

enum class Pad { kSame, kValid };
enum class PartMode { kBlock, kGrid };

// ---------------------------------------------------------------------------
// Rng: splitmix64. Chosen over <random> engines because the 8-byte state
// serializes into checkpoints and the uniform extraction is bit-portable.

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0,1) with 53 bits, identical on every platform.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0,n)
    int uniform_int(int n) {
        if (n <= 0) throw ConfigError("uniform_int needs n > 0");
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    // Johnk's algorithm; fine for the small alphas used by mixup.
    double beta(double a, double b) {
        for (;;) {
            double u = std::pow(uniform(), 1.0 / a);
            double v = std::pow(uniform(), 1.0 / b);
            if (u + v > 0.0 && u + v <= 1.0) return u / (u + v);
        }
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    // Independent derived stream (per image, per op, ...).
    Rng fork(std::uint64_t stream) const {
        Rng r(state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

template <typename T>
void fill_uniform(TensorT<T>& t, Rng& rng, double lo, double hi) {
    for (auto& x : t.data) x = static_cast<T>(rng.uniform(lo, hi));
}

}  // namespace uwie
