#pragma once

#include <optional>
#include <string>
#include <vector>

#include "uwie/nn.hpp"

namespace uwie {

// Implicit 3D LUT: a small MLP from RGB (plus an optional condition vector)
// to corrected RGB. The output sigmoid pins the range to [0,1]^3.

struct LutConfig {
    int hidden_layers = 3;
    int hidden_width = 64;
    int cond_dim = 0;
    Activation hidden_act = Activation::kRelu;
};

template <typename T>
struct LutNetworkT {
    LutConfig cfg;
    std::vector<LinearT<T>> layers;  // (3+k) -> width -> ... -> 3

    static LutNetworkT make(const LutConfig& cfg, Rng& rng);

    // rows: [N, 3+k] with the condition columns already appended
    Var<T> forward_rows(TapeT<T>& t, Var<T> rows);

    // pixels: [N,3] in [0,1]; cond required iff cfg.cond_dim > 0
    Var<T> forward(TapeT<T>& t, Var<T> pixels, std::optional<Var<T>> cond = std::nullopt);

    // convenience for frozen weights: no gradient bookkeeping
    TensorT<T> apply(const TensorT<T>& pixels, const TensorT<T>* cond = nullptr);

    void collect(ParamList<T>& out, const std::string& prefix);
};

using LutNetwork = LutNetworkT<float>;

// Regular lattice over [0,1]^3 with red varying fastest; density^3 points.
struct ColorLattice {
    int density = 0;
    std::vector<float> coords;  // N x 3 row-major

    std::int64_t count() const { return static_cast<std::int64_t>(coords.size()) / 3; }
};

ColorLattice sample_lattice(int density);

// Adam fit on mean-per-sample L1 with the learning rate cosine-decayed from
// lr to lr/100. inputs: [N, 3+k], targets: [N, 3]. batch == 0 trains
// full-batch; otherwise each step sees `batch` rows drawn deterministically
// from `seed`. The trace has steps+1 entries; entry 0 is the initial loss
// over the full set, subsequent entries are per-step losses.
template <typename T>
std::vector<double> fit_lut(LutNetworkT<T>& net, const TensorT<T>& inputs, const TensorT<T>& targets,
                            int steps, double lr, int batch = 0, std::uint64_t seed = 7);

// Short Adam pre-fit toward the identity color map on a coarse lattice, the
// usual starting point for learned LUTs; without it the sigmoid output pins
// every pixel near mid gray and starves downstream stages early in training.
template <typename T>
void identity_init(LutNetworkT<T>& net, int steps = 300, double lr = 5e-3, std::uint64_t seed = 29);

// Classic .cube text: `LUT_3D_SIZE <n>` then n^3 lines `r g b`, red fastest.
std::string export_cube(LutNetworkT<float>& net, int size, const std::vector<float>* cond = nullptr);

struct CubeData {
    int size = 0;
    std::vector<float> values;  // size^3 * 3, red fastest
};

CubeData parse_cube(const std::string& text);

extern template struct LutNetworkT<float>;
extern template struct LutNetworkT<double>;

}  // namespace uwie
