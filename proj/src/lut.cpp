#include "uwie/lut.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "uwie/adam.hpp"

namespace uwie {

template <typename T>
LutNetworkT<T> LutNetworkT<T>::make(const LutConfig& cfg, Rng& rng) {
    if (cfg.hidden_layers < 0 || cfg.hidden_width < 1)
        throw ConfigError("lut: invalid architecture");
    if (cfg.cond_dim < 0) throw ConfigError("lut: cond_dim must be >= 0");
    LutNetworkT<T> net;
    net.cfg = cfg;
    int in = 3 + cfg.cond_dim;
    for (int i = 0; i < cfg.hidden_layers; ++i) {
        LinearT<T> l;
        l.init(in, cfg.hidden_width, rng);
        net.layers.push_back(std::move(l));
        in = cfg.hidden_width;
    }
    LinearT<T> out;
    out.init(in, 3, rng);
    net.layers.push_back(std::move(out));
    return net;
}

template <typename T>
Var<T> LutNetworkT<T>::forward_rows(TapeT<T>& t, Var<T> rows) {
    if (rows.val().rank() != 2 || rows.val().dim(1) != 3 + cfg.cond_dim)
        throw ConfigError("lut: expected rows of width " + std::to_string(3 + cfg.cond_dim) +
                          ", got " + shape_str(rows.val().shape));
    Var<T> h = rows;
    for (size_t i = 0; i + 1 < layers.size(); ++i)
        h = activation(layers[i].forward(t, h), cfg.hidden_act);
    return sigmoid(layers.back().forward(t, h));
}

template <typename T>
Var<T> LutNetworkT<T>::forward(TapeT<T>& t, Var<T> pixels, std::optional<Var<T>> cond) {
    if (pixels.val().rank() != 2 || pixels.val().dim(1) != 3)
        throw ShapeError("lut: pixels must be [N,3], got " + shape_str(pixels.val().shape));
    if (cfg.cond_dim == 0) {
        if (cond.has_value()) throw ConfigError("lut: condition vector given to an unconditional net");
        return forward_rows(t, pixels);
    }
    if (!cond.has_value()) throw ConfigError("lut: conditional net needs a condition vector");
    if (cond->val().size() != cfg.cond_dim)
        throw ConfigError("lut: condition vector has arity " + std::to_string(cond->val().size()) +
                          ", expected " + std::to_string(cfg.cond_dim));
    return forward_rows(t, concat_cols_bcast(pixels, *cond));
}

template <typename T>
TensorT<T> LutNetworkT<T>::apply(const TensorT<T>& pixels, const TensorT<T>* cond) {
    TapeT<T> tape;
    tape.set_grad_enabled(false);
    Var<T> px = tape.leaf(pixels, "pixels");
    std::optional<Var<T>> cv;
    if (cond != nullptr) cv = tape.leaf(*cond, "cond");
    return forward(tape, px, cv).val();
}

template <typename T>
void LutNetworkT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    for (size_t i = 0; i < layers.size(); ++i)
        layers[i].collect(out, prefix + ".l" + std::to_string(i));
}

template struct LutNetworkT<float>;
template struct LutNetworkT<double>;

ColorLattice sample_lattice(int density) {
    if (density < 2) throw ConfigError("sample_lattice: density must be >= 2");
    ColorLattice lat;
    lat.density = density;
    lat.coords.reserve(static_cast<size_t>(density) * density * density * 3);
    for (int b = 0; b < density; ++b) {
        for (int g = 0; g < density; ++g) {
            for (int r = 0; r < density; ++r) {
                lat.coords.push_back(static_cast<float>(r) / (density - 1));
                lat.coords.push_back(static_cast<float>(g) / (density - 1));
                lat.coords.push_back(static_cast<float>(b) / (density - 1));
            }
        }
    }
    return lat;
}

template <typename T>
std::vector<double> fit_lut(LutNetworkT<T>& net, const TensorT<T>& inputs, const TensorT<T>& targets,
                            int steps, double lr, int batch, std::uint64_t seed) {
    if (inputs.rank() != 2 || targets.rank() != 2 || targets.dim(1) != 3)
        throw ShapeError("fit_lut: inputs [N,3+k], targets [N,3]");
    if (inputs.dim(0) != targets.dim(0)) throw ShapeError("fit_lut: input/target counts differ");
    const int n = inputs.dim(0);
    if (n < 1) throw ShapeError("fit_lut: need at least one sample");
    if (steps < 0) throw ConfigError("fit_lut: steps must be >= 0");
    if (batch < 0 || batch > n) batch = 0;

    ParamList<T> params;
    net.collect(params, "lut");
    AdamStateT<T> adam;
    adam.init(params);
    Rng rng(seed);

    auto full_loss = [&]() {
        TapeT<T> tape;
        tape.set_grad_enabled(false);
        Var<T> rows = tape.leaf(inputs, "inputs");
        Var<T> pred = net.forward_rows(tape, rows);
        Var<T> tgt = tape.leaf(targets, "targets");
        return static_cast<double>(mean_all(abs_op(sub(pred, tgt))).val().item());
    };

    std::vector<double> trace;
    trace.reserve(static_cast<size_t>(steps) + 1);
    trace.push_back(full_loss());

    const int width = inputs.dim(1);
    for (int s = 0; s < steps; ++s) {
        TensorT<T> bin, btg;
        const TensorT<T>*pin = &inputs, *ptg = &targets;
        if (batch > 0 && batch < n) {
            bin = TensorT<T>({batch, width});
            btg = TensorT<T>({batch, 3});
            for (int i = 0; i < batch; ++i) {
                const int r = rng.uniform_int(n);
                for (int j = 0; j < width; ++j) bin.at(i, j) = inputs.at(r, j);
                for (int j = 0; j < 3; ++j) btg.at(i, j) = targets.at(r, j);
            }
            pin = &bin;
            ptg = &btg;
        }
        TapeT<T> tape;
        Var<T> rows = tape.leaf(*pin, "inputs");
        Var<T> pred = net.forward_rows(tape, rows);
        Var<T> loss = mean_all(abs_op(sub(pred, tape.leaf(*ptg, "targets"))));
        const double lv = static_cast<double>(loss.val().item());
        if (!std::isfinite(lv))
            throw NumericError("fit_lut: non-finite loss at step " + std::to_string(s));
        tape.backward(loss);
        std::vector<const TensorT<T>*> grads;
        grads.reserve(params.size());
        for (const auto& p : params) grads.push_back(tape.grad_for(p.tensor));
        // cosine decay from lr to lr/100; the L1 objective needs a shrinking
        // step to settle against the saturating output sigmoid
        const double frac = steps > 1 ? static_cast<double>(s) / (steps - 1) : 0.0;
        const double lr_now = 0.01 * lr + 0.5 * (lr - 0.01 * lr) * (1.0 + std::cos(M_PI * frac));
        adam_step(params, grads, adam, lr_now);
        trace.push_back(lv);
    }
    return trace;
}

template std::vector<double> fit_lut<float>(LutNetworkT<float>&, const TensorT<float>&,
                                            const TensorT<float>&, int, double, int, std::uint64_t);
template std::vector<double> fit_lut<double>(LutNetworkT<double>&, const TensorT<double>&,
                                             const TensorT<double>&, int, double, int, std::uint64_t);

template <typename T>
void identity_init(LutNetworkT<T>& net, int steps, double lr, std::uint64_t seed) {
    const ColorLattice lat = sample_lattice(9);
    const int n = static_cast<int>(lat.count());
    TensorT<T> targets({n, 3});
    for (size_t i = 0; i < lat.coords.size(); ++i) targets[static_cast<std::int64_t>(i)] = static_cast<T>(lat.coords[i]);
    TensorT<T> inputs({n, 3 + net.cfg.cond_dim});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) inputs.at(i, c) = targets.at(i, c);
        for (int c = 0; c < net.cfg.cond_dim; ++c) inputs.at(i, 3 + c) = T(0.5);
    }
    fit_lut(net, inputs, targets, steps, lr, 0, seed);
}

template void identity_init<float>(LutNetworkT<float>&, int, double, std::uint64_t);
template void identity_init<double>(LutNetworkT<double>&, int, double, std::uint64_t);

std::string export_cube(LutNetworkT<float>& net, int size, const std::vector<float>* cond) {
    if (size < 2) throw ConfigError("export_cube: size must be >= 2");
    if (net.cfg.cond_dim > 0) {
        if (cond == nullptr || static_cast<int>(cond->size()) != net.cfg.cond_dim)
            throw ConfigError("export_cube: conditional net needs a condition vector of arity " +
                              std::to_string(net.cfg.cond_dim));
    } else if (cond != nullptr && !cond->empty()) {
        throw ConfigError("export_cube: condition vector given to an unconditional net");
    }

    const ColorLattice lat = sample_lattice(size);
    const int n = static_cast<int>(lat.count());
    Tensor pixels({n, 3}, lat.coords);
    Tensor cv;
    const Tensor* cptr = nullptr;
    if (net.cfg.cond_dim > 0) {
        cv = Tensor({net.cfg.cond_dim}, *cond);
        cptr = &cv;
    }
    const Tensor out = net.apply(pixels, cptr);

    std::string text = "LUT_3D_SIZE " + std::to_string(size) + "\n";
    char line[96];
    for (int i = 0; i < n; ++i) {
        std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", static_cast<double>(out.at(i, 0)),
                      static_cast<double>(out.at(i, 1)), static_cast<double>(out.at(i, 2)));
        text += line;
    }
    return text;
}

CubeData parse_cube(const std::string& text) {
    CubeData cube;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // strip comments and whitespace-only lines
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;
        if (tok == "TITLE" || tok == "DOMAIN_MIN" || tok == "DOMAIN_MAX" || tok == "LUT_1D_SIZE") {
            if (tok == "LUT_1D_SIZE")
                throw FormatError("cube: 1D LUTs are not supported (line " + std::to_string(lineno) + ")");
            continue;
        }
        if (tok == "LUT_3D_SIZE") {
            if (!(ls >> cube.size) || cube.size < 2)
                throw FormatError("cube: bad LUT_3D_SIZE at line " + std::to_string(lineno));
            continue;
        }
        // data row
        float r, g, b;
        std::istringstream ds(line);
        if (!(ds >> r >> g >> b))
            throw FormatError("cube: malformed data row at line " + std::to_string(lineno));
        cube.values.push_back(r);
        cube.values.push_back(g);
        cube.values.push_back(b);
    }
    if (cube.size == 0) throw FormatError("cube: missing LUT_3D_SIZE header");
    const std::int64_t expect = static_cast<std::int64_t>(cube.size) * cube.size * cube.size * 3;
    if (static_cast<std::int64_t>(cube.values.size()) != expect)
        throw FormatError("cube: expected " + std::to_string(expect / 3) + " rows, got " +
                          std::to_string(cube.values.size() / 3));
    return cube;
}

}  // namespace uwie
