#include "uwie/enhancer.hpp"

#include <cmath>

namespace uwie {

namespace {
// gating spatial layers start near zero so every block opens as an identity
constexpr double kGateInitScale = 1e-3;

int expanded_channels(int c, double expansion) {
    const int e = 2 * std::max(1, static_cast<int>(std::lround(c * expansion / 2.0)));
    return e;
}
}  // namespace

void MaaeConfig::validate() const {
    if (stages < 1) throw ConfigError("maae: stages must be >= 1");
    if (scales < 1) throw ConfigError("maae: scales must be >= 1");
    if (base_channels < 2 || base_channels % 2 != 0)
        throw ConfigError("maae: base_channels must be even and >= 2");
    if (block_size < 1 || grid_size < 1) throw ConfigError("maae: block/grid sizes must be >= 1");
    if (mlp_expansion <= 0.0) throw ConfigError("maae: mlp_expansion must be positive");
    if (depth_per_scale < 1) throw ConfigError("maae: depth_per_scale must be >= 1");
}

void MaaeConfig::check_extents(int H, int W) const {
    const int down = 1 << (scales - 1);
    if (H % down != 0 || W % down != 0)
        throw ShapeError("maae: extents " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible by 2^(N-1)=" + std::to_string(down));
    for (int n = 0; n < scales; ++n) {
        const int h = H >> n, w = W >> n;
        if (h % block_size != 0 || w % block_size != 0 || h % grid_size != 0 || w % grid_size != 0)
            throw ShapeError("maae: level " + std::to_string(n) + " extents " + std::to_string(h) +
                             "x" + std::to_string(w) + " not divisible by block/grid size");
    }
}

// ---------------------------------------------------------------------------
// gated branch

template <typename T>
void GatedBranchT<T>::init(int c, double expansion, PartMode mode_, int p_, Rng& rng) {
    mode = mode_;
    p = p_;
    const int e = expanded_channels(c, expansion);
    expand.init(c, e, 1, 1, Pad::kSame, rng);
    spatial.init(p * p, p * p, rng, kGateInitScale);
    proj.init(e / 2, c, 1, 1, Pad::kSame, rng);
}

template <typename T>
Var<T> GatedBranchT<T>::forward(TapeT<T>& t, Var<T> h) {
    const int H = h.val().dim(1), W = h.val().dim(2);
    Var<T> e = expand.forward(t, h);
    const int E = e.val().dim(0);
    Var<T> u = slice_channels(e, 0, E / 2);
    Var<T> v = slice_channels(e, E / 2, E / 2);
    Var<T> vp = partition(v, mode, p);
    const int G = vp.val().dim(0), cv = vp.val().dim(1), P = vp.val().dim(2);
    Var<T> vs = spatial.forward(t, reshape(vp, {G * cv, P}));
    Var<T> vr = unpartition(reshape(vs, {G, cv, P}), mode, p, H, W);
    return proj.forward(t, mul(u, vr));
}

template <typename T>
void GatedBranchT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    expand.collect(out, prefix + ".expand");
    spatial.collect(out, prefix + ".spatial");
    proj.collect(out, prefix + ".proj");
}

// ---------------------------------------------------------------------------
// MAB

template <typename T>
void MabBlockT<T>::init(int c, const MaaeConfig& cfg, Rng& rng) {
    if (c % 2 != 0) throw ConfigError("mab: channel count must be even");
    pre_norm.init(c);
    local_br.init(c / 2, cfg.mlp_expansion, PartMode::kBlock, cfg.block_size, rng);
    global_br.init(c / 2, cfg.mlp_expansion, PartMode::kGrid, cfg.grid_size, rng);
    out_proj.init(c, c, 1, 1, Pad::kSame, rng);
}

template <typename T>
Var<T> mab_forward(TapeT<T>& t, MabBlockT<T>& blk, Var<T> x) {
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 3) throw ShapeError("mab: expected [C,H,W]");
    const int C = xv.dim(0);
    Var<T> h = blk.pre_norm.forward(t, x, 0);
    Var<T> h1 = slice_channels(h, 0, C / 2);
    Var<T> h2 = slice_channels(h, C / 2, C / 2);
    Var<T> b1 = blk.local_br.forward(t, h1);
    Var<T> b2 = blk.global_br.forward(t, h2);
    Var<T> y = blk.out_proj.forward(t, concat_channels(b1, b2));
    return add(x, y);
}

template <typename T>
void MabBlockT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    pre_norm.collect(out, prefix + ".norm");
    local_br.collect(out, prefix + ".local");
    global_br.collect(out, prefix + ".global");
    out_proj.collect(out, prefix + ".out");
}

// ---------------------------------------------------------------------------
// CGB

template <typename T>
void GateNetT<T>::init(int c, int pb_, int pg_, Rng& rng) {
    if (c % 2 != 0) throw ConfigError("cgb gate: channel count must be even");
    pb = pb_;
    pg = pg_;
    in_proj.init(c, c, 1, 1, Pad::kSame, rng);
    spatial_block.init(pb * pb, pb * pb, rng, kGateInitScale);
    spatial_grid.init(pg * pg, pg * pg, rng, kGateInitScale);
}

template <typename T>
Var<T> GateNetT<T>::forward(TapeT<T>& t, Var<T> s) {
    const int C = s.val().dim(0), H = s.val().dim(1), W = s.val().dim(2);
    Var<T> a = gelu(in_proj.forward(t, s));
    Var<T> a1 = slice_channels(a, 0, C / 2);
    Var<T> a2 = slice_channels(a, C / 2, C / 2);
    auto spatial_mix = [&](Var<T> v, LinearT<T>& lin, PartMode mode, int p) {
        Var<T> vp = partition(v, mode, p);
        const int G = vp.val().dim(0), cv = vp.val().dim(1), P = vp.val().dim(2);
        Var<T> vs = lin.forward(t, reshape(vp, {G * cv, P}));
        return unpartition(reshape(vs, {G, cv, P}), mode, p, H, W);
    };
    Var<T> g1 = spatial_mix(a1, spatial_block, PartMode::kBlock, pb);
    Var<T> g2 = spatial_mix(a2, spatial_grid, PartMode::kGrid, pg);
    return concat_channels(g1, g2);
}

template <typename T>
void GateNetT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    in_proj.collect(out, prefix + ".in");
    spatial_block.collect(out, prefix + ".sb");
    spatial_grid.collect(out, prefix + ".sg");
}

template <typename T>
void CgbBlockT<T>::init(int c, const MaaeConfig& cfg, Rng& rng) {
    proj_x.init(c, c, 1, 1, Pad::kSame, rng);
    proj_y.init(c, c, 1, 1, Pad::kSame, rng);
    gate_x.init(c, cfg.block_size, cfg.grid_size, rng);
    gate_y.init(c, cfg.block_size, cfg.grid_size, rng);
    out_x.init(c, c, 1, 1, Pad::kSame, rng);
    out_y.init(c, c, 1, 1, Pad::kSame, rng);
}

template <typename T>
std::pair<Var<T>, Var<T>> cgb_forward(TapeT<T>& t, CgbBlockT<T>& blk, Var<T> x, Var<T> y) {
    if (!same_shape(x.val().shape, y.val().shape))
        throw ShapeError("cgb: stream shapes differ, " + shape_str(x.val().shape) + " vs " +
                         shape_str(y.val().shape));
    Var<T> xh = blk.proj_x.forward(t, x);
    Var<T> yh = blk.proj_y.forward(t, y);
    Var<T> gx = blk.gate_x.forward(t, x);
    Var<T> gy = blk.gate_y.forward(t, y);
    Var<T> xo = add(x, blk.out_x.forward(t, mul(xh, gy)));
    Var<T> yo = add(y, blk.out_y.forward(t, mul(yh, gx)));
    return {xo, yo};
}

template <typename T>
void CgbBlockT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    proj_x.collect(out, prefix + ".px");
    proj_y.collect(out, prefix + ".py");
    gate_x.collect(out, prefix + ".gx");
    gate_y.collect(out, prefix + ".gy");
    out_x.collect(out, prefix + ".ox");
    out_y.collect(out, prefix + ".oy");
}

// ---------------------------------------------------------------------------
// SAM

template <typename T>
void SamBlockT<T>::init(int c, Rng& rng) {
    img_conv.init(c, 3, 3, 1, Pad::kSame, rng);
    mask_conv.init(3, c, 3, 1, Pad::kSame, rng);
}

template <typename T>
std::pair<Var<T>, Var<T>> sam_forward(TapeT<T>& t, SamBlockT<T>& blk, Var<T> feat, Var<T> image) {
    const TensorT<T>&fv = feat.val(), &iv = image.val();
    if (fv.rank() != 3 || iv.rank() != 3 || fv.dim(1) != iv.dim(1) || fv.dim(2) != iv.dim(2))
        throw ShapeError("sam: feature/image extents differ, " + shape_str(fv.shape) + " vs " +
                         shape_str(iv.shape));
    Var<T> restored = add(image, blk.img_conv.forward(t, feat));
    Var<T> mask = sigmoid(blk.mask_conv.forward(t, restored));
    Var<T> feat_out = add(feat, mul(feat, mask));
    return {feat_out, restored};
}

template <typename T>
void SamBlockT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    img_conv.collect(out, prefix + ".img");
    mask_conv.collect(out, prefix + ".mask");
}

// ---------------------------------------------------------------------------
// stage

template <typename T>
void StageT<T>::init(const MaaeConfig& cfg, Rng& rng) {
    const int N = cfg.scales;
    stems.resize(N);
    fuse_in.resize(N);
    enc.resize(N);
    downs.resize(N > 1 ? N - 1 : 0);
    cgbs.resize(N);
    fuse_dec.resize(N);
    dec.resize(N);
    ups.resize(N > 1 ? N - 1 : 0);
    heads.resize(N);
    for (int n = 0; n < N; ++n) {
        const int c = cfg.channels_at(n);
        stems[n].init(3, c, 3, 1, Pad::kSame, rng);
        if (n > 0) fuse_in[n].init(2 * c, c, 1, 1, Pad::kSame, rng);
        enc[n].resize(cfg.depth_per_scale);
        for (auto& blk : enc[n]) blk.init(c, cfg, rng);
        if (n + 1 < N) downs[n].init(c, cfg.channels_at(n + 1), 3, 2, Pad::kSame, rng);
        cgbs[n].init(c, cfg, rng);
        fuse_dec[n].init(2 * c, c, 1, 1, Pad::kSame, rng);
        dec[n].resize(cfg.depth_per_scale);
        for (auto& blk : dec[n]) blk.init(c, cfg, rng);
        if (n > 0) ups[n - 1].init(c, cfg.channels_at(n - 1), 1, 1, Pad::kSame, rng);
        heads[n].init(c, 3, 3, 1, Pad::kSame, rng);
    }
    bottleneck.init(cfg.channels_at(N - 1), cfg, rng);
}

template <typename T>
StageResult<T> stage_forward(TapeT<T>& t, StageT<T>& stage, const MaaeConfig& cfg,
                             std::vector<Var<T>> imgs, std::optional<Var<T>> feat_in) {
    const int N = cfg.scales;
    if (static_cast<int>(imgs.size()) != N) throw ShapeError("stage: expected one image per scale");

    std::vector<Var<T>> skip(static_cast<size_t>(N));
    Var<T> down_prev;
    for (int n = 0; n < N; ++n) {
        Var<T> s = stage.stems[n].forward(t, imgs[static_cast<size_t>(n)]);
        Var<T> x;
        if (n == 0) {
            x = feat_in.has_value() ? add(s, *feat_in) : s;
        } else {
            x = stage.fuse_in[n].forward(t, concat_channels(s, down_prev));
        }
        for (auto& blk : stage.enc[n]) x = mab_forward(t, blk, x);
        skip[static_cast<size_t>(n)] = x;
        if (n + 1 < N) down_prev = stage.downs[n].forward(t, x);
    }

    Var<T> y = mab_forward(t, stage.bottleneck, skip[static_cast<size_t>(N - 1)]);

    std::vector<Var<T>> outs(static_cast<size_t>(N));
    Var<T> feat;
    for (int n = N - 1; n >= 0; --n) {
        auto [sx, sy] = cgb_forward(t, stage.cgbs[n], skip[static_cast<size_t>(n)], y);
        Var<T> z = stage.fuse_dec[n].forward(t, concat_channels(sx, sy));
        for (auto& blk : stage.dec[n]) z = mab_forward(t, blk, z);
        outs[static_cast<size_t>(n)] = add(imgs[static_cast<size_t>(n)], stage.heads[n].forward(t, z));
        if (n > 0) {
            const TensorT<T>& zv = z.val();
            y = stage.ups[n - 1].forward(t, bilinear_resize(z, zv.dim(1) * 2, zv.dim(2) * 2));
        } else {
            feat = z;
        }
    }
    return {std::move(outs), feat};
}

template <typename T>
void StageT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    const int N = static_cast<int>(stems.size());
    for (int n = 0; n < N; ++n) {
        const std::string lvl = prefix + ".l" + std::to_string(n);
        stems[n].collect(out, lvl + ".stem");
        if (n > 0) fuse_in[n].collect(out, lvl + ".fuse_in");
        for (size_t d = 0; d < enc[n].size(); ++d)
            enc[n][d].collect(out, lvl + ".enc" + std::to_string(d));
        if (n + 1 < N) downs[n].collect(out, lvl + ".down");
        cgbs[n].collect(out, lvl + ".cgb");
        fuse_dec[n].collect(out, lvl + ".fuse_dec");
        for (size_t d = 0; d < dec[n].size(); ++d)
            dec[n][d].collect(out, lvl + ".dec" + std::to_string(d));
        if (n > 0) ups[n - 1].collect(out, lvl + ".up");
        heads[n].collect(out, lvl + ".head");
    }
    bottleneck.collect(out, prefix + ".bottleneck");
}

// ---------------------------------------------------------------------------
// model + pipeline

template <typename T>
MaaeModelT<T> MaaeModelT<T>::make(const MaaeConfig& cfg, Rng& rng) {
    cfg.validate();
    MaaeModelT<T> m;
    m.cfg = cfg;
    m.stages.resize(static_cast<size_t>(cfg.stages));
    for (auto& st : m.stages) st.init(cfg, rng);
    m.sams.resize(static_cast<size_t>(cfg.stages - 1));
    for (auto& sam : m.sams) sam.init(cfg.base_channels, rng);
    return m;
}

template <typename T>
void MaaeModelT<T>::collect(ParamList<T>& out, const std::string& prefix) {
    for (size_t s = 0; s < stages.size(); ++s)
        stages[s].collect(out, prefix + ".s" + std::to_string(s));
    for (size_t s = 0; s < sams.size(); ++s)
        sams[s].collect(out, prefix + ".sam" + std::to_string(s));
}

template <typename T>
PipelineT<T> PipelineT<T>::make(const PipelineConfig& cfg, Rng& rng) {
    PipelineT<T> p;
    p.cfg = cfg;
    if (cfg.use_cltcc) p.lut = LutNetworkT<T>::make(cfg.lut, rng);
    if (cfg.use_maae) p.maae = MaaeModelT<T>::make(cfg.maae, rng);
    if (!cfg.use_cltcc && !cfg.use_maae)
        throw ConfigError("pipeline: at least one of the LUT and the enhancer must be enabled");
    return p;
}

template <typename T>
ModelOut<T> PipelineT<T>::forward(TapeT<T>& t, Var<T> image) {
    const TensorT<T>& iv = image.val();
    if (iv.rank() != 3 || iv.dim(0) != 3) throw ShapeError("pipeline: expected a [3,H,W] image");
    const int H = iv.dim(1), W = iv.dim(2);

    ModelOut<T> out;
    out.lut_image = image;
    if (cfg.use_cltcc) {
        // the condition vector reads the raw image, so build it before any op
        // grows the tape (val() references do not survive pushes)
        std::optional<Var<T>> cond;
        if (lut.cfg.cond_dim > 0) {
            if (lut.cfg.cond_dim != 3)
                throw ConfigError("pipeline: condition vector is the mean RGB, cond_dim must be 3");
            TensorT<T> c(Shape{3});
            const std::int64_t plane = static_cast<std::int64_t>(H) * W;
            for (int ch = 0; ch < 3; ++ch) {
                double m = 0.0;
                for (std::int64_t i = 0; i < plane; ++i) m += static_cast<double>(iv[ch * plane + i]);
                c[ch] = static_cast<T>(m / static_cast<double>(plane));
            }
            cond = t.leaf(std::move(c), "cond");
        }
        Var<T> px = transpose2d(reshape(image, {3, H * W}));
        out.lut_pixels = lut.forward(t, px, cond);
        out.lut_image = reshape(transpose2d(out.lut_pixels), {3, H, W});
        out.has_lut = true;
    }

    if (!cfg.use_maae) {
        out.final_image = out.lut_image;
        return out;
    }

    cfg.maae.check_extents(H, W);
    const int S = cfg.maae.stages, N = cfg.maae.scales;
    Var<T> cur = out.lut_image;
    std::optional<Var<T>> feat_in;
    for (int s = 0; s < S; ++s) {
        std::vector<Var<T>> imgs;
        imgs.reserve(static_cast<size_t>(N));
        imgs.push_back(cur);
        for (int n = 1; n < N; ++n) imgs.push_back(bilinear_resize(cur, H >> n, W >> n));
        StageResult<T> res = stage_forward(t, maae.stages[static_cast<size_t>(s)], cfg.maae,
                                           std::move(imgs), feat_in);
        out.stage_outputs.push_back(res.outputs);
        if (s + 1 < S) {
            auto [fo, restored] = sam_forward(t, maae.sams[static_cast<size_t>(s)], res.features,
                                              res.outputs[0]);
            feat_in = fo;
            cur = restored;
        }
    }
    out.final_image = out.stage_outputs.back().front();
    return out;
}

template <typename T>
TensorT<T> PipelineT<T>::enhance(const TensorT<T>& image) {
    TapeT<T> tape;
    tape.set_grad_enabled(false);
    Var<T> in = tape.leaf(image, "image");
    return forward(tape, in).final_image.val();
}

template <typename T>
void PipelineT<T>::collect(ParamList<T>& out) {
    if (cfg.use_cltcc) lut.collect(out, "lut");
    if (cfg.use_maae) maae.collect(out, "maae");
}

// ---------------------------------------------------------------------------

#define UWIE_INSTANTIATE_MODEL(T)                                                        \
    template struct GatedBranchT<T>;                                                     \
    template struct MabBlockT<T>;                                                        \
    template struct GateNetT<T>;                                                         \
    template struct CgbBlockT<T>;                                                        \
    template struct SamBlockT<T>;                                                        \
    template struct StageT<T>;                                                           \
    template struct MaaeModelT<T>;                                                       \
    template struct PipelineT<T>;                                                        \
    template Var<T> mab_forward<T>(TapeT<T>&, MabBlockT<T>&, Var<T>);                    \
    template std::pair<Var<T>, Var<T>> cgb_forward<T>(TapeT<T>&, CgbBlockT<T>&, Var<T>, Var<T>); \
    template std::pair<Var<T>, Var<T>> sam_forward<T>(TapeT<T>&, SamBlockT<T>&, Var<T>, Var<T>); \
    template StageResult<T> stage_forward<T>(TapeT<T>&, StageT<T>&, const MaaeConfig&,   \
                                             std::vector<Var<T>>, std::optional<Var<T>>);

UWIE_INSTANTIATE_MODEL(float)
UWIE_INSTANTIATE_MODEL(double)

#undef UWIE_INSTANTIATE_MODEL

}  // namespace uwie
