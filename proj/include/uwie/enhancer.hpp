#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "uwie/lut.hpp"
#include "uwie/nn.hpp"

namespace uwie {

// Multi-stage encoder/decoder built from multi-axis gated-MLP blocks (MAB),
// cross gating on skip connections (CGB) and supervised attention between
// stages (SAM). Stage s emits one restored image per scale, giving an S x N
// output grid; scale n+1 has half the extents of scale n.

struct MaaeConfig {
    int stages = 2;          // S
    int scales = 2;          // N
    int base_channels = 8;   // C at full resolution; doubles per level
    int block_size = 4;      // b: local window extent
    int grid_size = 4;       // g: global lattice extent
    double mlp_expansion = 2.0;
    int depth_per_scale = 1;

    int channels_at(int level) const { return base_channels << level; }
    void validate() const;
    // divisibility by block/grid sizes and 2^(N-1), at every pyramid level
    void check_extents(int H, int W) const;
};

// one gated-MLP branch: expand 1x1 -> split (u,v) -> spatial dense on v
// within block/grid partitions -> u*v -> project 1x1
template <typename T>
struct GatedBranchT {
    ConvT<T> expand;     // c -> e (1x1)
    LinearT<T> spatial;  // [p*p, p*p]
    ConvT<T> proj;       // e/2 -> c (1x1)
    PartMode mode = PartMode::kBlock;
    int p = 0;

    void init(int c, double expansion, PartMode mode_, int p_, Rng& rng);
    Var<T> forward(TapeT<T>& t, Var<T> h);
    void collect(ParamList<T>& out, const std::string& prefix);
};

template <typename T>
struct MabBlockT {
    NormT<T> pre_norm;
    GatedBranchT<T> local_br;   // block partition
    GatedBranchT<T> global_br;  // grid partition
    ConvT<T> out_proj;          // c -> c (1x1)

    void init(int c, const MaaeConfig& cfg, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix);
};

template <typename T>
Var<T> mab_forward(TapeT<T>& t, MabBlockT<T>& blk, Var<T> x);

// multi-axis spatial gate: 1x1 proj -> gelu -> halves through block/grid
// spatial dense layers -> concat
template <typename T>
struct GateNetT {
    ConvT<T> in_proj;          // c -> c (1x1)
    LinearT<T> spatial_block;  // [pb*pb, pb*pb]
    LinearT<T> spatial_grid;   // [pg*pg, pg*pg]
    int pb = 0, pg = 0;

    void init(int c, int pb_, int pg_, Rng& rng);
    Var<T> forward(TapeT<T>& t, Var<T> s);
    void collect(ParamList<T>& out, const std::string& prefix);
};

template <typename T>
struct CgbBlockT {
    ConvT<T> proj_x, proj_y;  // per-input projections (1x1)
    GateNetT<T> gate_x, gate_y;
    ConvT<T> out_x, out_y;  // output projections (1x1)

    void init(int c, const MaaeConfig& cfg, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix);
};

// x' = x + out_x(proj_x(x) * G(y)), y' = y + out_y(proj_y(y) * G(x))
template <typename T>
std::pair<Var<T>, Var<T>> cgb_forward(TapeT<T>& t, CgbBlockT<T>& blk, Var<T> x, Var<T> y);

template <typename T>
struct SamBlockT {
    ConvT<T> img_conv;   // C -> 3 (3x3)
    ConvT<T> mask_conv;  // 3 -> C (3x3)

    void init(int c, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix);
};

// R = I + img_conv(F); M = sigmoid(mask_conv(R)); F_out = F + F*M
template <typename T>
std::pair<Var<T>, Var<T>> sam_forward(TapeT<T>& t, SamBlockT<T>& blk, Var<T> feat, Var<T> image);

template <typename T>
struct StageT {
    std::vector<ConvT<T>> stems;                // per level: 3 -> C_n (3x3)
    std::vector<ConvT<T>> fuse_in;              // level n>=1: 2C_n -> C_n (1x1)
    std::vector<std::vector<MabBlockT<T>>> enc; // per level, depth blocks
    std::vector<ConvT<T>> downs;                // level n: C_n -> C_{n+1} (3x3 stride 2)
    MabBlockT<T> bottleneck;
    std::vector<CgbBlockT<T>> cgbs;             // per level
    std::vector<ConvT<T>> fuse_dec;             // 2C_n -> C_n (1x1)
    std::vector<std::vector<MabBlockT<T>>> dec;
    std::vector<ConvT<T>> ups;                  // level n+1 -> n: C_{n+1} -> C_n (1x1 after resize)
    std::vector<ConvT<T>> heads;                // C_n -> 3 (3x3)

    void init(const MaaeConfig& cfg, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix);
};

template <typename T>
struct StageResult {
    std::vector<Var<T>> outputs;  // one restored image per scale
    Var<T> features;              // full-resolution features for SAM
};

// inputs: N images produced by bilinear halving (scale n has extents H/2^n)
template <typename T>
StageResult<T> stage_forward(TapeT<T>& t, StageT<T>& stage, const MaaeConfig& cfg,
                             std::vector<Var<T>> imgs, std::optional<Var<T>> feat_in);

template <typename T>
struct MaaeModelT {
    MaaeConfig cfg;
    std::vector<StageT<T>> stages;
    std::vector<SamBlockT<T>> sams;  // between consecutive stages

    static MaaeModelT make(const MaaeConfig& cfg, Rng& rng);
    void collect(ParamList<T>& out, const std::string& prefix);
};

// ---------------------------------------------------------------------------
// full pipeline: LUT color correction -> multi-stage enhancement

struct PipelineConfig {
    MaaeConfig maae;
    LutConfig lut;
    bool use_cltcc = true;
    bool use_maae = true;
};

template <typename T>
struct ModelOut {
    std::vector<std::vector<Var<T>>> stage_outputs;  // [S][N]; empty without the enhancer
    Var<T> lut_image;   // color-corrected image (the input when the LUT is disabled)
    Var<T> lut_pixels;  // [H*W,3]; valid iff has_lut
    bool has_lut = false;
    Var<T> final_image;
};

template <typename T>
struct PipelineT {
    PipelineConfig cfg;
    LutNetworkT<T> lut;
    MaaeModelT<T> maae;

    static PipelineT make(const PipelineConfig& cfg, Rng& rng);

    ModelOut<T> forward(TapeT<T>& t, Var<T> image);
    // no-grad convenience; returns the final (unclamped) image
    TensorT<T> enhance(const TensorT<T>& image);
    void collect(ParamList<T>& out);
};

using Pipeline = PipelineT<float>;

extern template struct MabBlockT<float>;
extern template struct MabBlockT<double>;
extern template struct CgbBlockT<float>;
extern template struct CgbBlockT<double>;
extern template struct SamBlockT<float>;
extern template struct SamBlockT<double>;
extern template struct StageT<float>;
extern template struct StageT<double>;
extern template struct MaaeModelT<float>;
extern template struct MaaeModelT<double>;
extern template struct PipelineT<float>;
extern template struct PipelineT<double>;

}  // namespace uwie
