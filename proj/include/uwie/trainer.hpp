#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uwie/adam.hpp"
#include "uwie/config.hpp"
#include "uwie/data.hpp"
#include "uwie/enhancer.hpp"
#include "uwie/losses.hpp"

namespace uwie {

struct TrainConfig {
    double lr_init = 2e-4;
    double lr_min = 1e-6;
    int epochs = 200;
    int batch = 4;
    int max_steps = 0;  // 0 = limited by epochs only
    std::uint64_t seed = 1234;
    double clip_norm = 1.0;
    int checkpoint_every = 25;
    int val_every = 1;
    double val_fraction = 0.0;  // 0 -> validate on the full training set
    int cltcc_pixels = 4096;    // pixel pairs per image for the LUT loss
    bool gt_in_loss = true;     // L_GT participates in the optimized objective
    bool lut_identity_init = true;  // pre-fit the LUT to the identity map
    LossConfig loss;
    PipelineConfig model;
    AugmentConfig augment;

    void validate() const;
    static TrainConfig from_kv(const KvConfig& kv);
    KvConfig to_kv() const;
};

// cosine schedule between the configured endpoints
double lr_at_epoch(int e, const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double lr = 0, l_total = 0, l_cltcc = 0, l_maae = 0, l_gt = 0;
    double val_psnr = 0, val_ssim = 0;
};

std::string history_csv(const std::vector<EpochRecord>& records);

struct TrainResult {
    Pipeline model;
    std::vector<EpochRecord> history;
    int steps_done = 0;
};

// ---------------------------------------------------------------------------
// checkpoints: magic MACL, version, resolved config text, named parameter
// table (f32 little-endian), optional optimizer state, RNG state.

struct Checkpoint {
    KvConfig config;
    int epochs_done = 0;
    std::uint64_t rng_state = 0;
    Pipeline model;
    bool has_optimizer = false;
    AdamState adam;
};

void save_checkpoint(const std::string& path, Pipeline& model, const KvConfig& config,
                     int epochs_done, std::uint64_t rng_state, const AdamState* adam);
Checkpoint load_checkpoint(const std::string& path);

PipelineConfig pipeline_config_from_kv(const KvConfig& kv);

// ---------------------------------------------------------------------------

using SampleLoader = std::function<SamplePair(size_t)>;

TrainResult train_run(const SampleLoader& loader, size_t n_pairs, const TrainConfig& cfg,
                      const std::string& out_dir = "", const Checkpoint* resume = nullptr);
TrainResult train_run(const PairedDataset& ds, const TrainConfig& cfg,
                      const std::string& out_dir = "", const Checkpoint* resume = nullptr);
TrainResult train_run(const Batch& pairs, const TrainConfig& cfg, const std::string& out_dir = "",
                      const Checkpoint* resume = nullptr);

// losses of one sample under the full objective (used by the trainer and by
// verification code); gradients accumulate into grad_accum when it is given.
struct SampleLosses {
    double total = 0, cltcc = 0, maae = 0, gt = 0;
};
SampleLosses compute_sample_losses(Pipeline& model, const SamplePair& sample, const TrainConfig& cfg,
                                   ParamList<float>* params, std::vector<Tensor>* grad_accum);

// forward + clamp for metrics and file output
Image enhance_image(Pipeline& model, const Image& input);

struct EvalRow {
    std::string name;
    double psnr_db = 0;
    double ssim = 0;
};
std::string evaluation_csv(const std::vector<EvalRow>& rows);  // with trailing mean row

}  // namespace uwie
