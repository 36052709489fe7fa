#include "uwie/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "uwie/metrics.hpp"

namespace uwie {

void TrainConfig::validate() const {
    if (lr_min > lr_init) throw ConfigError("train: lr_min must be <= lr_init");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("train: val_fraction must be in [0,1)");
    if (cltcc_pixels < 1) throw ConfigError("train: cltcc_pixels must be >= 1");
    loss.validate();
    if (model.use_maae) model.maae.validate();
    augment.validate();
}

double lr_at_epoch(int e, const TrainConfig& cfg) {
    if (e < 0 || e >= std::max(cfg.epochs, 1))
        throw ConfigError("lr_at_epoch: epoch " + std::to_string(e) + " out of range");
    if (cfg.epochs <= 1) return cfg.lr_init;
    const double t = static_cast<double>(e) / (cfg.epochs - 1);
    return cfg.lr_min + 0.5 * (cfg.lr_init - cfg.lr_min) * (1.0 + std::cos(M_PI * t));
}

// ---------------------------------------------------------------------------
// config <-> kv

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
    TrainConfig c;
    c.lr_init = kv.get_double("lr_init", c.lr_init);
    c.lr_min = kv.get_double("lr_min", c.lr_min);
    c.epochs = kv.get_int("epochs", c.epochs);
    c.batch = kv.get_int("batch", c.batch);
    c.max_steps = kv.get_int("max_steps", c.max_steps);
    c.seed = static_cast<std::uint64_t>(kv.get_double("seed", static_cast<double>(c.seed)));
    c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
    c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
    c.val_every = kv.get_int("val_every", c.val_every);
    c.val_fraction = kv.get_double("val_fraction", c.val_fraction);
    c.cltcc_pixels = kv.get_int("cltcc_pixels", c.cltcc_pixels);
    c.gt_in_loss = kv.get_bool("gt_in_loss", c.gt_in_loss);
    c.lut_identity_init = kv.get_bool("lut_identity_init", c.lut_identity_init);

    c.loss.eps_char = kv.get_double("eps_char", c.loss.eps_char);
    c.loss.lambda_freq = kv.get_double("lambda_freq", c.loss.lambda_freq);
    c.loss.w_ssim = kv.get_double("w_ssim", c.loss.w_ssim);
    c.loss.w_cltcc = kv.get_double("w_cltcc", c.loss.w_cltcc);
    c.loss.w_maae = kv.get_double("w_maae", c.loss.w_maae);
    c.loss.psnr_cap_db = kv.get_double("psnr_cap_db", c.loss.psnr_cap_db);

    c.model = pipeline_config_from_kv(kv);

    c.augment.crop = kv.get_int("crop", c.augment.crop);
    c.augment.p_flip_h = static_cast<float>(kv.get_double("p_flip_h", c.augment.p_flip_h));
    c.augment.p_rot90 = static_cast<float>(kv.get_double("p_rot90", c.augment.p_rot90));
    c.augment.mixup_alpha = static_cast<float>(kv.get_double("mixup_alpha", c.augment.mixup_alpha));
    c.augment.crop_enabled = kv.get_bool("crop_enabled", c.augment.crop_enabled);
    c.augment.flip_enabled = kv.get_bool("flip_enabled", c.augment.flip_enabled);
    c.augment.rot_enabled = kv.get_bool("rot_enabled", c.augment.rot_enabled);
    c.augment.mixup_enabled = kv.get_bool("mixup_enabled", c.augment.mixup_enabled);
    return c;
}

PipelineConfig pipeline_config_from_kv(const KvConfig& kv) {
    PipelineConfig m;
    m.maae.stages = kv.get_int("stages", m.maae.stages);
    m.maae.scales = kv.get_int("scales", m.maae.scales);
    m.maae.base_channels = kv.get_int("base_channels", m.maae.base_channels);
    m.maae.block_size = kv.get_int("block_size", m.maae.block_size);
    m.maae.grid_size = kv.get_int("grid_size", m.maae.grid_size);
    m.maae.mlp_expansion = kv.get_double("mlp_expansion", m.maae.mlp_expansion);
    m.maae.depth_per_scale = kv.get_int("depth_per_scale", m.maae.depth_per_scale);
    m.lut.hidden_layers = kv.get_int("lut_hidden_layers", m.lut.hidden_layers);
    m.lut.hidden_width = kv.get_int("lut_hidden_width", m.lut.hidden_width);
    m.lut.cond_dim = kv.get_int("lut_cond_dim", m.lut.cond_dim);
    m.use_cltcc = !kv.get_bool("no_cltcc", false);
    m.use_maae = !kv.get_bool("no_maae", false);
    return m;
}

KvConfig TrainConfig::to_kv() const {
    KvConfig kv;
    auto num = [](double v) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    kv.set("lr_init", num(lr_init));
    kv.set("lr_min", num(lr_min));
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch", std::to_string(batch));
    kv.set("max_steps", std::to_string(max_steps));
    kv.set("seed", std::to_string(seed));
    kv.set("clip_norm", num(clip_norm));
    kv.set("checkpoint_every", std::to_string(checkpoint_every));
    kv.set("val_every", std::to_string(val_every));
    kv.set("val_fraction", num(val_fraction));
    kv.set("cltcc_pixels", std::to_string(cltcc_pixels));
    kv.set("gt_in_loss", gt_in_loss ? "true" : "false");
    kv.set("lut_identity_init", lut_identity_init ? "true" : "false");
    kv.set("eps_char", num(loss.eps_char));
    kv.set("lambda_freq", num(loss.lambda_freq));
    kv.set("w_ssim", num(loss.w_ssim));
    kv.set("w_cltcc", num(loss.w_cltcc));
    kv.set("w_maae", num(loss.w_maae));
    kv.set("psnr_cap_db", num(loss.psnr_cap_db));
    kv.set("stages", std::to_string(model.maae.stages));
    kv.set("scales", std::to_string(model.maae.scales));
    kv.set("base_channels", std::to_string(model.maae.base_channels));
    kv.set("block_size", std::to_string(model.maae.block_size));
    kv.set("grid_size", std::to_string(model.maae.grid_size));
    kv.set("mlp_expansion", num(model.maae.mlp_expansion));
    kv.set("depth_per_scale", std::to_string(model.maae.depth_per_scale));
    kv.set("lut_hidden_layers", std::to_string(model.lut.hidden_layers));
    kv.set("lut_hidden_width", std::to_string(model.lut.hidden_width));
    kv.set("lut_cond_dim", std::to_string(model.lut.cond_dim));
    kv.set("no_cltcc", model.use_cltcc ? "false" : "true");
    kv.set("no_maae", model.use_maae ? "false" : "true");
    kv.set("crop", std::to_string(augment.crop));
    kv.set("p_flip_h", num(augment.p_flip_h));
    kv.set("p_rot90", num(augment.p_rot90));
    kv.set("mixup_alpha", num(augment.mixup_alpha));
    kv.set("crop_enabled", augment.crop_enabled ? "true" : "false");
    kv.set("flip_enabled", augment.flip_enabled ? "true" : "false");
    kv.set("rot_enabled", augment.rot_enabled ? "true" : "false");
    kv.set("mixup_enabled", augment.mixup_enabled ? "true" : "false");
    return kv;
}

// ---------------------------------------------------------------------------
// checkpoint io (little-endian throughout; this code assumes an LE host)

namespace {

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
    const std::vector<unsigned char>& bytes;
    size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError("checkpoint: " + what + " at byte offset " + std::to_string(pos));
    }
    void need(size_t n) const {
        if (pos + n > bytes.size()) fail("truncated (need " + std::to_string(n) + " more bytes)");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + pos, 8);
        pos += 8;
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
        pos += n;
        return s;
    }
    void floats(float* dst, size_t n) {
        need(n * 4);
        std::memcpy(dst, bytes.data() + pos, n * 4);
        pos += n * 4;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, Pipeline& model, const KvConfig& config,
                     int epochs_done, std::uint64_t rng_state, const AdamState* adam) {
    ParamList<float> params;
    model.collect(params);
    if (adam != nullptr && adam->m.size() != params.size())
        throw StateError("checkpoint: optimizer state does not match the parameter table");

    std::string out;
    out += "MACL";
    put_u32(out, 1);  // version
    const std::string cfg_text = config.serialize();
    put_u64(out, cfg_text.size());
    out += cfg_text;
    put_u32(out, static_cast<std::uint32_t>(epochs_done));
    put_u64(out, rng_state);
    out.push_back(adam != nullptr ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put_u32(out, static_cast<std::uint32_t>(p.tensor->rank()));
        for (int d : p.tensor->shape) put_u32(out, static_cast<std::uint32_t>(d));
        out.append(reinterpret_cast<const char*>(p.tensor->ptr()),
                   static_cast<size_t>(p.tensor->size()) * 4);
    }
    if (adam != nullptr) {
        put_u64(out, static_cast<std::uint64_t>(adam->step));
        for (size_t i = 0; i < params.size(); ++i) {
            out.append(reinterpret_cast<const char*>(adam->m[i].ptr()),
                       static_cast<size_t>(adam->m[i].size()) * 4);
            out.append(reinterpret_cast<const char*>(adam->v[i].ptr()),
                       static_cast<size_t>(adam->v[i].size()) * 4);
        }
    }
    write_file(path, out.data(), out.size());
}

Checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    if (r.str(4) != "MACL") {
        r.pos = 0;
        r.fail("bad magic (expected MACL)");
    }
    const std::uint32_t version = r.u32();
    if (version != 1) r.fail("unknown format version " + std::to_string(version));

    Checkpoint ck;
    const std::uint64_t cfg_len = r.u64();
    ck.config = KvConfig::parse_text(r.str(static_cast<size_t>(cfg_len)));
    ck.epochs_done = static_cast<int>(r.u32());
    ck.rng_state = r.u64();
    r.need(1);
    ck.has_optimizer = bytes[r.pos++] != 0;

    Rng init_rng(static_cast<std::uint64_t>(ck.config.get_double("seed", 0)));
    ck.model = Pipeline::make(pipeline_config_from_kv(ck.config), init_rng);
    ParamList<float> params;
    ck.model.collect(params);

    const std::uint32_t count = r.u32();
    if (count != params.size())
        r.fail("parameter table has " + std::to_string(count) + " entries, model expects " +
               std::to_string(params.size()));
    for (auto& p : params) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        if (name != p.name) r.fail("parameter '" + name + "' does not match expected '" + p.name + "'");
        const std::uint32_t rank = r.u32();
        if (rank != static_cast<std::uint32_t>(p.tensor->rank())) r.fail("rank mismatch for " + name);
        for (int d : p.tensor->shape) {
            const std::uint32_t got = r.u32();
            if (got != static_cast<std::uint32_t>(d)) r.fail("extent mismatch for " + name);
        }
        r.floats(p.tensor->ptr(), static_cast<size_t>(p.tensor->size()));
    }
    if (ck.has_optimizer) {
        ck.adam.init(params);
        ck.adam.step = static_cast<std::int64_t>(r.u64());
        for (size_t i = 0; i < params.size(); ++i) {
            r.floats(ck.adam.m[i].ptr(), static_cast<size_t>(ck.adam.m[i].size()));
            r.floats(ck.adam.v[i].ptr(), static_cast<size_t>(ck.adam.v[i].size()));
        }
    }
    if (r.pos != bytes.size()) r.fail("trailing bytes");
    return ck;
}

// ---------------------------------------------------------------------------
// per-sample losses

namespace {

std::vector<int> pixel_subset(int total, int want, Rng& rng) {
    std::vector<int> idx;
    if (want >= total) {
        idx.resize(static_cast<size_t>(total));
        std::iota(idx.begin(), idx.end(), 0);
        return idx;
    }
    idx.reserve(static_cast<size_t>(want));
    for (int i = 0; i < want; ++i) idx.push_back(rng.uniform_int(total));
    return idx;
}

}  // namespace

SampleLosses compute_sample_losses(Pipeline& model, const SamplePair& sample, const TrainConfig& cfg,
                                   ParamList<float>* params, std::vector<Tensor>* grad_accum) {
    Tape tape;
    if (params == nullptr) tape.set_grad_enabled(false);
    Var<float> img = tape.leaf(sample.input, "input");
    ModelOut<float> out = model.forward(tape, img);
    Var<float> target = tape.leaf(sample.gt, "target");

    const int H = sample.input.dim(1), W = sample.input.dim(2);

    Var<float> l_cltcc = tape.leaf(Tensor::scalar(0.0f), "zero");
    if (out.has_lut) {
        Var<float> tgt_px = transpose2d(reshape(target, {3, H * W}));
        Var<float> pred_px = out.lut_pixels;
        if (cfg.cltcc_pixels < H * W) {
            Rng sub_rng(tape.seed() ^ 0x51D5A1u);
            std::vector<int> idx = pixel_subset(H * W, cfg.cltcc_pixels, sub_rng);
            pred_px = gather_rows(pred_px, idx);
            tgt_px = gather_rows(tgt_px, std::move(idx));
        }
        l_cltcc = mean_all(abs_op(sub(pred_px, tgt_px)));
    }

    Var<float> l_maae = tape.leaf(Tensor::scalar(0.0f), "zero");
    if (!out.stage_outputs.empty()) l_maae = maae_loss(out.stage_outputs, target, cfg.loss);

    Var<float> l_gt = gt_loss(out.final_image, target, cfg.loss);
    Var<float> l_total = total_loss(l_gt, l_cltcc, l_maae, cfg.loss);

    SampleLosses vals;
    vals.cltcc = l_cltcc.val().item();
    vals.maae = l_maae.val().item();
    vals.gt = l_gt.val().item();
    vals.total = l_total.val().item();
    auto check = [](double v, const char* term) {
        if (!std::isfinite(v)) throw NumericError(std::string("training aborted: ") + term + " is non-finite");
    };
    check(vals.cltcc, "l_cltcc");
    check(vals.maae, "l_maae");
    check(vals.gt, "l_gt");
    check(vals.total, "l_total");

    if (params != nullptr) {
        Var<float> objective = l_total;
        if (!cfg.gt_in_loss)
            objective = add(mul_scalar(l_cltcc, static_cast<float>(cfg.loss.w_cltcc)),
                            mul_scalar(l_maae, static_cast<float>(cfg.loss.w_maae)));
        tape.backward(objective);
        if (grad_accum->size() != params->size()) {
            grad_accum->clear();
            for (const auto& p : *params) grad_accum->push_back(Tensor::zeros(p.tensor->shape));
        }
        for (size_t i = 0; i < params->size(); ++i) {
            const Tensor* g = tape.grad_for((*params)[i].tensor);
            if (g == nullptr)
                throw StateError("no gradient recorded for parameter '" + (*params)[i].name + "'");
            Tensor& dst = (*grad_accum)[i];
            for (std::int64_t j = 0; j < dst.size(); ++j) dst[j] += (*g)[j];
        }
    }
    return vals;
}

Image enhance_image(Pipeline& model, const Image& input) {
    return clamp01(model.enhance(input));
}

// ---------------------------------------------------------------------------
// training loop

TrainResult train_run(const SampleLoader& loader, size_t n_pairs, const TrainConfig& cfg,
                      const std::string& out_dir, const Checkpoint* resume) {
    cfg.validate();
    if (n_pairs == 0) throw DataError("train: dataset is empty");

    TrainResult res;
    Rng rng(cfg.seed);
    Rng init_rng(cfg.seed ^ 0xA5A5A5A5ULL);
    AdamState adam;
    int start_epoch = 0;

    if (resume != nullptr) {
        res.model = resume->model;
        rng.set_state(resume->rng_state);
        start_epoch = resume->epochs_done;
    } else {
        res.model = Pipeline::make(cfg.model, init_rng);
        if (cfg.model.use_cltcc && cfg.lut_identity_init)
            identity_init(res.model.lut, 300, 5e-3, cfg.seed ^ 0x1DULL);
    }
    ParamList<float> params;
    res.model.collect(params);
    if (resume != nullptr && resume->has_optimizer) {
        adam = resume->adam;
        if (adam.m.size() != params.size())
            throw FormatError("checkpoint: optimizer state does not match this model");
    } else {
        adam.init(params);
    }

    // held-out validation subset: last ceil(f*n) pairs; all pairs when f == 0
    std::vector<size_t> train_idx, val_idx;
    const size_t n_val = cfg.val_fraction > 0.0
                             ? std::max<size_t>(1, static_cast<size_t>(std::ceil(cfg.val_fraction * n_pairs)))
                             : 0;
    for (size_t i = 0; i < n_pairs; ++i) {
        if (n_val > 0 && i >= n_pairs - n_val)
            val_idx.push_back(i);
        else
            train_idx.push_back(i);
    }
    if (train_idx.empty()) throw DataError("train: validation split leaves no training pairs");
    if (val_idx.empty()) val_idx = train_idx;

    const KvConfig resolved = cfg.to_kv();
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    auto validate_now = [&]() {
        double ps = 0.0, ss = 0.0;
        for (size_t i : val_idx) {
            const SamplePair pair = loader(i);
            const Image out = enhance_image(res.model, pair.input);
            ps += psnr(out, pair.gt, cfg.loss.psnr_cap_db);
            ss += ssim(out, pair.gt);
        }
        return std::pair<double, double>{ps / val_idx.size(), ss / val_idx.size()};
    };

    std::vector<Tensor> grad_accum;
    int steps = resume != nullptr && resume->has_optimizer ? static_cast<int>(adam.step) : 0;
    bool stop = false;

    for (int e = start_epoch; e < cfg.epochs && !stop; ++e) {
        const double lr = lr_at_epoch(e, cfg);

        // deterministic shuffle
        std::vector<size_t> order = train_idx;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

        EpochRecord rec;
        rec.epoch = e;
        rec.lr = lr;
        int batches = 0;

        for (size_t b0 = 0; b0 < order.size() && !stop; b0 += static_cast<size_t>(cfg.batch)) {
            Batch raw;
            for (size_t i = b0; i < std::min(order.size(), b0 + static_cast<size_t>(cfg.batch)); ++i)
                raw.push_back(loader(order[i]));
            Batch batch = augment(raw, cfg.augment, rng);

            grad_accum.clear();
            SampleLosses sums;
            for (const auto& sample : batch) {
                SampleLosses l;
                try {
                    l = compute_sample_losses(res.model, sample, cfg, &params, &grad_accum);
                } catch (const NumericError& err) {
                    throw NumericError(std::string(err.what()) + " (epoch " + std::to_string(e) +
                                       ", step " + std::to_string(steps) + ")");
                }
                sums.total += l.total;
                sums.cltcc += l.cltcc;
                sums.maae += l.maae;
                sums.gt += l.gt;
            }
            const float inv = 1.0f / static_cast<float>(batch.size());
            for (auto& g : grad_accum)
                for (std::int64_t j = 0; j < g.size(); ++j) g[j] *= inv;
            clip_global_norm(grad_accum, cfg.clip_norm);
            std::vector<const Tensor*> gptrs;
            gptrs.reserve(grad_accum.size());
            for (const auto& g : grad_accum) gptrs.push_back(&g);
            adam_step(params, gptrs, adam, lr);

            rec.l_total += sums.total / batch.size();
            rec.l_cltcc += sums.cltcc / batch.size();
            rec.l_maae += sums.maae / batch.size();
            rec.l_gt += sums.gt / batch.size();
            ++batches;
            ++steps;
            if (cfg.max_steps > 0 && steps >= cfg.max_steps) stop = true;
        }

        if (batches > 0) {
            rec.l_total /= batches;
            rec.l_cltcc /= batches;
            rec.l_maae /= batches;
            rec.l_gt /= batches;
        }
        if (cfg.val_every > 0 && (e % cfg.val_every == 0 || e + 1 == cfg.epochs || stop)) {
            auto [vp, vs] = validate_now();
            rec.val_psnr = vp;
            rec.val_ssim = vs;
        }
        res.history.push_back(rec);

        if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
            ((e + 1) % cfg.checkpoint_every == 0 || e + 1 == cfg.epochs || stop)) {
            char name[64];
            std::snprintf(name, sizeof(name), "/ckpt-epoch%04d.bin", e + 1);
            save_checkpoint(out_dir + name, res.model, resolved, e + 1, rng.state(), &adam);
        }
    }
    res.steps_done = steps;

    if (!out_dir.empty()) {
        save_checkpoint(out_dir + "/model-final.ckpt", res.model, resolved,
                        res.history.empty() ? start_epoch : res.history.back().epoch + 1, rng.state(),
                        &adam);
        write_file(out_dir + "/history.csv", history_csv(res.history));
    }
    return res;
}

TrainResult train_run(const PairedDataset& ds, const TrainConfig& cfg, const std::string& out_dir,
                      const Checkpoint* resume) {
    return train_run([&ds](size_t i) { return ds.load(i); }, ds.size(), cfg, out_dir, resume);
}

TrainResult train_run(const Batch& pairs, const TrainConfig& cfg, const std::string& out_dir,
                      const Checkpoint* resume) {
    return train_run([&pairs](size_t i) { return pairs.at(i); }, pairs.size(), cfg, out_dir, resume);
}

// ---------------------------------------------------------------------------
// reports

std::string history_csv(const std::vector<EpochRecord>& records) {
    std::string out = "epoch,lr,l_total,l_cltcc,l_maae,l_gt,val_psnr,val_ssim\n";
    char line[256];
    for (const auto& r : records) {
        std::snprintf(line, sizeof(line), "%d,%.8g,%.8g,%.8g,%.8g,%.8g,%.6f,%.6f\n", r.epoch, r.lr,
                      r.l_total, r.l_cltcc, r.l_maae, r.l_gt, r.val_psnr, r.val_ssim);
        out += line;
    }
    return out;
}

std::string evaluation_csv(const std::vector<EvalRow>& rows) {
    std::string out = "image,psnr_db,ssim\n";
    char line[512];
    double ps = 0, ss = 0;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f\n", r.name.c_str(), r.psnr_db, r.ssim);
        out += line;
        ps += r.psnr_db;
        ss += r.ssim;
    }
    if (!rows.empty()) {
        std::snprintf(line, sizeof(line), "mean,%.6f,%.6f\n", ps / rows.size(), ss / rows.size());
        out += line;
    }
    return out;
}

}  // namespace uwie
