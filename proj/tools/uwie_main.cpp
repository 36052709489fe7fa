// uwie: underwater image enhancement pipeline (learned color LUT + multi-axis
// multi-stage refinement). Subcommands: train, enhance, evaluate, fit-lut,
// export-lut, gradcheck.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "uwie/data.hpp"
#include "uwie/gradcheck.hpp"
#include "uwie/metrics.hpp"
#include "uwie/trainer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using namespace uwie;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool no_cltcc = false;
    bool no_maae = false;
};

KvConfig resolve_config(const CommonOpts& opts) {
    KvConfig kv;
    if (!opts.config_path.empty()) kv = KvConfig::parse_file(opts.config_path);
    for (const std::string& kvs : opts.overrides) {
        const size_t eq = kvs.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kvs + "'");
        kv.set(kvs.substr(0, eq), kvs.substr(eq + 1));
    }
    if (opts.seed_set) kv.set("seed", std::to_string(opts.seed));
    if (opts.no_cltcc) kv.set("no_cltcc", "true");
    if (opts.no_maae) kv.set("no_maae", "true");
    return kv;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_ablations) {
    cmd->add_option("--config", opts.config_path, "key = value config file");
    cmd->add_option("--set", opts.overrides, "override a config key (key=value, repeatable)");
    cmd->add_option("--seed", opts.seed, "random seed")->each([&opts](const std::string&) {
        opts.seed_set = true;
    });
    if (with_ablations) {
        cmd->add_flag("--no-cltcc", opts.no_cltcc, "disable the LUT color correction");
        cmd->add_flag("--no-maae", opts.no_maae, "disable the multi-axis enhancer");
    }
}

std::vector<std::string> list_ppms(const std::string& path) {
    std::vector<std::string> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
    } else if (fs::is_regular_file(path)) {
        files.push_back(path);
    } else {
        throw DataError("no such file or directory: " + path);
    }
    if (files.empty()) throw DataError("no .ppm files under " + path);
    return files;
}

Pipeline load_model(const std::string& path, const CommonOpts& opts) {
    Checkpoint ck = load_checkpoint(path);
    Pipeline model = std::move(ck.model);
    if (opts.no_cltcc) model.cfg.use_cltcc = false;
    if (opts.no_maae) model.cfg.use_maae = false;
    if (!model.cfg.use_cltcc && !model.cfg.use_maae)
        throw ConfigError("both components disabled; nothing to run");
    return model;
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& data_root, const std::string& out_dir, const CommonOpts& opts,
              const std::string& resume_path) {
    const KvConfig kv = resolve_config(opts);
    TrainConfig cfg = TrainConfig::from_kv(kv);
    const PairedDataset ds = scan_dataset_root(data_root);
    for (const auto& name : ds.unmatched)
        std::fprintf(stderr, "warning: unmatched file %s\n", name.c_str());

    RunManifest manifest{"train", cfg.seed, out_dir, cfg.to_kv()};
    manifest.write(out_dir);

    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
        std::printf("resuming from %s at epoch %d\n", resume_path.c_str(), resume.epochs_done);
    }

    TrainResult res = train_run(ds, cfg, out_dir, resume_ptr);
    for (const auto& r : res.history)
        std::printf("epoch %4d  lr %.3e  l_total %.5f  l_cltcc %.5f  l_maae %.5f  l_gt %.5f  "
                    "val_psnr %.2f  val_ssim %.4f\n",
                    r.epoch, r.lr, r.l_total, r.l_cltcc, r.l_maae, r.l_gt, r.val_psnr, r.val_ssim);
    std::printf("done: %d steps, outputs in %s\n", res.steps_done, out_dir.c_str());
    return kExitOk;
}

int cmd_enhance(const std::string& model_path, const std::string& in_path,
                const std::string& out_dir, const CommonOpts& opts) {
    Pipeline model = load_model(model_path, opts);
    const auto files = list_ppms(in_path);
    fs::create_directories(out_dir);

    RunManifest manifest{"enhance", opts.seed, out_dir, resolve_config(opts)};
    manifest.write(out_dir);

    for (const auto& f : files) {
        const Image input = load_image(f);
        const Image out = enhance_image(model, input);
        const std::string dst = out_dir + "/" + fs::path(f).filename().string();
        save_image(dst, out);
        std::printf("%s -> %s\n", f.c_str(), dst.c_str());
    }
    return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_root,
                 const std::string& report_path, const CommonOpts& opts) {
    Pipeline model = load_model(model_path, opts);
    const PairedDataset ds = scan_dataset_root(data_root);
    for (const auto& name : ds.unmatched)
        std::fprintf(stderr, "warning: unmatched file %s\n", name.c_str());

    std::vector<EvalRow> rows;
    for (size_t i = 0; i < ds.size(); ++i) {
        const SamplePair pair = ds.load(i);
        const Image out = enhance_image(model, pair.input);
        EvalRow row;
        row.name = fs::path(ds.pairs[i].first).filename().string();
        row.psnr_db = psnr(out, pair.gt);
        row.ssim = ssim(out, pair.gt);
        rows.push_back(row);
        std::printf("%-32s psnr %8.3f dB   ssim %.5f\n", row.name.c_str(), row.psnr_db, row.ssim);
    }
    double ps = 0, ss = 0;
    for (const auto& r : rows) {
        ps += r.psnr_db;
        ss += r.ssim;
    }
    std::printf("%-32s psnr %8.3f dB   ssim %.5f\n", "mean", ps / rows.size(), ss / rows.size());

    write_file(report_path, evaluation_csv(rows));
    const fs::path dir = fs::path(report_path).parent_path();
    RunManifest manifest{"evaluate", opts.seed, dir.empty() ? "." : dir.string(), resolve_config(opts)};
    manifest.write(manifest.out_dir);
    return kExitOk;
}

int cmd_fit_lut(const std::string& data_root, const std::string& out_path, int steps, double lr,
                int batch, const CommonOpts& opts) {
    const KvConfig kv = resolve_config(opts);
    TrainConfig cfg = TrainConfig::from_kv(kv);
    cfg.model.use_maae = false;
    cfg.model.use_cltcc = true;

    const PairedDataset ds = scan_dataset_root(data_root);
    Rng rng(cfg.seed);

    // pixel pairs subsampled from every training image
    const int per_image = cfg.cltcc_pixels;
    std::vector<float> in_rows, gt_rows;
    const int k = cfg.model.lut.cond_dim;
    for (size_t i = 0; i < ds.size(); ++i) {
        const SamplePair pair = ds.load(i);
        const int HW = pair.input.dim(1) * pair.input.dim(2);
        const std::int64_t plane = HW;
        float mean_rgb[3] = {0, 0, 0};
        if (k > 0) {
            for (int c = 0; c < 3; ++c) {
                double m = 0;
                for (std::int64_t j = 0; j < plane; ++j) m += pair.input[c * plane + j];
                mean_rgb[c] = static_cast<float>(m / plane);
            }
        }
        for (int s = 0; s < std::min(per_image, HW); ++s) {
            const int j = HW > per_image ? rng.uniform_int(HW) : s;
            for (int c = 0; c < 3; ++c) in_rows.push_back(pair.input[c * plane + j]);
            if (k == 3)
                for (float m : mean_rgb) in_rows.push_back(m);
            else if (k != 0)
                throw ConfigError("fit-lut: lut_cond_dim must be 0 or 3");
            for (int c = 0; c < 3; ++c) gt_rows.push_back(pair.gt[c * plane + j]);
        }
    }
    const int n = static_cast<int>(gt_rows.size() / 3);
    Tensor inputs({n, 3 + k}, std::move(in_rows));
    Tensor targets({n, 3}, std::move(gt_rows));

    Rng init_rng(cfg.seed ^ 0xA5A5A5A5ULL);
    Pipeline model = Pipeline::make(cfg.model, init_rng);
    std::printf("fitting LUT on %d pixel pairs, %d steps (batch %d, lr %g)\n", n, steps, batch, lr);
    const auto trace = fit_lut(model.lut, inputs, targets, steps, lr, batch, cfg.seed);
    std::printf("loss: initial %.5f, final %.5f\n", trace.front(), trace.back());

    save_checkpoint(out_path, model, cfg.to_kv(), 0, rng.state(), nullptr);
    const fs::path dir = fs::path(out_path).parent_path();
    RunManifest manifest{"fit-lut", cfg.seed, dir.empty() ? "." : dir.string(), cfg.to_kv()};
    manifest.write(manifest.out_dir);
    return kExitOk;
}

int cmd_export_lut(const std::string& model_path, int size, const std::string& out_path,
                   const std::string& cond_csv, const CommonOpts& opts) {
    Pipeline model = load_model(model_path, opts);
    if (!model.cfg.use_cltcc) throw ConfigError("export-lut: checkpoint has no LUT component");

    std::vector<float> cond;
    if (!cond_csv.empty()) {
        std::string tok;
        std::istringstream ss(cond_csv);
        while (std::getline(ss, tok, ',')) cond.push_back(std::stof(tok));
    }
    const std::string text = export_cube(model.lut, size, cond.empty() ? nullptr : &cond);
    write_file(out_path, text);
    std::printf("wrote %s (%d^3 entries)\n", out_path.c_str(), size);
    return kExitOk;
}

int cmd_gradcheck(const std::string& op, int instances, std::uint64_t seed) {
    const auto results = run_gradcheck(op, instances, seed);
    std::fputs(format_gradcheck(results).c_str(), stdout);
    if (!gradcheck_passed(results)) {
        std::fprintf(stderr, "gradcheck FAILED (tolerances: %.0e at f32, %.0e at f64)\n", kGradTolF32,
                     kGradTolF64);
        return kExitNumeric;
    }
    std::printf("gradcheck passed: %zu cases, tolerances %.0e (f32) / %.0e (f64)\n", results.size(),
                kGradTolF32, kGradTolF64);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"underwater image enhancement: learned 3D LUT + multi-axis refinement"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");

    // train
    auto* train = app.add_subcommand("train", "train the full pipeline on paired PPM data");
    std::string train_data, train_out, train_resume;
    CommonOpts train_opts;
    train->add_option("--data", train_data, "dataset root (<root>/input, <root>/gt)")->required();
    train->add_option("--out", train_out, "output directory")->required();
    train->add_option("--resume", train_resume, "checkpoint to resume from");
    add_common(train, train_opts, true);

    // enhance
    auto* enhance = app.add_subcommand("enhance", "enhance PPM images with a trained model");
    std::string enh_model, enh_in, enh_out;
    CommonOpts enh_opts;
    enhance->add_option("--model", enh_model, "checkpoint file")->required();
    enhance->add_option("--in", enh_in, "input .ppm file or directory")->required();
    enhance->add_option("--out", enh_out, "output directory")->required();
    add_common(enhance, enh_opts, true);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "PSNR/SSIM report over a paired dataset");
    std::string eval_model, eval_data, eval_report;
    CommonOpts eval_opts;
    evaluate->add_option("--model", eval_model, "checkpoint file")->required();
    evaluate->add_option("--data", eval_data, "dataset root")->required();
    evaluate->add_option("--report", eval_report, "CSV report path")->required();
    add_common(evaluate, eval_opts, true);

    // fit-lut
    auto* fitlut = app.add_subcommand("fit-lut", "fit only the LUT color correction");
    std::string fit_data, fit_out;
    int fit_steps = 2000, fit_batch = 256;
    double fit_lr = 1e-2;
    CommonOpts fit_opts;
    fitlut->add_option("--data", fit_data, "dataset root")->required();
    fitlut->add_option("--out", fit_out, "output checkpoint path")->required();
    fitlut->add_option("--steps", fit_steps, "Adam steps");
    fitlut->add_option("--lr", fit_lr, "learning rate");
    fitlut->add_option("--batch", fit_batch, "minibatch size (0 = full batch)");
    add_common(fitlut, fit_opts, false);

    // export-lut
    auto* exportlut = app.add_subcommand("export-lut", "materialize the LUT as a .cube file");
    std::string exp_model, exp_out, exp_cond;
    int exp_size = 33;
    CommonOpts exp_opts;
    exportlut->add_option("--model", exp_model, "checkpoint file")->required();
    exportlut->add_option("--size", exp_size, "lattice size per axis")->required();
    exportlut->add_option("--out", exp_out, "output .cube path")->required();
    exportlut->add_option("--cond", exp_cond, "condition vector, comma separated");
    add_common(exportlut, exp_opts, false);

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_op;
    int gc_instances = 5;
    std::uint64_t gc_seed = 20240801;
    gradcheck->add_option("--op", gc_op, "only cases whose name contains this substring");
    gradcheck->add_option("--instances", gc_instances, "random instances per case");
    gradcheck->add_option("--seed", gc_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (*train) return cmd_train(train_data, train_out, train_opts, train_resume);
        if (*enhance) return cmd_enhance(enh_model, enh_in, enh_out, enh_opts);
        if (*evaluate) return cmd_evaluate(eval_model, eval_data, eval_report, eval_opts);
        if (*fitlut) return cmd_fit_lut(fit_data, fit_out, fit_steps, fit_lr, fit_batch, fit_opts);
        if (*exportlut) return cmd_export_lut(exp_model, exp_size, exp_out, exp_cond, exp_opts);
        if (*gradcheck) return cmd_gradcheck(gc_op, gc_instances, gc_seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kExitData;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "shape error: %s\n", e.what());
        return kExitData;
    } catch (const StateError& e) {
        std::fprintf(stderr, "internal state error: %s\n", e.what());
        return kExitData;
    }
    return kExitUsage;
}
