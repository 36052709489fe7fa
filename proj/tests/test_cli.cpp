#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>

#include "test_support.hpp"
#include "uwie/metrics.hpp"
#include "uwie/trainer.hpp"

using namespace uwie;
using namespace testsup;

namespace {

struct RunOut {
    int code = -1;
    std::string out;
};

// run the CLI binary, capture combined output and exit code
RunOut run_cli(const std::string& args) {
    const char* bin = std::getenv("UWIE_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "UWIE_BIN must point at the uwie binary");
    const std::string cmd = std::string(bin) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunOut r;
    char buf[512];
    while (fgets(buf, sizeof(buf), pipe) != nullptr) r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// checkpoint containing an exact-identity model: enhancer-only with every
// weight zeroed, so the residual heads pass the input through bitwise
std::string write_identity_checkpoint(const std::string& path) {
    TrainConfig cfg;
    cfg.model.use_cltcc = false;
    cfg.model.maae.stages = 2;
    cfg.model.maae.scales = 2;
    cfg.model.maae.base_channels = 8;
    Rng rng(3);
    Pipeline model = Pipeline::make(cfg.model, rng);
    ParamList<float> params;
    model.collect(params);
    for (auto& p : params)
        for (auto& v : p.tensor->data) v = 0;
    save_checkpoint(path, model, cfg.to_kv(), 0, 0, nullptr);
    return path;
}

}  // namespace

TEST_CASE("help exits cleanly for every subcommand") {
    CHECK(run_cli("--help").code == 0);
    for (const char* sub :
         {"train", "enhance", "evaluate", "fit-lut", "export-lut", "gradcheck"}) {
        RunOut r = run_cli(std::string(sub) + " --help");
        CHECK_MESSAGE(r.code == 0, sub);
        CHECK(r.out.find("--") != std::string::npos);
    }
}

TEST_CASE("unknown subcommands and flags are usage errors") {
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("gradcheck --no-such-flag").code == 1);
}

TEST_CASE("gradcheck subcommand reports a table and exits zero") {
    RunOut r = run_cli("gradcheck --op matmul --instances 2");
    CHECK(r.code == 0);
    CHECK(r.out.find("matmul") != std::string::npos);
    CHECK(r.out.find("ok") != std::string::npos);

    CHECK(run_cli("gradcheck --op no_such_case").code == 1);
}

TEST_CASE("enhance writes valid ppm files in range") {
    TempDir dir("cli_enh");
    // fresh random model checkpoint
    TrainConfig cfg;
    cfg.model.maae.base_channels = 8;
    cfg.model.lut.hidden_layers = 2;
    cfg.model.lut.hidden_width = 16;
    Rng rng(11);
    Pipeline model = Pipeline::make(cfg.model, rng);
    const std::string ckpt = dir.str() + "/model.ckpt";
    save_checkpoint(ckpt, model, cfg.to_kv(), 0, 0, nullptr);

    Batch pairs = make_synthetic_pairs(1, 64, 64);
    save_image(dir.str() + "/in.ppm", pairs[0].input);

    RunOut r = run_cli("enhance --model " + ckpt + " --in " + dir.str() + "/in.ppm --out " +
                       dir.str() + "/out");
    CHECK(r.code == 0);
    Image out = load_image(dir.str() + "/out/in.ppm");
    CHECK(out.shape == Shape{3, 64, 64});
    for (auto v : out.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(std::filesystem::exists(dir.str() + "/out/manifest.txt"));
}

TEST_CASE("evaluate on an identity setup reports the caps") {
    TempDir dir("cli_eval");
    const std::string ckpt = write_identity_checkpoint(dir.str() + "/ident.ckpt");

    // dataset whose input equals its ground truth
    Batch pairs = make_synthetic_pairs(2, 64, 64);
    for (auto& p : pairs) p.input = p.gt;
    write_dataset(dir.str() + "/data", pairs);

    const std::string report = dir.str() + "/report.csv";
    RunOut r = run_cli("evaluate --model " + ckpt + " --data " + dir.str() + "/data --report " + report);
    CHECK(r.code == 0);

    const auto csv_bytes = read_file(report);
    const std::string csv(csv_bytes.begin(), csv_bytes.end());
    CHECK(csv.rfind("image,psnr_db,ssim\n", 0) == 0);
    CHECK(csv.find("mean,120.000000,1.000000") != std::string::npos);
}

TEST_CASE("train smoke run writes history, manifest and checkpoints") {
    TempDir dir("cli_train");
    Batch pairs = make_synthetic_pairs(2, 32, 32);
    write_dataset(dir.str() + "/data", pairs);
    const std::string cfg_path = dir.str() + "/cfg.txt";
    write_file(cfg_path, std::string("epochs = 1\nbatch = 2\ncrop = 32\nbase_channels = 4\n"
                                     "stages = 1\nlut_hidden_layers = 1\nlut_hidden_width = 8\n"
                                     "lut_identity_init = false\n"));

    RunOut r = run_cli("train --data " + dir.str() + "/data --config " + cfg_path + " --out " +
                       dir.str() + "/run --seed 9");
    CHECK_MESSAGE(r.code == 0, r.out);
    CHECK(std::filesystem::exists(dir.str() + "/run/manifest.txt"));
    CHECK(std::filesystem::exists(dir.str() + "/run/history.csv"));
    CHECK(std::filesystem::exists(dir.str() + "/run/model-final.ckpt"));

    const auto csv_bytes = read_file(dir.str() + "/run/history.csv");
    const std::string csv(csv_bytes.begin(), csv_bytes.end());
    CHECK(csv.rfind("epoch,lr,", 0) == 0);

    // the saved model loads back through evaluate
    RunOut ev = run_cli("evaluate --model " + dir.str() + "/run/model-final.ckpt --data " +
                        dir.str() + "/data --report " + dir.str() + "/run/report.csv");
    CHECK(ev.code == 0);
}

TEST_CASE("fit-lut then export-lut produce a parseable cube file") {
    TempDir dir("cli_lut");
    Batch pairs = make_synthetic_pairs(2, 32, 32);
    write_dataset(dir.str() + "/data", pairs);

    RunOut fit = run_cli("fit-lut --data " + dir.str() + "/data --out " + dir.str() +
                         "/lut.ckpt --steps 20 --batch 128 --seed 4 --set cltcc_pixels=512");
    CHECK_MESSAGE(fit.code == 0, fit.out);

    RunOut exp = run_cli("export-lut --model " + dir.str() + "/lut.ckpt --size 9 --out " +
                         dir.str() + "/lut.cube");
    CHECK_MESSAGE(exp.code == 0, exp.out);
    const auto bytes = read_file(dir.str() + "/lut.cube");
    const std::string text(bytes.begin(), bytes.end());
    CHECK(text.rfind("LUT_3D_SIZE 9\n", 0) == 0);
    CHECK(parse_cube(text).size == 9);

    // a LUT-only checkpoint enhances images too
    save_image(dir.str() + "/in.ppm", pairs[0].input);
    RunOut enh = run_cli("enhance --model " + dir.str() + "/lut.ckpt --in " + dir.str() +
                         "/in.ppm --out " + dir.str() + "/out");
    CHECK(enh.code == 0);
    CHECK(std::filesystem::exists(dir.str() + "/out/in.ppm"));
}

TEST_CASE("data errors carry exit code 2") {
    TempDir dir("cli_err");
    CHECK(run_cli("enhance --model /no/such.ckpt --in /no/such.ppm --out " + dir.str()).code == 2);

    // malformed ppm input
    write_file(dir.str() + "/bad.ppm", std::string("P6\n4 4\n255\nxx"));
    const std::string ckpt = write_identity_checkpoint(dir.str() + "/m.ckpt");
    RunOut r = run_cli("enhance --model " + ckpt + " --in " + dir.str() + "/bad.ppm --out " +
                       dir.str() + "/out");
    CHECK(r.code == 2);
    CHECK(r.out.find("bad.ppm") != std::string::npos);
}

TEST_CASE("seeded commands are bit-reproducible") {
    TempDir dir("cli_seed");
    Batch pairs = make_synthetic_pairs(2, 32, 32);
    write_dataset(dir.str() + "/data", pairs);
    const std::string common = "train --data " + dir.str() + "/data --out ";
    const std::string flags =
        " --seed 31 --set epochs=1 --set batch=2 --set crop=32 --set base_channels=4 "
        "--set stages=1 --set lut_hidden_layers=1 --set lut_hidden_width=8 "
        "--set lut_identity_init=false --set checkpoint_every=0";
    CHECK(run_cli(common + dir.str() + "/a" + flags).code == 0);
    CHECK(run_cli(common + dir.str() + "/b" + flags).code == 0);
    const auto a = read_file(dir.str() + "/a/history.csv");
    const auto b = read_file(dir.str() + "/b/history.csv");
    CHECK(a == b);
}
