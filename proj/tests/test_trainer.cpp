#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "uwie/trainer.hpp"

using namespace uwie;
using namespace testsup;

namespace {

// small, fast config for loop-level tests
TrainConfig tiny_config(std::uint64_t seed = 5) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.model.maae.stages = 1;
    cfg.model.maae.scales = 2;
    cfg.model.maae.base_channels = 4;
    cfg.model.maae.block_size = 4;
    cfg.model.maae.grid_size = 4;
    cfg.model.lut.hidden_layers = 1;
    cfg.model.lut.hidden_width = 8;
    cfg.lut_identity_init = false;  // keep construction instant
    cfg.augment.crop = 16;
    cfg.batch = 2;
    cfg.epochs = 2;
    return cfg;
}

std::vector<float> flatten_params(Pipeline& model) {
    ParamList<float> params;
    model.collect(params);
    std::vector<float> flat;
    for (auto& p : params) flat.insert(flat.end(), p.tensor->data.begin(), p.tensor->data.end());
    return flat;
}

}  // namespace

TEST_CASE("adam first step with unit gradients moves by about -lr") {
    ParamList<double> params;
    TensorT<double> p({3}, {0.0, 1.0, -2.0});
    params.push_back({"p", &p});
    AdamStateT<double> st;
    st.init(params);
    TensorT<double> g = TensorT<double>::full({3}, 1.0);
    adam_step<double>(params, {&g}, st, 1e-2);
    // bias correction makes mhat = vhat = 1 on the first step
    CHECK(p[0] == doctest::Approx(-1e-2).epsilon(1e-7));
    CHECK(p[1] == doctest::Approx(1.0 - 1e-2).epsilon(1e-9));
}

TEST_CASE("adam with zero gradients leaves parameters and decays moments") {
    ParamList<double> params;
    TensorT<double> p({2}, {0.5, -0.5});
    params.push_back({"p", &p});
    AdamStateT<double> st;
    st.init(params);
    TensorT<double> g0 = TensorT<double>::zeros({2});
    const TensorT<double> fresh = p;
    adam_step<double>(params, {&g0}, st, 1e-3);
    CHECK(p.data == fresh.data);  // m = v = 0 keeps the step at exactly zero

    TensorT<double> g1 = TensorT<double>::full({2}, 1.0);
    adam_step<double>(params, {&g1}, st, 1e-3);
    const double m1 = st.m[0][0], v1 = st.v[0][0];
    adam_step<double>(params, {&g0}, st, 1e-3);
    CHECK(st.m[0][0] == doctest::Approx(m1 * 0.9).epsilon(1e-12));
    CHECK(st.v[0][0] == doctest::Approx(v1 * 0.999).epsilon(1e-12));
}

TEST_CASE("adam missing gradient is a contract error") {
    ParamList<double> params;
    TensorT<double> p({2}, {0.5, -0.5});
    params.push_back({"p", &p});
    AdamStateT<double> st;
    st.init(params);
    CHECK_THROWS_AS(adam_step<double>(params, {nullptr}, st, 1e-3), StateError);
}

TEST_CASE("ten adam steps match an independently coded scalar oracle") {
    ParamList<double> params;
    TensorT<double> p({1}, {0.7});
    params.push_back({"p", &p});
    AdamStateT<double> st;
    st.init(params);

    // independent scalar Adam, written from the update equations
    double x = 0.7, m = 0.0, v = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 3e-3;
    for (int step = 1; step <= 10; ++step) {
        const double g = std::sin(0.3 * step) + 0.2;  // arbitrary deterministic gradient stream
        TensorT<double> gt({1}, {g});
        adam_step<double>(params, {&gt}, st, lr);

        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, step));
        const double vhat = v / (1 - std::pow(b2, step));
        x -= lr * mhat / (std::sqrt(vhat) + eps);
        CHECK(p[0] == doctest::Approx(x).epsilon(1e-10));
    }
}

TEST_CASE("gradient clipping rescales to the target global norm") {
    std::vector<Tensor> grads;
    grads.push_back(Tensor({2}, {3.0f, 4.0f}));  // norm 5
    clip_global_norm(grads, 1.0);
    CHECK(global_grad_norm(grads) == doctest::Approx(1.0).epsilon(1e-6));
    clip_global_norm(grads, 10.0);  // under the limit: untouched
    CHECK(global_grad_norm(grads) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("cosine schedule hits the published endpoints") {
    TrainConfig cfg;
    cfg.epochs = 201;
    CHECK(lr_at_epoch(0, cfg) == doctest::Approx(2e-4).epsilon(1e-12));
    CHECK(lr_at_epoch(200, cfg) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(lr_at_epoch(100, cfg) == doctest::Approx((2e-4 + 1e-6) / 2).epsilon(1e-9));
    CHECK_THROWS_AS(lr_at_epoch(201, cfg), ConfigError);
    CHECK_THROWS_AS(lr_at_epoch(-1, cfg), ConfigError);
    cfg.epochs = 1;
    CHECK(lr_at_epoch(0, cfg) == doctest::Approx(2e-4));
}

TEST_CASE("zero epochs returns an untrained model and empty history") {
    Batch pairs = make_synthetic_pairs(2, 16, 16);
    TrainConfig cfg = tiny_config();
    cfg.epochs = 0;
    TrainResult res = train_run(pairs, cfg);
    CHECK(res.history.empty());
    CHECK(res.steps_done == 0);
    Rng rng(cfg.seed ^ 0xA5A5A5A5ULL);
    Pipeline fresh = Pipeline::make(cfg.model, rng);
    CHECK(flatten_params(res.model) == flatten_params(fresh));
}

TEST_CASE("same seed reproduces bit-identical histories and weights") {
    Batch pairs = make_synthetic_pairs(3, 20, 20);
    TrainConfig cfg = tiny_config(42);
    cfg.epochs = 3;
    TrainResult a = train_run(pairs, cfg);
    TrainResult b = train_run(pairs, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].l_total == b.history[i].l_total);
        CHECK(a.history[i].l_cltcc == b.history[i].l_cltcc);
        CHECK(a.history[i].val_psnr == b.history[i].val_psnr);
    }
    CHECK(flatten_params(a.model) == flatten_params(b.model));

    TrainConfig other = tiny_config(43);
    other.epochs = 3;
    TrainResult c = train_run(pairs, other);
    CHECK(flatten_params(a.model) != flatten_params(c.model));
}

TEST_CASE("every parameter changes after one step with nonzero lr") {
    Batch pairs = make_synthetic_pairs(2, 16, 16);
    TrainConfig cfg = tiny_config(7);
    cfg.epochs = 1;
    cfg.batch = 2;
    cfg.lr_init = cfg.lr_min = 1e-3;
    Rng rng(cfg.seed ^ 0xA5A5A5A5ULL);
    Pipeline fresh = Pipeline::make(cfg.model, rng);
    TrainResult res = train_run(pairs, cfg);

    ParamList<float> before, after;
    fresh.collect(before);
    res.model.collect(after);
    for (size_t i = 0; i < before.size(); ++i) {
        bool changed = false;
        for (std::int64_t j = 0; j < before[i].tensor->size(); ++j)
            if ((*before[i].tensor)[j] != (*after[i].tensor)[j]) changed = true;
        CHECK_MESSAGE(changed, before[i].name);
    }
}

TEST_CASE("history csv carries the full column set") {
    std::vector<EpochRecord> recs(1);
    recs[0].epoch = 3;
    recs[0].lr = 1e-4;
    const std::string csv = history_csv(recs);
    CHECK(csv.rfind("epoch,lr,l_total,l_cltcc,l_maae,l_gt,val_psnr,val_ssim\n", 0) == 0);
    CHECK(csv.find("\n3,") != std::string::npos);
}

TEST_CASE("checkpoint round trip preserves forward outputs bitwise") {
    TempDir dir("ckpt");
    Batch pairs = make_synthetic_pairs(2, 16, 16);
    TrainConfig cfg = tiny_config(11);
    cfg.epochs = 2;
    TrainResult res = train_run(pairs, cfg);

    const Image before = enhance_image(res.model, pairs[0].input);
    const std::string path = dir.str() + "/model.ckpt";
    save_checkpoint(path, res.model, cfg.to_kv(), 2, 123, nullptr);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.epochs_done == 2);
    CHECK(ck.rng_state == 123);
    CHECK_FALSE(ck.has_optimizer);
    const Image after = enhance_image(ck.model, pairs[0].input);
    CHECK(before.data == after.data);
}

TEST_CASE("checkpoint validation catches corruption") {
    TempDir dir("ckpt_bad");
    Batch pairs = make_synthetic_pairs(1, 16, 16);
    TrainConfig cfg = tiny_config(13);
    cfg.epochs = 1;
    TrainResult res = train_run(pairs, cfg);
    const std::string path = dir.str() + "/model.ckpt";
    save_checkpoint(path, res.model, cfg.to_kv(), 1, 9, nullptr);

    auto bytes = read_file(path);
    SUBCASE("tampered magic") {
        bytes[0] = 'X';
        write_file(path, bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), FormatError);
    }
    SUBCASE("unknown version") {
        bytes[4] = 9;
        write_file(path, bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), FormatError);
    }
    SUBCASE("truncated file") {
        bytes.resize(bytes.size() / 2);
        write_file(path, bytes.data(), bytes.size());
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("byte offset"), FormatError);
    }
}

TEST_CASE("resumed training matches the uninterrupted run") {
    TempDir dir("resume");
    Batch pairs = make_synthetic_pairs(2, 16, 16);

    TrainConfig cfg = tiny_config(17);
    cfg.epochs = 6;
    cfg.checkpoint_every = 3;
    TrainResult straight = train_run(pairs, cfg);

    TrainResult first = train_run(pairs, cfg, dir.str() + "/half");
    (void)first;
    Checkpoint mid = load_checkpoint(dir.str() + "/half/ckpt-epoch0003.bin");
    CHECK(mid.epochs_done == 3);
    CHECK(mid.has_optimizer);

    // that run trained all 6 epochs; resume from its mid-run state instead
    TrainResult resumed = train_run(pairs, cfg, "", &mid);
    REQUIRE(!resumed.history.empty());
    CHECK(resumed.history.front().epoch == 3);
    const double tail_straight = straight.history.back().l_total;
    const double tail_resumed = resumed.history.back().l_total;
    CHECK(tail_resumed == doctest::Approx(tail_straight).epsilon(1e-6));
    CHECK(flatten_params(straight.model) == flatten_params(resumed.model));
}

TEST_CASE("training aborts with a named term on non-finite values") {
    Batch pairs = make_synthetic_pairs(1, 16, 16);
    TrainConfig cfg = tiny_config(19);
    cfg.epochs = 1;
    cfg.batch = 1;

    // poison one weight so the forward pass blows up immediately
    Rng rng(cfg.seed ^ 0xA5A5A5A5ULL);
    Pipeline model = Pipeline::make(cfg.model, rng);
    ParamList<float> params;
    model.collect(params);
    (*params[0].tensor)[0] = HUGE_VALF;
    ParamList<float>* pp = &params;
    std::vector<Tensor> grads;
    CHECK_THROWS_AS(compute_sample_losses(model, pairs[0], cfg, pp, &grads), NumericError);
}

TEST_CASE("validation split holds out the tail of the dataset") {
    Batch pairs = make_synthetic_pairs(4, 16, 16);
    TrainConfig cfg = tiny_config(23);
    cfg.epochs = 1;
    cfg.val_fraction = 0.25;  // 1 of 4 held out
    TrainResult res = train_run(pairs, cfg);
    CHECK(res.history.size() == 1);
    // 3 training pairs with batch 2 -> 2 steps
    CHECK(res.steps_done == 2);
}
