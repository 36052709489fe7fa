#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uwie/enhancer.hpp"
#include "uwie/nn.hpp"
#include "uwie/ops.hpp"

using namespace uwie;

TEST_CASE("grad of sum(x^2) is 2x") {
    Tape t;
    Tensor x({4}, {0.5f, -1.5f, 2.0f, 0.0f});
    Var<float> xv = t.param(x);
    t.backward(sum_all(square(xv)));
    const Tensor* g = t.grad_for(&x);
    REQUIRE(g != nullptr);
    for (int i = 0; i < 4; ++i) CHECK((*g)[i] == doctest::Approx(2.0f * x[i]).epsilon(1e-6));
}

TEST_CASE("disconnected parameter receives a zero gradient tensor") {
    Tape t;
    Tensor x({3}, {1.0f, 2.0f, 3.0f});
    Tensor unused({2}, {5.0f, 6.0f});
    Var<float> xv = t.param(x);
    t.param(unused);
    t.backward(mean_all(xv));
    const Tensor* g = t.grad_for(&unused);
    REQUIRE(g != nullptr);
    CHECK(g->shape == unused.shape);
    for (auto v : g->data) CHECK(v == 0.0f);
}

TEST_CASE("gradients always match the value shape") {
    Rng rng(3);
    TapeT<double> t;
    TensorT<double> x({3, 4, 4});
    fill_uniform(x, rng, -1, 1);
    TensorT<double> k({2, 3, 3, 3});
    fill_uniform(k, rng, -1, 1);
    auto y = conv2d(t.param(x), t.param(k), 1, Pad::kSame);
    t.backward(mean_all(y));
    CHECK(t.grad_for(&x)->shape == x.shape);
    CHECK(t.grad_for(&k)->shape == k.shape);
}

// the composite-MLP example: analytic vs central differences, h=1e-3 at 64-bit
TEST_CASE("composite MLP loss agrees with finite differences to 1e-6") {
    Rng rng(29);
    LinearT<double> l1, l2;
    l1.init(6, 8, rng);
    l2.init(8, 2, rng);
    TensorT<double> input({5, 6});
    fill_uniform(input, rng, -1, 1);
    TensorT<double> target({5, 2});
    fill_uniform(target, rng, -1, 1);

    auto loss_of = [&](TapeT<double>& t) {
        Var<double> h = gelu(l1.forward(t, t.param(input)));
        Var<double> out = sigmoid(l2.forward(t, h));
        return mean_all(square(sub(out, t.leaf(target))));
    };

    TapeT<double> t;
    t.backward(loss_of(t));

    ParamList<double> params;
    l1.collect(params, "l1");
    l2.collect(params, "l2");
    params.push_back({"input", &input});

    const double h = 1e-3;
    double worst = 0;
    for (auto& p : params) {
        for (std::int64_t j = 0; j < std::min<std::int64_t>(p.tensor->size(), 6); ++j) {
            const double orig = (*p.tensor)[j];
            auto eval = [&]() {
                TapeT<double> t2;
                t2.set_grad_enabled(false);
                return loss_of(t2).val().item();
            };
            (*p.tensor)[j] = orig + h;
            const double f1 = eval();
            (*p.tensor)[j] = orig - h;
            const double f0 = eval();
            (*p.tensor)[j] = orig;
            const double num = (f1 - f0) / (2 * h);
            const double ana = (*t.grad_for(p.tensor))[j];
            worst = std::max(worst, std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)}));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("backward contract errors") {
    Tape t;
    Tensor x({3}, {1.0f, 2.0f, 3.0f});
    Var<float> xv = t.param(x);
    Var<float> vec = add_scalar(xv, 1.0f);

    SUBCASE("non-scalar loss") { CHECK_THROWS_AS(t.backward(vec), StateError); }
    SUBCASE("unregistered handle") {
        Var<float> dangling;
        CHECK_THROWS_AS(t.backward(dangling), StateError);
        CHECK_THROWS_AS(dangling.val(), StateError);
    }
    SUBCASE("tape consumed after backward") {
        t.backward(mean_all(vec));
        CHECK(t.consumed());
        CHECK_THROWS_AS(add_scalar(xv, 1.0f), StateError);
        CHECK_THROWS_AS(t.backward(mean_all(vec)), StateError);
        t.reset();
        CHECK_FALSE(t.consumed());
    }
    SUBCASE("grad recording disabled") {
        Tape t2;
        t2.set_grad_enabled(false);
        Tensor y({1}, {2.0f});
        Var<float> yv = t2.param(y);
        CHECK_THROWS_AS(t2.backward(yv), StateError);
    }
}

TEST_CASE("same seed gives bit-identical forward values and gradients") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        PipelineConfig cfg;
        cfg.maae.stages = 1;
        cfg.maae.scales = 2;
        cfg.maae.base_channels = 4;
        cfg.maae.block_size = 4;
        cfg.maae.grid_size = 4;
        cfg.lut.hidden_layers = 1;
        cfg.lut.hidden_width = 8;
        Pipeline model = Pipeline::make(cfg, rng);
        Tensor img({3, 16, 16});
        fill_uniform(img, rng, 0, 1);
        Tape t;
        ModelOut<float> out = model.forward(t, t.leaf(img));
        ParamList<float> params;
        model.collect(params);
        t.backward(mean_all(square(out.final_image)));
        std::vector<float> flat;
        flat.insert(flat.end(), out.final_image.val().data.begin(), out.final_image.val().data.end());
        for (auto& p : params) {
            const Tensor* g = t.grad_for(p.tensor);
            flat.insert(flat.end(), g->data.begin(), g->data.end());
        }
        return flat;
    };
    CHECK(run(99) == run(99));
    CHECK(run(99) != run(100));
}

TEST_CASE("per-sample tapes sum to the same gradients as a joint tape") {
    Rng rng(41);
    TensorT<double> w({4, 4});
    fill_uniform(w, rng, -1, 1);
    TensorT<double> xa({2, 4}), xb({2, 4});
    fill_uniform(xa, rng, -1, 1);
    fill_uniform(xb, rng, -1, 1);

    // joint: single tape over both samples
    TapeT<double> tj;
    auto lj = add(sum_all(square(matmul(tj.leaf(xa), tj.param(w)))),
                  sum_all(square(matmul(tj.leaf(xb), tj.param(w)))));
    tj.backward(lj);
    TensorT<double> joint = *tj.grad_for(&w);

    // separate tapes, gradients summed afterwards
    TensorT<double> acc = TensorT<double>::zeros(w.shape);
    for (const TensorT<double>* x : {&xa, &xb}) {
        TapeT<double> t;
        t.backward(sum_all(square(matmul(t.leaf(*x), t.param(w)))));
        const TensorT<double>* g = t.grad_for(&w);
        for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += (*g)[i];
    }
    for (std::int64_t i = 0; i < acc.size(); ++i)
        CHECK(acc[i] == doctest::Approx(joint[i]).epsilon(1e-12));
}
