#pragma once

#include <vector>

#include "uwie/ops.hpp"

namespace uwie {

struct LossConfig {
    double eps_char = 1e-3;
    double lambda_freq = 0.1;
    double w_ssim = 0.4;
    double w_cltcc = 0.5;
    double w_maae = 0.5;
    double psnr_cap_db = 120.0;

    void validate() const {
        if (eps_char <= 0.0) throw ConfigError("loss: eps_char must be > 0");
        if (lambda_freq < 0 || w_ssim < 0 || w_cltcc < 0 || w_maae < 0)
            throw ConfigError("loss: weights must be non-negative");
    }
};

// mean over elements of sqrt((O-T)^2 + eps^2)
template <typename T>
Var<T> charbonnier(Var<T> out, Var<T> target, T eps) {
    Var<T> d = sub(out, target);
    return mean_all(sqrt_op(add_scalar(square(d), eps * eps)));
}

// per channel: mean over bins of |dRe| + |dIm| of the unnormalized 2D DFT,
// averaged over channels. Inputs [C,H,W] with power-of-two extents.
template <typename T>
Var<T> frequency_loss(Var<T> out, Var<T> target) {
    detail::check_binary(out, target, "frequency_loss");
    const TensorT<T>& ov = out.val();
    if (ov.rank() != 3) throw ShapeError("frequency_loss: expected [C,H,W]");
    const int C = ov.dim(0), H = ov.dim(1), W = ov.dim(2);
    TapeT<T>& t = *out.tape;
    Var<T> acc = t.leaf(TensorT<T>::scalar(T(0)), "zero");
    for (int c = 0; c < C; ++c) {
        Var<T> oc = reshape(slice_channels(out, c, 1), {H, W});
        Var<T> tc = reshape(slice_channels(target, c, 1), {H, W});
        auto [ore, oim] = fft2d(oc);
        auto [tre, tim] = fft2d(tc);
        Var<T> l = add(mean_all(abs_op(sub(ore, tre))), mean_all(abs_op(sub(oim, tim))));
        acc = add(acc, l);
    }
    return mul_scalar(acc, T(1) / T(C));
}

// differentiable PSNR in dB; the 1e-12 MSE floor doubles as the 120 dB cap
template <typename T>
Var<T> psnr_op(Var<T> out, Var<T> target, double cap_db = 120.0) {
    Var<T> mse = mean_all(square(sub(out, target)));
    const double floor = std::pow(10.0, -cap_db / 10.0);
    Var<T> db = mul_scalar(log_op(clamp_min_op(mse, static_cast<T>(floor))),
                           static_cast<T>(-10.0 / std::log(10.0)));
    return db;
}

// differentiable SSIM: 11x11 Gaussian window (sigma 1.5), valid positions,
// K1=0.01 K2=0.03 L=1, averaged over channels. Inputs [C,H,W], extents >= 11.
template <typename T>
Var<T> ssim_op(Var<T> out, Var<T> target) {
    detail::check_binary(out, target, "ssim");
    const TensorT<T>& ov = out.val();
    if (ov.rank() != 3) throw ShapeError("ssim: expected [C,H,W]");
    const int C = ov.dim(0), H = ov.dim(1), W = ov.dim(2);
    constexpr int kWin = 11;
    if (H < kWin || W < kWin) throw ShapeError("ssim: image smaller than the 11x11 window");
    constexpr double kSigma = 1.5;
    const T c1 = T(0.01 * 0.01), c2 = T(0.03 * 0.03);

    TapeT<T>& t = *out.tape;
    TensorT<T> g({1, 1, kWin, kWin});
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - (kWin - 1) / 2.0, dx = j - (kWin - 1) / 2.0;
            const double w = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            g.at(0, 0, i, j) = static_cast<T>(w);
            wsum += w;
        }
    }
    for (auto& v : g.data) v = static_cast<T>(static_cast<double>(v) / wsum);
    Var<T> win = t.leaf(std::move(g), "ssim_window");

    auto blur = [&](Var<T> x) { return conv2d(x, win, 1, Pad::kValid); };

    Var<T> acc = t.leaf(TensorT<T>::scalar(T(0)), "zero");
    for (int c = 0; c < C; ++c) {
        Var<T> a = slice_channels(out, c, 1);
        Var<T> b = slice_channels(target, c, 1);
        Var<T> mu1 = blur(a), mu2 = blur(b);
        Var<T> mu1s = square(mu1), mu2s = square(mu2), mu12 = mul(mu1, mu2);
        Var<T> var1 = sub(blur(square(a)), mu1s);
        Var<T> var2 = sub(blur(square(b)), mu2s);
        Var<T> cov = sub(blur(mul(a, b)), mu12);
        Var<T> num = mul(add_scalar(mul_scalar(mu12, T(2)), c1), add_scalar(mul_scalar(cov, T(2)), c2));
        Var<T> den = mul(add_scalar(add(mu1s, mu2s), c1), add_scalar(add(var1, var2), c2));
        acc = add(acc, mean_all(div(num, den)));
    }
    return mul_scalar(acc, T(1) / T(C));
}

// L_GT = -PSNR/cap + w_ssim * (1 - SSIM)
template <typename T>
Var<T> gt_loss(Var<T> out, Var<T> target, const LossConfig& cfg) {
    Var<T> lp = mul_scalar(psnr_op(out, target, cfg.psnr_cap_db), static_cast<T>(-1.0 / cfg.psnr_cap_db));
    Var<T> ls = add_scalar(mul_scalar(ssim_op(out, target), T(-1)), T(1));
    return add(lp, mul_scalar(ls, static_cast<T>(cfg.w_ssim)));
}

// sum over stages/scales of charbonnier + lambda * frequency; target pyramid
// built by bilinear halving.
template <typename T>
Var<T> maae_loss(const std::vector<std::vector<Var<T>>>& outs, Var<T> target, const LossConfig& cfg) {
    if (outs.empty() || outs[0].empty()) throw ShapeError("maae_loss: no stage outputs");
    TapeT<T>& t = *target.tape;
    const int N = static_cast<int>(outs[0].size());
    std::vector<Var<T>> targets;
    targets.reserve(static_cast<size_t>(N));
    targets.push_back(target);
    for (int n = 1; n < N; ++n) {
        const TensorT<T>& prev = targets.back().val();
        targets.push_back(bilinear_resize(targets.back(), prev.dim(1) / 2, prev.dim(2) / 2));
    }
    Var<T> acc = t.leaf(TensorT<T>::scalar(T(0)), "zero");
    for (const auto& row : outs) {
        if (static_cast<int>(row.size()) != N) throw ShapeError("maae_loss: ragged output grid");
        for (int n = 0; n < N; ++n) {
            if (!same_shape(row[static_cast<size_t>(n)].val().shape, targets[static_cast<size_t>(n)].val().shape))
                throw ShapeError("maae_loss: output scale " + std::to_string(n) +
                                 " does not follow the halving law");
            Var<T> lc = charbonnier(row[static_cast<size_t>(n)], targets[static_cast<size_t>(n)],
                                    static_cast<T>(cfg.eps_char));
            Var<T> lf = frequency_loss(row[static_cast<size_t>(n)], targets[static_cast<size_t>(n)]);
            acc = add(acc, add(lc, mul_scalar(lf, static_cast<T>(cfg.lambda_freq))));
        }
    }
    return acc;
}

// L_total = L_GT + w_cltcc * L_CLTCC + w_maae * L_MAAE
template <typename T>
Var<T> total_loss(Var<T> l_gt, Var<T> l_cltcc, Var<T> l_maae, const LossConfig& cfg) {
    return add(l_gt, add(mul_scalar(l_cltcc, static_cast<T>(cfg.w_cltcc)),
                         mul_scalar(l_maae, static_cast<T>(cfg.w_maae))));
}

// Scalar compositions used for reporting and the coefficient probes.
inline double compose_gt(double psnr_db, double ssim, const LossConfig& cfg) {
    return -psnr_db / cfg.psnr_cap_db + cfg.w_ssim * (1.0 - ssim);
}
inline double compose_total(double l_gt, double l_cltcc, double l_maae, const LossConfig& cfg) {
    return l_gt + cfg.w_cltcc * l_cltcc + cfg.w_maae * l_maae;
}

}  // namespace uwie
