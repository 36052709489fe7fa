#pragma once

// Shared helpers for the test suites: synthetic underwater-style image pairs
// (smooth clean scenes; degradation = channel-wise attenuation curves plus
// blur and vignette, the raw/reference structure the pipeline is built for),
// temp dirs, and small config presets.

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "uwie/data.hpp"
#include "uwie/trainer.hpp"

namespace testsup {

using namespace uwie;

// smooth multi-frequency scene in [0.05, 0.95]
inline Image make_clean_image(std::uint64_t seed, int H, int W) {
    Rng rng(seed);
    struct Wave {
        double fy, fx, phase, amp;
    };
    Image img({3, H, W});
    for (int c = 0; c < 3; ++c) {
        Wave waves[4];
        for (auto& w : waves)
            w = {rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0), rng.uniform(0, 6.28318),
                 rng.uniform(0.1, 0.3)};
        const double base = rng.uniform(0.35, 0.65);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double v = base;
                for (const auto& w : waves)
                    v += w.amp * std::sin(2.0 * M_PI * (w.fy * y / H + w.fx * x / W) + w.phase);
                v = 0.5 + 0.45 * std::tanh(1.2 * (v - 0.5));
                img.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    return img;
}

// wavelength-dependent attenuation (red dies first), light blur, vignette
inline Image degrade_image(const Image& clean) {
    const int H = clean.dim(1), W = clean.dim(2);
    Image cast({3, H, W});
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double r = clean.at(0, y, x), g = clean.at(1, y, x), b = clean.at(2, y, x);
            cast.at(0, y, x) = static_cast<float>(0.30 * std::pow(r, 1.3) + 0.02);
            cast.at(1, y, x) = static_cast<float>(0.70 * std::pow(g, 1.1) + 0.04);
            cast.at(2, y, x) = static_cast<float>(0.85 * b + 0.06);
        }
    }
    // 3x3 box blur with edge clamping
    Image blurred({3, H, W});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double acc = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = std::min(H - 1, std::max(0, y + dy));
                        const int xx = std::min(W - 1, std::max(0, x + dx));
                        acc += cast.at(c, yy, xx);
                    }
                }
                blurred.at(c, y, x) = static_cast<float>(acc / 9.0);
            }
        }
    }
    // radial vignette
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const double ny = (2.0 * y - H + 1.0) / H, nx = (2.0 * x - W + 1.0) / W;
                const double vig = 1.0 - 0.25 * (ny * ny + nx * nx);
                blurred.at(c, y, x) = static_cast<float>(blurred.at(c, y, x) * vig);
            }
        }
    }
    return clamp01(std::move(blurred));
}

inline Batch make_synthetic_pairs(int count, int H, int W, std::uint64_t seed = 41) {
    Batch out;
    for (int i = 0; i < count; ++i) {
        SamplePair p;
        p.gt = make_clean_image(seed + 1000 * static_cast<std::uint64_t>(i) + 7, H, W);
        p.input = degrade_image(p.gt);
        out.push_back(std::move(p));
    }
    return out;
}

// unique temp dir, removed on destruction
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("uwie_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string str() const { return path.string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

inline void write_dataset(const std::string& root, const Batch& pairs) {
    std::filesystem::create_directories(root + "/input");
    std::filesystem::create_directories(root + "/gt");
    for (size_t i = 0; i < pairs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "pair%03zu.ppm", i);
        save_image(root + "/input/" + name, pairs[i].input);
        save_image(root + "/gt/" + name, pairs[i].gt);
    }
}

// desk-scale training config on in-memory pairs
inline TrainConfig desk_config(std::uint64_t seed = 1234) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.model.maae.stages = 2;
    cfg.model.maae.scales = 2;
    cfg.model.maae.base_channels = 8;
    cfg.model.maae.block_size = 4;
    cfg.model.maae.grid_size = 4;
    cfg.model.maae.depth_per_scale = 1;
    cfg.augment.crop = 64;
    return cfg;
}

}  // namespace testsup
