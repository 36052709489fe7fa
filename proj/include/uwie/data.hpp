#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

// Binary PPM (P6, maxval 255) in and out; values map v/255 into [0,1].
// Parse errors carry the byte offset of the problem.
Image decode_ppm(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_ppm(const Image& img);

std::vector<unsigned char> read_file(const std::string& path);
void write_file(const std::string& path, const void* data, size_t size);
inline void write_file(const std::string& path, const std::string& text) {
    write_file(path, text.data(), text.size());
}

Image load_image(const std::string& path);
void save_image(const std::string& path, const Image& img);

// clamp into [0,1] (model outputs are unconstrained; metrics and files are not)
Image clamp01(Image img);

struct SamplePair {
    Image input;
    Image gt;
};
using Batch = std::vector<SamplePair>;

// Paired dataset rooted at <root>/input/*.ppm and <root>/gt/*.ppm, matched by
// basename, lexicographically ordered. Unmatched files are reported, never
// silently dropped.
struct PairedDataset {
    std::vector<std::pair<std::string, std::string>> pairs;  // (input path, gt path)
    std::vector<std::string> unmatched;                      // basenames present on one side only

    size_t size() const { return pairs.size(); }
    SamplePair load(size_t i) const;
};

PairedDataset scan_pairs(const std::string& input_dir, const std::string& gt_dir);
PairedDataset scan_dataset_root(const std::string& root);

// ---------------------------------------------------------------------------
// augmentation

struct AugmentConfig {
    int crop = 64;
    float p_flip_h = 0.5f;
    float p_rot90 = 0.5f;
    float mixup_alpha = 1.2f;
    bool crop_enabled = true;
    bool flip_enabled = true;
    bool rot_enabled = true;
    bool mixup_enabled = true;

    void validate() const {
        if (p_flip_h < 0 || p_flip_h > 1 || p_rot90 < 0 || p_rot90 > 1)
            throw ConfigError("augment: probabilities must be in [0,1]");
        if (mixup_alpha <= 0) throw ConfigError("augment: mixup_alpha must be positive");
        if (crop < 1) throw ConfigError("augment: crop must be >= 1");
    }
};

// individual transforms, exposed so tests can force them
Image crop_image(const Image& img, int top, int left, int size);
Image flip_h(const Image& img);
Image rot90(const Image& img);  // one 90-degree counterclockwise turn
// blends pair i with pair partner[i]: lambda*a + (1-lambda)*b on both sides
void apply_mixup(Batch& batch, const std::vector<float>& lambdas, const std::vector<int>& partners);

// Same geometric transform on input and target of every pair; deterministic
// for a given generator state.
Batch augment(const Batch& batch, const AugmentConfig& cfg, Rng& rng);

}  // namespace uwie
