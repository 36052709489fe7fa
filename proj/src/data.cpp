#include "uwie/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

namespace uwie {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PPM

namespace {

struct ByteCursor {
    const std::vector<unsigned char>& bytes;
    size_t pos = 0;

    bool eof() const { return pos >= bytes.size(); }
    unsigned char peek() const { return bytes[pos]; }

    [[noreturn]] void fail(const std::string& what) const {
        throw FormatError("ppm: " + what + " at byte offset " + std::to_string(pos));
    }

    // skip whitespace and '#' comment lines
    void skip_space_and_comments() {
        while (!eof()) {
            const unsigned char c = peek();
            if (c == '#') {
                while (!eof() && peek() != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    }

    int read_int(const char* what) {
        skip_space_and_comments();
        if (eof()) fail(std::string("missing ") + what);
        if (peek() < '0' || peek() > '9') fail(std::string("expected digit for ") + what);
        long v = 0;
        while (!eof() && peek() >= '0' && peek() <= '9') {
            v = v * 10 + (peek() - '0');
            if (v > 1000000000L) fail(std::string(what) + " out of range");
            ++pos;
        }
        return static_cast<int>(v);
    }
};

}  // namespace

Image decode_ppm(const std::vector<unsigned char>& bytes) {
    ByteCursor cur{bytes};
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw FormatError("ppm: missing P6 magic at byte offset 0");
    cur.pos = 2;
    const int w = cur.read_int("width");
    const int h = cur.read_int("height");
    const int maxval = cur.read_int("maxval");
    if (w < 1 || h < 1) cur.fail("non-positive image extents");
    if (maxval != 255) cur.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (cur.eof()) cur.fail("missing whitespace after header");
    const unsigned char sep = cur.peek();
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
        cur.fail("expected single whitespace after maxval");
    ++cur.pos;
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (bytes.size() - cur.pos < need)
        throw FormatError("ppm: truncated payload at byte offset " + std::to_string(bytes.size()) +
                          " (need " + std::to_string(need + cur.pos) + " bytes)");
    Image img({3, h, w});
    const unsigned char* p = bytes.data() + cur.pos;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (std::int64_t i = 0; i < plane; ++i) {
        img[0 * plane + i] = static_cast<float>(p[i * 3 + 0]) / 255.0f;
        img[1 * plane + i] = static_cast<float>(p[i * 3 + 1]) / 255.0f;
        img[2 * plane + i] = static_cast<float>(p[i * 3 + 2]) / 255.0f;
    }
    return img;
}

std::vector<unsigned char> encode_ppm(const Image& img) {
    if (img.rank() != 3 || img.dim(0) != 3) throw ShapeError("encode_ppm: expected [3,H,W]");
    const int h = img.dim(1), w = img.dim(2);
    char header[64];
    const int hn = std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", w, h);
    std::vector<unsigned char> out;
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    out.reserve(static_cast<size_t>(hn) + static_cast<size_t>(plane) * 3);
    out.insert(out.end(), header, header + hn);
    for (std::int64_t i = 0; i < plane; ++i) {
        for (int c = 0; c < 3; ++c) {
            float v = img[c * plane + i];
            v = std::min(1.0f, std::max(0.0f, v));
            out.push_back(static_cast<unsigned char>(std::lround(v * 255.0f)));
        }
    }
    return out;
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open file: " + path);
    std::fseek(f, 0, SEEK_END);
    const long n = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<unsigned char> bytes(static_cast<size_t>(n));
    const size_t got = n > 0 ? std::fread(bytes.data(), 1, static_cast<size_t>(n), f) : 0;
    std::fclose(f);
    if (got != static_cast<size_t>(n)) throw DataError("short read: " + path);
    return bytes;
}

void write_file(const std::string& path, const void* data, size_t size) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot write file: " + path);
    const size_t put = size > 0 ? std::fwrite(data, 1, size, f) : 0;
    std::fclose(f);
    if (put != size) throw DataError("short write: " + path);
}

Image load_image(const std::string& path) {
    try {
        return decode_ppm(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(std::string(e.what()) + " [" + path + "]");
    }
}

void save_image(const std::string& path, const Image& img) {
    const auto bytes = encode_ppm(img);
    write_file(path, bytes.data(), bytes.size());
}

Image clamp01(Image img) {
    for (auto& v : img.data) v = std::min(1.0f, std::max(0.0f, v));
    return img;
}

// ---------------------------------------------------------------------------
// dataset

SamplePair PairedDataset::load(size_t i) const {
    const auto& [in_path, gt_path] = pairs.at(i);
    SamplePair p{load_image(in_path), load_image(gt_path)};
    if (!same_shape(p.input.shape, p.gt.shape))
        throw DataError("pair extents differ: " + in_path + " vs " + gt_path);
    return p;
}

PairedDataset scan_pairs(const std::string& input_dir, const std::string& gt_dir) {
    auto list_ppms = [](const std::string& dir) {
        if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
        std::map<std::string, std::string> out;  // basename -> path, sorted
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            if (e.path().extension() == ".ppm") out[e.path().filename().string()] = e.path().string();
        }
        return out;
    };
    const auto ins = list_ppms(input_dir);
    const auto gts = list_ppms(gt_dir);

    PairedDataset ds;
    for (const auto& [name, path] : ins) {
        auto it = gts.find(name);
        if (it != gts.end())
            ds.pairs.emplace_back(path, it->second);
        else
            ds.unmatched.push_back(name);
    }
    for (const auto& [name, path] : gts)
        if (ins.find(name) == ins.end()) ds.unmatched.push_back(name);
    std::sort(ds.unmatched.begin(), ds.unmatched.end());
    if (ds.pairs.empty())
        throw DataError("no matching .ppm pairs between " + input_dir + " and " + gt_dir);
    return ds;
}

PairedDataset scan_dataset_root(const std::string& root) {
    return scan_pairs(root + "/input", root + "/gt");
}

// ---------------------------------------------------------------------------
// augmentation

Image crop_image(const Image& img, int top, int left, int size) {
    const int H = img.dim(1), W = img.dim(2);
    if (size < 1 || top < 0 || left < 0 || top + size > H || left + size > W)
        throw ConfigError("crop: window " + std::to_string(size) + "@" + std::to_string(top) + "," +
                          std::to_string(left) + " exceeds " + std::to_string(H) + "x" + std::to_string(W));
    Image out({3, size, size});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, top + y, left + x);
    return out;
}

Image flip_h(const Image& img) {
    const int H = img.dim(1), W = img.dim(2);
    Image out(img.shape);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at(c, y, x) = img.at(c, y, W - 1 - x);
    return out;
}

Image rot90(const Image& img) {
    const int H = img.dim(1), W = img.dim(2);
    Image out({3, W, H});
    // (y,x) -> (W-1-x, y)
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) out.at(c, W - 1 - x, y) = img.at(c, y, x);
    return out;
}

void apply_mixup(Batch& batch, const std::vector<float>& lambdas, const std::vector<int>& partners) {
    if (lambdas.size() != batch.size() || partners.size() != batch.size())
        throw ConfigError("mixup: arity mismatch");
    const Batch src = batch;  // blend from the pre-mixup batch
    for (size_t i = 0; i < batch.size(); ++i) {
        const int j = partners[i];
        if (j < 0 || j >= static_cast<int>(src.size())) throw ConfigError("mixup: bad partner index");
        const float lam = lambdas[i];
        if (!same_shape(src[i].input.shape, src[static_cast<size_t>(j)].input.shape))
            throw ShapeError("mixup: pair extents differ");
        for (std::int64_t k = 0; k < batch[i].input.size(); ++k) {
            batch[i].input[k] = lam * src[i].input[k] + (1.0f - lam) * src[static_cast<size_t>(j)].input[k];
            batch[i].gt[k] = lam * src[i].gt[k] + (1.0f - lam) * src[static_cast<size_t>(j)].gt[k];
        }
    }
}

Batch augment(const Batch& batch, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    Batch out;
    out.reserve(batch.size());
    for (const auto& pair : batch) {
        SamplePair p = pair;
        if (cfg.crop_enabled) {
            const int H = p.input.dim(1), W = p.input.dim(2);
            if (cfg.crop > H || cfg.crop > W)
                throw ConfigError("augment: crop " + std::to_string(cfg.crop) + " exceeds image " +
                                  std::to_string(H) + "x" + std::to_string(W));
            const int top = H > cfg.crop ? rng.uniform_int(H - cfg.crop + 1) : 0;
            const int left = W > cfg.crop ? rng.uniform_int(W - cfg.crop + 1) : 0;
            p.input = crop_image(p.input, top, left, cfg.crop);
            p.gt = crop_image(p.gt, top, left, cfg.crop);
        }
        if (cfg.flip_enabled && rng.uniform() < cfg.p_flip_h) {
            p.input = flip_h(p.input);
            p.gt = flip_h(p.gt);
        }
        if (cfg.rot_enabled && rng.uniform() < cfg.p_rot90) {
            p.input = rot90(p.input);
            p.gt = rot90(p.gt);
        }
        out.push_back(std::move(p));
    }
    if (cfg.mixup_enabled && out.size() > 1) {
        std::vector<float> lambdas(out.size());
        std::vector<int> partners(out.size());
        for (size_t i = 0; i < out.size(); ++i) {
            lambdas[i] = static_cast<float>(rng.beta(cfg.mixup_alpha, cfg.mixup_alpha));
            partners[i] = rng.uniform_int(static_cast<int>(out.size()));
        }
        apply_mixup(out, lambdas, partners);
    }
    return out;
}

}  // namespace uwie
