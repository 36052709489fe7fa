#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "test_support.hpp"
#include "uwie/data.hpp"

using namespace uwie;
using testsup::TempDir;

namespace {

std::vector<unsigned char> bytes_of(const char* s) {
    return std::vector<unsigned char>(s, s + std::strlen(s));
}

}  // namespace

TEST_CASE("decode_ppm maps bytes into [0,1] planes") {
    std::vector<unsigned char> data = bytes_of("P6\n2 1\n255\n");
    const unsigned char px[6] = {255, 0, 0, 0, 0, 255};
    data.insert(data.end(), px, px + 6);
    Image img = decode_ppm(data);
    CHECK(img.shape == Shape{3, 1, 2});
    CHECK(img.at(0, 0, 0) == 1.0f);  // red pixel
    CHECK(img.at(1, 0, 0) == 0.0f);
    CHECK(img.at(2, 0, 0) == 0.0f);
    CHECK(img.at(0, 0, 1) == 0.0f);  // blue pixel
    CHECK(img.at(2, 0, 1) == 1.0f);
}

TEST_CASE("encode/decode round trip is exact after quantization") {
    Rng rng(1);
    Image img({3, 9, 7});
    fill_uniform(img, rng, 0, 1);
    Image quant = img;
    for (auto& v : quant.data) v = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
    Image round = decode_ppm(encode_ppm(img));
    CHECK(round.data == quant.data);
    // idempotent from then on
    CHECK(decode_ppm(encode_ppm(round)).data == round.data);
}

TEST_CASE("header comments are skipped") {
    std::vector<unsigned char> plain = bytes_of("P6\n1 1\n255\n");
    std::vector<unsigned char> commented = bytes_of("P6\n# cam\n1 1\n# another\n255\n");
    const unsigned char px[3] = {10, 20, 30};
    plain.insert(plain.end(), px, px + 3);
    commented.insert(commented.end(), px, px + 3);
    CHECK(decode_ppm(plain).data == decode_ppm(commented).data);
}

TEST_CASE("ppm errors carry byte offsets") {
    SUBCASE("bad magic") {
        CHECK_THROWS_WITH_AS(decode_ppm(bytes_of("P5\n1 1\n255\n")),
                             doctest::Contains("byte offset 0"), FormatError);
    }
    SUBCASE("unsupported maxval") {
        CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n1 1\n65535\n")), FormatError);
    }
    SUBCASE("truncated payload") {
        auto data = bytes_of("P6\n2 2\n255\n");
        data.push_back(0);
        CHECK_THROWS_WITH_AS(decode_ppm(data), doctest::Contains("truncated"), FormatError);
    }
    SUBCASE("missing header fields") {
        CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2\n")), FormatError);
    }
}

TEST_CASE("scan_pairs matches basenames and reports strays") {
    TempDir dir("scan");
    const std::string in = dir.str() + "/input", gt = dir.str() + "/gt";
    std::filesystem::create_directories(in);
    std::filesystem::create_directories(gt);
    Image tiny = Image::full({3, 2, 2}, 0.5f);

    SUBCASE("full match, lexicographic order") {
        save_image(in + "/b.ppm", tiny);
        save_image(in + "/a.ppm", tiny);
        save_image(gt + "/a.ppm", tiny);
        save_image(gt + "/b.ppm", tiny);
        PairedDataset ds = scan_pairs(in, gt);
        REQUIRE(ds.size() == 2);
        CHECK(ds.pairs[0].first.ends_with("a.ppm"));
        CHECK(ds.pairs[1].first.ends_with("b.ppm"));
        CHECK(ds.unmatched.empty());
    }
    SUBCASE("unmatched files are reported, not dropped silently") {
        save_image(in + "/a.ppm", tiny);
        save_image(in + "/c.ppm", tiny);
        save_image(gt + "/a.ppm", tiny);
        PairedDataset ds = scan_pairs(in, gt);
        CHECK(ds.size() == 1);
        REQUIRE(ds.unmatched.size() == 1);
        CHECK(ds.unmatched[0] == "c.ppm");
    }
    SUBCASE("empty intersection is a dataset error") {
        save_image(in + "/a.ppm", tiny);
        CHECK_THROWS_AS(scan_pairs(in, gt), DataError);
    }
}

TEST_CASE("geometric transforms are involutions where expected") {
    Rng rng(2);
    Image img({3, 6, 6});
    fill_uniform(img, rng, 0, 1);
    CHECK(flip_h(flip_h(img)).data == img.data);
    CHECK(rot90(rot90(rot90(rot90(img)))).data == img.data);
}

TEST_CASE("mixup with lambda forced to one keeps the first pair") {
    Batch batch = testsup::make_synthetic_pairs(2, 16, 16);
    const Batch before = batch;
    apply_mixup(batch, {1.0f, 0.25f}, {1, 0});
    CHECK(batch[0].input.data == before[0].input.data);
    CHECK(batch[0].gt.data == before[0].gt.data);
    // the second pair actually blended
    CHECK(batch[1].input.data != before[1].input.data);
}

TEST_CASE("augment applies identical geometry to input and target") {
    // when input == target, any geometric + mixup combination must keep them equal
    Rng data_rng(3);
    Batch batch;
    for (int i = 0; i < 3; ++i) {
        Image img({3, 24, 24});
        fill_uniform(img, data_rng, 0, 1);
        batch.push_back({img, img});
    }
    AugmentConfig cfg;
    cfg.crop = 16;
    cfg.p_flip_h = 1.0f;
    cfg.p_rot90 = 1.0f;
    Rng rng(4);
    Batch out = augment(batch, cfg, rng);
    REQUIRE(out.size() == 3);
    for (const auto& p : out) {
        CHECK(p.input.shape == Shape{3, 16, 16});
        CHECK(p.input.data == p.gt.data);
        for (auto v : p.input.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("augmentation is deterministic under a fixed seed") {
    Batch batch = testsup::make_synthetic_pairs(4, 24, 24);
    AugmentConfig cfg;
    cfg.crop = 16;
    Rng r1(77), r2(77), r3(78);
    Batch a = augment(batch, cfg, r1);
    Batch b = augment(batch, cfg, r2);
    Batch c = augment(batch, cfg, r3);
    bool same = true, diff = false;
    for (size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].input.data == b[i].input.data && a[i].gt.data == b[i].gt.data;
        diff = diff || a[i].input.data != c[i].input.data;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("crop larger than the image is a config error") {
    Batch batch = testsup::make_synthetic_pairs(1, 8, 8);
    AugmentConfig cfg;
    cfg.crop = 16;
    Rng rng(5);
    CHECK_THROWS_AS(augment(batch, cfg, rng), ConfigError);
}

TEST_CASE("beta sampling stays in (0,1) and honors alpha") {
    Rng rng(6);
    double mean = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.beta(1.2, 1.2);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        mean += v;
    }
    mean /= n;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.05));  // symmetric beta
}
