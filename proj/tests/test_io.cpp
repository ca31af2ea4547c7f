// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "bokeh/io.hpp"

using namespace bokeh;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bokeh_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ImageBuffer random_buffer(int w, int h, int c, uint64_t seed, float lo = 0.f,
                          float hi = 1.f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    ImageBuffer img(w, h, c);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
    return img;
}

} // namespace

TEST_CASE("PFM round trip is bit exact, including negatives") {
    TempDir tmp;
    for (int c : {1, 3}) {
        ImageBuffer img = random_buffer(13, 9, c, 42 + c, -5.f, 5.f);
        img.data()[0] = 0.f;
        fs::path p = tmp.path / ("roundtrip" + std::to_string(c) + ".pfm");
        io::save_pfm(p, img);
        ImageBuffer back = io::load_pfm(p);
        REQUIRE(back.same_shape(img));
        for (size_t i = 0; i < img.size(); ++i) CHECK(back.data()[i] == img.data()[i]);
    }
}

TEST_CASE("PFM reads a hand-written little-endian fixture, bottom row first") {
    TempDir tmp;
    fs::path p = tmp.path / "fixture.pfm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "Pf\n2 2\n-1.0\n";
        // file stores bottom row first: (0,1)=3 (1,1)=4 then (0,0)=1 (1,0)=2
        const float rows[4] = {3.f, 4.f, 1.f, 2.f};
        f.write(reinterpret_cast<const char *>(rows), sizeof(rows));
    }
    ImageBuffer img = io::load_pfm(p);
    REQUIRE(img.width() == 2);
    REQUIRE(img.height() == 2);
    REQUIRE(img.channels() == 1);
    CHECK(img.at(0, 0) == 1.f);
    CHECK(img.at(1, 0) == 2.f);
    CHECK(img.at(0, 1) == 3.f);
    CHECK(img.at(1, 1) == 4.f);
}

TEST_CASE("PFM honors the scale magnitude") {
    TempDir tmp;
    fs::path p = tmp.path / "scaled.pfm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "Pf\n1 1\n-2.0\n";
        const float v = 3.f;
        f.write(reinterpret_cast<const char *>(&v), sizeof(v));
    }
    CHECK(io::load_pfm(p).at(0, 0) == doctest::Approx(6.f));
}

TEST_CASE("grayscale PNG round trips through 8 bits without a transfer curve") {
    TempDir tmp;
    ImageBuffer img(16, 4, 1);
    for (size_t i = 0; i < img.size(); ++i)
        img.data()[i] = static_cast<float>(i) / (img.size() - 1);
    fs::path p = tmp.path / "gray.png";
    io::save_png(p, img);
    ImageBuffer back = io::load_png(p);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5f / 255.f + 1e-6f);
}

TEST_CASE("color PNG round trips within quantization after the 2.2 curve") {
    TempDir tmp;
    ImageBuffer img = random_buffer(20, 10, 3, 7);
    fs::path p = tmp.path / "color.png";
    io::save_png(p, img);
    ImageBuffer back = io::load_png(p);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.size(); ++i) {
        // one 8-bit step in sRGB maps to a value-dependent linear step
        float encoded = io::linear_to_srgb(img.data()[i]);
        float lo = io::srgb_to_linear(std::max(encoded - 0.5f / 255.f, 0.f));
        float hi = io::srgb_to_linear(std::min(encoded + 0.5f / 255.f, 1.f));
        CHECK(back.data()[i] >= lo - 1e-6f);
        CHECK(back.data()[i] <= hi + 1e-6f);
    }
}

TEST_CASE("PNG writer is deterministic") {
    TempDir tmp;
    ImageBuffer img = random_buffer(12, 12, 3, 9);
    io::save_png(tmp.path / "a.png", img);
    io::save_png(tmp.path / "b.png", img);
    std::ifstream fa(tmp.path / "a.png", std::ios::binary);
    std::ifstream fb(tmp.path / "b.png", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(!sa.empty());
}

TEST_CASE("scene save/load round trip preserves lens config and layer data") {
    TempDir tmp;
    LayeredScene scene;
    for (int l = 0; l < 2; ++l) {
        Layer layer{random_buffer(8, 6, 3, 100 + l), random_buffer(8, 6, 1, 200 + l),
                    random_buffer(8, 6, 1, 300 + l, -0.5f, 0.5f)};
        scene.layers.push_back(std::move(layer));
    }
    scene.layers.back().alpha.fill(1.f);

    LensConfig lens;
    lens.focus_disparity = 0.25;
    lens.blur_scale = 7.5;
    lens.mode = RenderMode::Soft;
    lens.max_radius = 12;
    lens.soft.leak_slope = 0.02;
    lens.occlusion_enabled = false;

    io::save_scene(tmp.path, scene, lens);
    auto [back, lens2] = io::load_scene(tmp.path / "manifest.json");

    CHECK(lens2.focus_disparity == doctest::Approx(0.25));
    CHECK(lens2.blur_scale == doctest::Approx(7.5));
    CHECK(lens2.mode == RenderMode::Soft);
    CHECK(lens2.max_radius == 12);
    CHECK(lens2.soft.leak_slope == doctest::Approx(0.02));
    CHECK(lens2.occlusion_enabled == false);

    REQUIRE(back.layer_count() == 2);
    for (int l = 0; l < 2; ++l) {
        // disparity goes through PFM: bit exact
        for (size_t i = 0; i < back.layers[l].disparity.size(); ++i)
            CHECK(back.layers[l].disparity.data()[i] ==
                  scene.layers[l].disparity.data()[i]);
        // alpha through grayscale PNG: 8-bit quantization
        for (size_t i = 0; i < back.layers[l].alpha.size(); ++i)
            CHECK(std::abs(back.layers[l].alpha.data()[i] -
                           scene.layers[l].alpha.data()[i]) <= 0.5f / 255.f + 1e-6f);
    }
}

TEST_CASE("manifest errors are reported with stable codes") {
    TempDir tmp;
    auto write = [&](const std::string &name, const std::string &text) {
        std::ofstream(tmp.path / name) << text;
        return tmp.path / name;
    };

    const std::string lens_ok =
        R"("lens":{"focus_disparity":0,"blur_scale":4,"mode":"hard","kernel":"circle"})";

    CHECK_THROWS_WITH_AS(io::load_scene(tmp.path / "missing.json"),
                         doctest::Contains("PARSE_ERROR"), Error);
    CHECK_THROWS_WITH_AS(io::load_scene(write("bad.json", "{ not json")),
                         doctest::Contains("PARSE_ERROR"), Error);
    CHECK_THROWS_WITH_AS(
        io::load_scene(write("unknown.json",
                             R"({"lens":{"wavelength":500},"layers":[]})")),
        doctest::Contains("PARSE_ERROR"), Error);
    CHECK_THROWS_WITH_AS(
        io::load_scene(write("nolayers.json", "{" + lens_ok + R"(,"layers":[]})")),
        doctest::Contains("PARSE_ERROR"), Error);

    ImageBuffer img(2, 2, 3, 0.5f);
    io::save_png(tmp.path / "c.png", img);
    io::save_png(tmp.path / "a.png", ImageBuffer(2, 2, 1, 1.f));
    io::save_png(tmp.path / "a_half.png", ImageBuffer(2, 2, 1, 0.5f));
    io::save_pfm(tmp.path / "d.pfm", ImageBuffer(2, 2, 1, 0.1f));

    // a layer entry without a disparity map is a parse error
    CHECK_THROWS_WITH_AS(
        io::load_scene(write("nodisp.json",
                             "{" + lens_ok +
                                 R"(,"layers":[{"color":"c.png","alpha":"a.png"}]})")),
        doctest::Contains("PARSE_ERROR"), Error);

    // a translucent back layer violates the scene invariants
    CHECK_THROWS_WITH_AS(
        io::load_scene(write(
            "translucent.json",
            "{" + lens_ok +
                R"(,"layers":[{"color":"c.png","alpha":"a_half.png","disparity":"d.pfm"}]})")),
        doctest::Contains("SCENE_INVALID"), Error);
}

TEST_CASE("malformed image payloads raise DECODE_ERROR") {
    TempDir tmp;
    std::ofstream(tmp.path / "broken.png", std::ios::binary) << "not a png";
    CHECK_THROWS_WITH_AS(io::load_png(tmp.path / "broken.png"),
                         doctest::Contains("DECODE_ERROR"), Error);
    std::ofstream(tmp.path / "broken.pfm", std::ios::binary) << "P6\n2 2\n255\n";
    CHECK_THROWS_WITH_AS(io::load_pfm(tmp.path / "broken.pfm"),
                         doctest::Contains("DECODE_ERROR"), Error);
}
