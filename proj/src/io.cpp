// SPDX-License-Identifier: Apache-2.0

#include "bokeh/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include <json.hpp>

namespace bokeh::io {

namespace fs = std::filesystem;
using nlohmann::json;

float srgb_to_linear(float v) { return std::pow(v, 2.2f); }
float linear_to_srgb(float v) { return std::pow(std::max(v, 0.f), 1.f / 2.2f); }

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

struct FileCloser {
    void operator()(FILE *f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

} // namespace

ImageBuffer load_png(const fs::path &path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw Error("DECODE_ERROR", "cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("DECODE_ERROR", "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("DECODE_ERROR", "failed to decode " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels == 2) { // gray + alpha: keep gray only
        png_set_strip_alpha(png);
        png_read_update_info(png, info);
        channels = png_get_channels(png, info);
    }
    if (channels != 1 && channels != 3 && channels != 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("DECODE_ERROR", "unsupported channel count in " + path.string());
    }

    std::vector<png_byte> raw(static_cast<size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer img(static_cast<int>(w), static_cast<int>(h), channels);
    const bool color = channels >= 3;
    for (size_t i = 0; i < raw.size(); ++i) {
        float v = raw[i] / 255.f;
        // alpha channel of RGBA stays linear
        bool is_alpha = channels == 4 && (i % 4 == 3);
        img.data()[i] = (color && !is_alpha) ? srgb_to_linear(v) : v;
    }
    return img;
}

void save_png(const fs::path &path, const ImageBuffer &img) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error("IO_FAILURE", "cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("IO_FAILURE", "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("IO_FAILURE", "failed to encode " + path.string());
    }
    png_init_io(png, fp.get());

    const int ch = img.channels();
    int color_type = ch == 1   ? PNG_COLOR_TYPE_GRAY
                     : ch == 3 ? PNG_COLOR_TYPE_RGB
                               : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, img.width(), img.height(), 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);

    const bool color = ch >= 3;
    std::vector<png_byte> raw(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        bool is_alpha = ch == 4 && (i % 4 == 3);
        float v = img.data()[i];
        if (color && !is_alpha) v = linear_to_srgb(v);
        v = std::clamp(v, 0.f, 1.f);
        raw[i] = static_cast<png_byte>(std::lround(v * 255.f));
    }
    std::vector<png_bytep> rows(img.height());
    for (int y = 0; y < img.height(); ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * img.width() * ch;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------------------
// PFM
// ---------------------------------------------------------------------------

namespace {

void swap_float_bytes(float &f) {
    auto u = std::bit_cast<uint32_t>(f);
    u = ((u & 0xFF000000u) >> 24) | ((u & 0x00FF0000u) >> 8) | ((u & 0x0000FF00u) << 8) |
        ((u & 0x000000FFu) << 24);
    f = std::bit_cast<float>(u);
}

} // namespace

ImageBuffer load_pfm(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("DECODE_ERROR", "cannot open " + path.string());
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0 || !in)
        throw Error("DECODE_ERROR", "bad PFM header in " + path.string());
    in.get(); // single whitespace after the header

    const int ch = magic == "PF" ? 3 : 1;
    const bool file_little = scale < 0.0;
    const bool host_little = std::endian::native == std::endian::little;
    const float mag = static_cast<float>(std::abs(scale));

    ImageBuffer img(w, h, ch);
    std::vector<float> row(static_cast<size_t>(w) * ch);
    for (int y = h - 1; y >= 0; --y) { // bottom-to-top storage
        in.read(reinterpret_cast<char *>(row.data()), row.size() * sizeof(float));
        if (!in) throw Error("DECODE_ERROR", "truncated PFM " + path.string());
        for (size_t i = 0; i < row.size(); ++i) {
            float v = row[i];
            if (file_little != host_little) swap_float_bytes(v);
            if (mag != 1.f) v *= mag;
            img.data()[static_cast<size_t>(y) * w * ch + i] = v;
        }
    }
    return img;
}

void save_pfm(const fs::path &path, const ImageBuffer &img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw Error("IO_FAILURE", "PFM supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("IO_FAILURE", "cannot write " + path.string());
    const bool host_little = std::endian::native == std::endian::little;
    out << (img.channels() == 3 ? "PF" : "Pf") << "\n"
        << img.width() << " " << img.height() << "\n"
        << (host_little ? "-1.0" : "1.0") << "\n";
    const int w = img.width(), ch = img.channels();
    for (int y = img.height() - 1; y >= 0; --y)
        out.write(reinterpret_cast<const char *>(img.data() + static_cast<size_t>(y) * w * ch),
                  static_cast<std::streamsize>(w) * ch * sizeof(float));
    if (!out) throw Error("IO_FAILURE", "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Scene manifest
// ---------------------------------------------------------------------------

namespace {

const char *kLensKeys[] = {"focus_disparity", "blur_scale", "mode",      "kernel",
                           "max_radius",      "soft",       "occlusion"};
const char *kSoftKeys[] = {"occ_focal_sharpness", "occ_step_sharpness", "occ_step_offset",
                           "scat_sharpness",      "scat_gain",          "scat_margin",
                           "leak_slope"};
const char *kLayerKeys[] = {"color", "alpha", "disparity"};

template <size_t N>
void reject_unknown(const json &obj, const char *(&allowed)[N], const std::string &where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char *k : allowed)
            if (it.key() == k) known = true;
        if (!known)
            throw Error("PARSE_ERROR", "unknown key '" + it.key() + "' in " + where);
    }
}

const json &require(const json &obj, const char *key, const std::string &where) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw Error("PARSE_ERROR", "missing key '" + std::string(key) + "' in " + where);
    return *it;
}

} // namespace

std::pair<LayeredScene, LensConfig> load_scene(const fs::path &manifest) {
    std::ifstream in(manifest);
    if (!in) throw Error("PARSE_ERROR", "cannot open " + manifest.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception &e) {
        throw Error("PARSE_ERROR", std::string("invalid JSON: ") + e.what());
    }
    static const char *kRootKeys[] = {"lens", "layers"};
    reject_unknown(root, kRootKeys, "manifest");

    const fs::path base = manifest.parent_path();
    LensConfig lens;
    const json &jl = require(root, "lens", "manifest");
    reject_unknown(jl, kLensKeys, "lens");
    lens.focus_disparity = require(jl, "focus_disparity", "lens").get<double>();
    lens.blur_scale = require(jl, "blur_scale", "lens").get<double>();
    std::string mode = require(jl, "mode", "lens").get<std::string>();
    if (mode == "hard")
        lens.mode = RenderMode::Hard;
    else if (mode == "soft")
        lens.mode = RenderMode::Soft;
    else
        throw Error("PARSE_ERROR", "mode must be 'hard' or 'soft'");
    if (jl.contains("max_radius")) lens.max_radius = jl["max_radius"].get<int>();
    if (jl.contains("occlusion")) lens.occlusion_enabled = jl["occlusion"].get<bool>();
    std::string kernel = require(jl, "kernel", "lens").get<std::string>();
    if (kernel == "circle") {
        lens.kernel.kind = ApertureKind::Circle;
    } else {
        lens.kernel.kind = ApertureKind::Mask;
        ImageBuffer m = load_png(base / kernel);
        if (m.channels() != 1) throw Error("DECODE_ERROR", "kernel mask must be grayscale");
        lens.kernel.mask = std::move(m);
    }
    if (jl.contains("soft")) {
        const json &js = jl["soft"];
        reject_unknown(js, kSoftKeys, "soft");
        auto get = [&](const char *k, double &dst) {
            if (js.contains(k)) dst = js[k].get<double>();
        };
        get("occ_focal_sharpness", lens.soft.occ_focal_sharpness);
        get("occ_step_sharpness", lens.soft.occ_step_sharpness);
        get("occ_step_offset", lens.soft.occ_step_offset);
        get("scat_sharpness", lens.soft.scat_sharpness);
        get("scat_gain", lens.soft.scat_gain);
        get("scat_margin", lens.soft.scat_margin);
        get("leak_slope", lens.soft.leak_slope);
        if (!lens.soft.valid()) throw Error("PARSE_ERROR", "soft parameters out of range");
    }

    LayeredScene scene;
    const json &jlayers = require(root, "layers", "manifest");
    if (!jlayers.is_array() || jlayers.empty())
        throw Error("PARSE_ERROR", "layers must be a non-empty array");
    for (const json &je : jlayers) {
        reject_unknown(je, kLayerKeys, "layer");
        Layer layer;
        ImageBuffer color = load_png(base / require(je, "color", "layer").get<std::string>());
        if (color.channels() == 4) {
            // split RGBA into color + alpha
            ImageBuffer rgb(color.width(), color.height(), 3);
            ImageBuffer a(color.width(), color.height(), 1);
            for (int y = 0; y < color.height(); ++y)
                for (int x = 0; x < color.width(); ++x) {
                    for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = color.at(x, y, c);
                    a.at(x, y) = color.at(x, y, 3);
                }
            layer.color = std::move(rgb);
            layer.alpha = std::move(a);
        } else if (color.channels() == 3) {
            layer.color = std::move(color);
        } else {
            throw Error("DECODE_ERROR", "color image must be RGB or RGBA");
        }
        if (je.contains("alpha")) {
            ImageBuffer a = load_png(base / je["alpha"].get<std::string>());
            if (a.channels() != 1)
                throw Error("DECODE_ERROR", "alpha image must be grayscale");
            layer.alpha = std::move(a);
        }
        if (layer.alpha.empty())
            layer.alpha = ImageBuffer(layer.color.width(), layer.color.height(), 1, 1.f);
        layer.disparity = load_pfm(base / require(je, "disparity", "layer").get<std::string>());
        if (layer.disparity.channels() != 1)
            throw Error("DECODE_ERROR", "disparity PFM must be single channel");
        scene.layers.push_back(std::move(layer));
    }

    if (auto err = validate_scene(scene)) throw Error("SCENE_INVALID", to_string(*err));
    return {std::move(scene), std::move(lens)};
}

void save_scene(const fs::path &dir, const LayeredScene &scene, const LensConfig &lens) {
    fs::create_directories(dir);
    json root;
    json jl;
    jl["focus_disparity"] = lens.focus_disparity;
    jl["blur_scale"] = lens.blur_scale;
    jl["mode"] = lens.mode == RenderMode::Hard ? "hard" : "soft";
    jl["occlusion"] = lens.occlusion_enabled;
    if (lens.max_radius > 0) jl["max_radius"] = lens.max_radius;
    if (lens.kernel.kind == ApertureKind::Circle) {
        jl["kernel"] = "circle";
    } else {
        jl["kernel"] = "kernel.png";
        save_png(dir / "kernel.png", lens.kernel.mask);
    }
    json js;
    js["occ_focal_sharpness"] = lens.soft.occ_focal_sharpness;
    js["occ_step_sharpness"] = lens.soft.occ_step_sharpness;
    js["occ_step_offset"] = lens.soft.occ_step_offset;
    js["scat_sharpness"] = lens.soft.scat_sharpness;
    js["scat_gain"] = lens.soft.scat_gain;
    js["scat_margin"] = lens.soft.scat_margin;
    js["leak_slope"] = lens.soft.leak_slope;
    jl["soft"] = js;
    root["lens"] = jl;

    json jlayers = json::array();
    for (size_t i = 0; i < scene.layers.size(); ++i) {
        const std::string base = "layer" + std::to_string(i);
        save_png(dir / (base + "_color.png"), scene.layers[i].color);
        save_png(dir / (base + "_alpha.png"), scene.layers[i].alpha);
        save_pfm(dir / (base + "_disparity.pfm"), scene.layers[i].disparity);
        json je;
        je["color"] = base + "_color.png";
        je["alpha"] = base + "_alpha.png";
        je["disparity"] = base + "_disparity.pfm";
        jlayers.push_back(je);
    }
    root["layers"] = jlayers;

    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("IO_FAILURE", "cannot write manifest");
    out << root.dump(2) << "\n";
}

} // namespace bokeh::io
