// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>

#include "bokeh/errors.hpp"
#include "bokeh/scene.hpp"

namespace bokeh::io {

// sRGB handled as a plain 2.2 exponent, applied only to PNG color channels.
float srgb_to_linear(float v);
float linear_to_srgb(float v);

// 8-bit PNG. Color (3 or 4 channels) is decoded sRGB -> linear; grayscale is
// read as-is. Writers are deterministic.
ImageBuffer load_png(const std::filesystem::path &path);
void save_png(const std::filesystem::path &path, const ImageBuffer &img);

// PFM, 32-bit float: "PF"/"Pf" header, dims, scale (sign = endianness,
// magnitude = value scale), rows bottom to top.
ImageBuffer load_pfm(const std::filesystem::path &path);
void save_pfm(const std::filesystem::path &path, const ImageBuffer &img);

// Scene manifest: JSON listing lens parameters and per-layer asset paths,
// front to back. Unknown keys are rejected. Paths resolve relative to the
// manifest location.
std::pair<LayeredScene, LensConfig> load_scene(const std::filesystem::path &manifest);
void save_scene(const std::filesystem::path &dir, const LayeredScene &scene,
                const LensConfig &lens);

} // namespace bokeh::io
