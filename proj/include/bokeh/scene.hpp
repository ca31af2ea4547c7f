// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bokeh/image.hpp"

namespace bokeh {

// One depth layer: straight (non-premultiplied) color, coverage alpha and a
// dense disparity map (1/z). All three buffers share the same extent.
struct Layer {
    ImageBuffer color;     // 3 channels
    ImageBuffer alpha;     // 1 channel
    ImageBuffer disparity; // 1 channel, 1/z units
};

// Ordered front to back; layers[0] is the frontmost. The backmost layer must
// be fully opaque so the composite weights telescope to one.
struct LayeredScene {
    std::vector<Layer> layers;

    int layer_count() const { return static_cast<int>(layers.size()); }
    int width() const { return layers.empty() ? 0 : layers[0].color.width(); }
    int height() const { return layers.empty() ? 0 : layers[0].color.height(); }
};

enum class ApertureKind { Circle, Mask };

// Lens shape term. The mask is a square bitmap centered on its midpoint,
// sampled over the scatter disk of each source pixel.
struct ApertureKernel {
    ApertureKind kind = ApertureKind::Circle;
    ImageBuffer mask; // 1 channel, values in [0,1]; empty for Circle

    // Bilinear sample at normalized offset (u,v) in [-1,1]^2, zero outside.
    float sample(float u, float v) const {
        if (kind == ApertureKind::Circle) return 1.f;
        const int w = mask.width(), h = mask.height();
        float fx = (u * 0.5f + 0.5f) * w - 0.5f;
        float fy = (v * 0.5f + 0.5f) * h - 0.5f;
        int x0 = static_cast<int>(std::floor(fx));
        int y0 = static_cast<int>(std::floor(fy));
        float tx = fx - x0, ty = fy - y0;
        auto tap = [&](int x, int y) -> float {
            if (x < 0 || y < 0 || x >= w || y >= h) return 0.f;
            return mask.at(x, y);
        };
        return (1 - tx) * (1 - ty) * tap(x0, y0) + tx * (1 - ty) * tap(x0 + 1, y0) +
               (1 - tx) * ty * tap(x0, y0 + 1) + tx * ty * tap(x0 + 1, y0 + 1);
    }
};

// Softening coefficients for the differentiable kernels, plus the gradient
// leak floor applied in the backward pass.
struct SoftParams {
    double occ_focal_sharpness = 3.0;  // gaussian falloff around the focal plane
    double occ_step_sharpness = 10.0;  // tanh slope of the depth-order step
    double occ_step_offset = 0.1;      // shift so O ~ 1 at d_y = d_x
    double scat_sharpness = 3.0;       // sigmoid slope of the disk edge
    double scat_gain = 10.0;
    double scat_margin = 1.0; // pixels
    double leak_slope = 0.01; // 0 disables leaking

    bool valid() const {
        return occ_focal_sharpness > 0 && occ_step_sharpness > 0 && occ_step_offset > 0 &&
               scat_sharpness > 0 && scat_gain > 0 && scat_margin > 0 && leak_slope >= 0;
    }
};

enum class RenderMode { Hard, Soft };

struct LensConfig {
    double focus_disparity = 0.0; // 1/z_f
    double blur_scale = 10.0;     // pixels per unit relative disparity
    int max_radius = 0;           // neighborhood clamp R; <= 0 means auto per scene
    int max_radius_cap = 64;      // hard cap when auto-computed
    ApertureKernel kernel;
    SoftParams soft;
    RenderMode mode = RenderMode::Hard;

    // Ablation switch: forces the in-layer occlusion term to 1. Used by the
    // naive baseline and the occlusion ablation studies.
    bool occlusion_enabled = true;
};

enum class SceneError {
    DimensionMismatch,
    AlphaOutOfRange,
    BackLayerNotOpaque,
    NonfiniteValue,
    EmptyScene,
};

std::string to_string(SceneError e);

// Checks every scene invariant; returns the first violation found.
std::optional<SceneError> validate_scene(const LayeredScene &scene);

inline double relative_disparity(double d, const LensConfig &lens) {
    return d - lens.focus_disparity;
}

// CoC radius in pixels, clamped to the neighborhood radius.
inline double coc_radius(double d_rel, double blur_scale, int max_radius) {
    return std::min(blur_scale * std::abs(d_rel), static_cast<double>(max_radius));
}

// Resolved neighborhood radius: explicit if set, otherwise
// ceil(blur_scale * max|d_rel|) + 1 clamped to the cap.
int resolve_max_radius(const LayeredScene &scene, const LensConfig &lens);

// Alpha-over composite of the scene into a single opaque RGBD layer.
// Disparity is blended with the same over weights. This is the input of the
// naive no-occlusion baseline.
Layer flatten_scene(const LayeredScene &scene);

} // namespace bokeh
