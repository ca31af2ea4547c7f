// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "bokeh/errors.hpp"
#include "bokeh/kernels.hpp"
#include "bokeh/scene.hpp"

namespace bokeh {

constexpr double kEpsDenominator = 1e-8; // division guard for N / W

// Forward render result plus the per-layer caches the backward pass reuses.
struct RenderOutput {
    ImageBuffer bokeh;                    // 3 channels
    std::vector<ImageBuffer> numerator;   // per layer, 3 channels
    std::vector<ImageBuffer> denominator; // per layer, 1 channel (W)
    std::vector<ImageBuffer> visibility;  // per layer, 1 channel (V)
    std::vector<ImageBuffer> vis_count;   // per layer, 1 channel (|Omega'|)
    std::vector<ImageBuffer> composite;   // per layer, 1 channel (blend weight c_l)
    int radius = 0;                       // resolved neighborhood half-width R
};

// Per-layer loss gradients w.r.t. color, disparity and alpha.
struct GradientSet {
    std::vector<ImageBuffer> d_color;     // 3 channels
    std::vector<ImageBuffer> d_disparity; // 1 channel
    std::vector<ImageBuffer> d_alpha;     // 1 channel
};

// In-layer scatter with occlusion over a square window of half-width R
// (circularity comes from S and K). Writes the per-pixel numerator and
// normalization sum W.
void render_layer(const Layer &layer, const LensConfig &lens, int radius,
                  ImageBuffer &numerator, ImageBuffer &denominator, int threads = 1);

// Full layered forward render: per-layer scatter, then front-to-back blending
// with inter-layer visibility weights. validate_inputs=false skips the scene
// invariant check; finite-difference probes need it because a perturbation
// step on alpha leaves the valid range.
RenderOutput render(const LayeredScene &scene, const LensConfig &lens, int threads = 1,
                    bool validate_inputs = true);

// Naive baseline: alpha-flatten the scene to one RGBD layer and render it with
// the in-layer occlusion forced to one.
RenderOutput render_naive(const LayeredScene &scene, const LensConfig &lens, int threads = 1);

// Analytic backward pass (SOFT mode only). `upstream` is dL/dB, 3 channels.
// Formulated as a gather over each parameter pixel's radius-R window, so rows
// parallelize without write conflicts.
GradientSet backward(const LayeredScene &scene, const LensConfig &lens,
                     const RenderOutput &output, const ImageBuffer &upstream,
                     int threads = 1);

} // namespace bokeh
