// SPDX-License-Identifier: Apache-2.0

#include "bokeh/scene.hpp"

namespace bokeh {

std::string to_string(SceneError e) {
    switch (e) {
    case SceneError::DimensionMismatch: return "DIMENSION_MISMATCH";
    case SceneError::AlphaOutOfRange: return "ALPHA_OUT_OF_RANGE";
    case SceneError::BackLayerNotOpaque: return "BACK_LAYER_NOT_OPAQUE";
    case SceneError::NonfiniteValue: return "NONFINITE_VALUE";
    case SceneError::EmptyScene: return "EMPTY_SCENE";
    }
    return "UNKNOWN";
}

std::optional<SceneError> validate_scene(const LayeredScene &scene) {
    if (scene.layers.empty()) return SceneError::EmptyScene;
    const int w = scene.width(), h = scene.height();
    for (const Layer &l : scene.layers) {
        if (l.color.channels() != 3 || l.alpha.channels() != 1 || l.disparity.channels() != 1)
            return SceneError::DimensionMismatch;
        if (l.color.width() != w || l.color.height() != h || !l.alpha.same_extent(l.color) ||
            !l.disparity.same_extent(l.color))
            return SceneError::DimensionMismatch;
        if (!l.color.all_finite() || !l.alpha.all_finite() || !l.disparity.all_finite())
            return SceneError::NonfiniteValue;
        for (size_t i = 0; i < l.alpha.size(); ++i) {
            float a = l.alpha.data()[i];
            if (a < 0.f || a > 1.f) return SceneError::AlphaOutOfRange;
        }
        for (size_t i = 0; i < l.color.size(); ++i) {
            float c = l.color.data()[i];
            if (c < 0.f || c > 1.f) return SceneError::AlphaOutOfRange;
        }
    }
    const Layer &back = scene.layers.back();
    for (size_t i = 0; i < back.alpha.size(); ++i)
        if (back.alpha.data()[i] < 1.f - 1e-6f) return SceneError::BackLayerNotOpaque;
    return std::nullopt;
}

int resolve_max_radius(const LayeredScene &scene, const LensConfig &lens) {
    if (lens.max_radius > 0) return std::max(lens.max_radius, 1);
    double dmax = 0.0;
    for (const Layer &l : scene.layers)
        for (size_t i = 0; i < l.disparity.size(); ++i)
            dmax = std::max(dmax, std::abs(relative_disparity(l.disparity.data()[i], lens)));
    int r = static_cast<int>(std::ceil(lens.blur_scale * dmax)) + 1;
    return std::clamp(r, 1, lens.max_radius_cap);
}

Layer flatten_scene(const LayeredScene &scene) {
    const int w = scene.width(), h = scene.height();
    Layer out{ImageBuffer(w, h, 3), ImageBuffer(w, h, 1, 1.f), ImageBuffer(w, h, 1)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            float trans = 1.f; // transmittance so far
            float rgb[3] = {0, 0, 0};
            float disp = 0.f;
            for (const Layer &l : scene.layers) {
                float wl = trans * l.alpha.at(x, y);
                for (int c = 0; c < 3; ++c) rgb[c] += wl * l.color.at(x, y, c);
                disp += wl * l.disparity.at(x, y);
                trans *= 1.f - l.alpha.at(x, y);
            }
            for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = rgb[c];
            out.disparity.at(x, y) = disp;
        }
    }
    return out;
}

} // namespace bokeh
