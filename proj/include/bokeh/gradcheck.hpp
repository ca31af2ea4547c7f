// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "bokeh/render.hpp"
#include "bokeh/scene.hpp"

namespace bokeh {

struct GradCheckFamily {
    double max_rel = 0;
    double median_rel = 0;
    double frac_ok = 1;      // share of non-degenerate entries within tol
    size_t checked = 0;      // non-degenerate entries
    size_t degenerate = 0;   // both analytic and FD below the noise floor
};

struct GradCheckReport {
    GradCheckFamily color, disparity, alpha;
    bool pass = false;
};

// Central finite differences of a random directional loss against the
// analytic backward pass. SOFT mode only. Perturbed scenes bypass validation
// (an FD step on alpha necessarily leaves the valid range), so callers should
// validate the unperturbed scene themselves.
GradCheckReport gradcheck(const LayeredScene &scene, const LensConfig &lens, double eps,
                          double tol, double min_frac, uint64_t seed, int threads = 1);

// Random single-layer scene for gradient checking: free alpha, uniform
// disparity and color draws.
LayeredScene random_gradcheck_scene(int width, int height, uint64_t seed);

// Companion lens: SOFT mode, leak disabled, moderate blur.
LensConfig gradcheck_lens();

} // namespace bokeh
