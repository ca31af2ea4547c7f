// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <vector>

#include "bokeh/errors.hpp"
#include "bokeh/render.hpp"
#include "bokeh/scene.hpp"

namespace bokeh::dfd {

// Depth-from-defocus problem: recover a dense disparity map for a single
// opaque layer whose color is the all-in-focus image, by matching the
// rendered bokeh to the target through the differentiable renderer.
struct DfdProblem {
    ImageBuffer image;          // 3 channels, all-in-focus
    ImageBuffer target;         // 3 channels, observed bokeh
    ImageBuffer init_disparity; // 1 channel
    LensConfig lens;            // must be SOFT mode

    double lambda_l1 = 1.0;
    double lambda_grad = 0.1;
    double lambda_hssim = 1.0;
    std::vector<int> windows = {11, 21, 31}; // hierarchical SSIM patch sizes
    int pyramid_levels = 4;                  // smoothness pyramid depth

    double step_size = 0.01; // Adam step
    int max_iterations = 2000;
    double tolerance = 0.0; // relative best-loss improvement over 50 iters; 0 disables
    int threads = 1;
};

struct DfdTraceRow {
    int iteration = 0;
    double total = 0, l1 = 0, grad = 0, hssim = 0;
};

struct DfdResult {
    ImageBuffer disparity; // best-loss iterate
    ImageBuffer render;    // bokeh of the returned disparity
    std::vector<DfdTraceRow> trace;
    double best_loss = 0;
};

// Mean over the window set of Gaussian-weighted SSIM (valid region only).
// When d_pred is non-null it receives d(hssim)/d(pred), same shape as pred.
double hssim(const ImageBuffer &target, const ImageBuffer &pred,
             const std::vector<int> &windows, ImageBuffer *d_pred = nullptr);

// Edge-aware smoothness over a box-downsampled pyramid, averaged per level:
// mean(|dx D| e^{-|dx I|} + |dy D| e^{-|dy I|}). The image attenuation uses
// the channel-mean absolute gradient.
double grad_reg(const ImageBuffer &disparity, const ImageBuffer &image, int levels,
                ImageBuffer *d_disparity = nullptr);

struct LossValue {
    double total = 0, l1 = 0, grad = 0, hssim = 0;
};

// Composite objective: lambda_l1 * L1 + lambda_grad * G + lambda_hssim *
// (1 - hssim). Optional outputs receive the analytic gradients w.r.t. the
// predicted bokeh and (through G only) the disparity.
LossValue loss(const ImageBuffer &pred, const ImageBuffer &target,
               const ImageBuffer &disparity, const ImageBuffer &image, const DfdProblem &prob,
               ImageBuffer *d_pred = nullptr, ImageBuffer *d_disparity = nullptr);

// Adam over the disparity map; returns the best-loss iterate. Throws
// DIVERGED if the loss leaves the finite range and MODE_MISMATCH for a
// HARD-mode lens.
DfdResult optimize(const DfdProblem &problem);

// CSV with header iteration,total,l1,grad,hssim.
void save_trace_csv(const std::filesystem::path &path, const std::vector<DfdTraceRow> &trace);

} // namespace bokeh::dfd
