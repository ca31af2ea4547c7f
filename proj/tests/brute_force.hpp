// SPDX-License-Identifier: Apache-2.0
//
// Direct O((WH)^2) evaluation of the layered bokeh model, written as a plain
// double loop over all pixel pairs. Serves as the independent oracle for the
// windowed renderer: with R at least the image diagonal both must agree
// bitwise, because every sum visits the same pairs in row-major order with
// identical per-pair expressions.

#pragma once

#include <cmath>
#include <vector>

#include "bokeh/kernels.hpp"
#include "bokeh/render.hpp"
#include "bokeh/scene.hpp"

namespace brute {

using namespace bokeh;
using namespace bokeh::kern;

inline void layer_direct(const Layer &layer, const LensConfig &lens, int R,
                         ImageBuffer &numerator, ImageBuffer &denominator) {
    const int W = layer.color.width(), H = layer.color.height();
    numerator = ImageBuffer(W, H, 3);
    denominator = ImageBuffer(W, H, 1);
    const bool soft = lens.mode == RenderMode::Soft;
    const bool circle = lens.kernel.kind == ApertureKind::Circle;

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double d_x = relative_disparity(layer.disparity.at(x, y), lens);
            double sum_w = 0.0, sum_c[3] = {0, 0, 0};
            for (int qy = 0; qy < H; ++qy)
                for (int qx = 0; qx < W; ++qx) {
                    const double a_y = layer.alpha.at(qx, qy);
                    if (a_y == 0.0) continue;
                    const int k = (qx - x) * (qx - x) + (qy - y) * (qy - y);
                    const double dist = std::sqrt(static_cast<double>(k));
                    const double d_y = relative_disparity(layer.disparity.at(qx, qy), lens);
                    const double r_y = coc_radius(d_y, lens.blur_scale, R);
                    double S;
                    if (soft) {
                        S = scatter_soft_from_parts(
                            scat_exp_source(std::abs(d_y), lens.blur_scale, lens.soft),
                            scat_exp_dist(dist, lens.soft), lens.soft);
                    } else {
                        S = scatter_hard(dist, r_y, R);
                        if (S == 0.0) continue;
                    }
                    double K_val = 1.0;
                    if (!circle) {
                        double inv = 1.0 / std::max(r_y, kAreaFloorRadius);
                        K_val = lens.kernel.sample(static_cast<float>((qx - x) * inv),
                                                   static_cast<float>((qy - y) * inv));
                    }
                    const double w = S * K_val * a_y / coc_area(r_y);
                    double O = 1.0;
                    if (lens.occlusion_enabled) {
                        O = soft ? occlusion_soft_from_parts(
                                       occ_focal_gauss(d_x, lens.soft),
                                       occ_exp_receiver(d_x, lens.soft),
                                       occ_exp_source(d_y, lens.soft),
                                       occ_exp_offset(lens.soft))
                                 : occlusion_hard(d_x, d_y);
                    }
                    const double wo = w * O;
                    sum_w += wo;
                    for (int c = 0; c < 3; ++c) sum_c[c] += layer.color.at(qx, qy, c) * wo;
                }
            denominator.at(x, y) = static_cast<float>(sum_w);
            for (int c = 0; c < 3; ++c) numerator.at(x, y, c) = static_cast<float>(sum_c[c]);
        }
}

inline ImageBuffer render_direct(const LayeredScene &scene, const LensConfig &lens, int R) {
    const int W = scene.width(), H = scene.height();
    const int n = scene.layer_count();
    std::vector<ImageBuffer> num(n), den(n);
    for (int l = 0; l < n; ++l) layer_direct(scene.layers[l], lens, R, num[l], den[l]);

    ImageBuffer bokeh(W, H, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double prefix = 1.0, b[3] = {0, 0, 0};
            for (int l = 0; l < n; ++l) {
                const Layer &layer = scene.layers[l];
                double d = relative_disparity(layer.disparity.at(x, y), lens);
                double r = coc_radius(d, lens.blur_scale, R);
                // the renderer caches V as float before blending
                double V = static_cast<float>(visibility(layer.alpha, x, y, r));
                double c_l = V * prefix;
                prefix *= 1.0 - V;
                double Wc = std::max(static_cast<double>(den[l].at(x, y)), kEpsDenominator);
                for (int c = 0; c < 3; ++c)
                    b[c] += c_l * (num[l].at(x, y, c) / Wc);
            }
            for (int c = 0; c < 3; ++c) bokeh.at(x, y, c) = static_cast<float>(b[c]);
        }
    return bokeh;
}

} // namespace brute
