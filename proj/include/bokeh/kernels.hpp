// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "bokeh/scene.hpp"

namespace bokeh {

// Pointwise scatter / occlusion / visibility terms shared by the forward and
// backward renderers. All functions are pure.
//
// Convention: d_x is the relative disparity of the *receiving* pixel, d_y the
// relative disparity of the *scattering* source. The soft occlusion keeps the
// factored exponential form (one exp per operand) so that the windowed
// renderer and the brute-force oracle produce bit-identical sums.

namespace kern {

constexpr double kEpsFocal = 1e-3;   // |d_x| tolerance for "on the focal plane"
constexpr double kEpsOrder = 0.0;    // depth-order tolerance
constexpr double kAreaFloorRadius = 0.5; // pixels; keeps A(r) away from zero
constexpr double kOccClampDisp = 30.0;   // disparity clamp before exponentiation

// Eq-4 style hard occlusion: 0 iff x sits on the focal plane and y is behind it.
inline double occlusion_hard(double d_x, double d_y, double eps_focal = kEpsFocal,
                             double eps_order = kEpsOrder) {
    return (std::abs(d_x) < eps_focal && d_x - d_y > eps_order) ? 0.0 : 1.0;
}

// Per-operand exponentials of the softened depth-order step. Precomputable per
// pixel; occlusion_soft_from_parts multiplies them back together.
inline double occ_exp_source(double d_y, const SoftParams &p) {
    double d = std::clamp(d_y, -kOccClampDisp, kOccClampDisp);
    return std::exp(2.0 * p.occ_step_sharpness * d);
}
inline double occ_exp_receiver(double d_x, const SoftParams &p) {
    double d = std::clamp(d_x, -kOccClampDisp, kOccClampDisp);
    return std::exp(-2.0 * p.occ_step_sharpness * d);
}
inline double occ_exp_offset(const SoftParams &p) {
    return std::exp(2.0 * p.occ_step_sharpness * p.occ_step_offset);
}
inline double occ_focal_gauss(double d_x, const SoftParams &p) {
    return std::exp(-p.occ_focal_sharpness * d_x * d_x);
}

// O = 1 - exp(-c1 d_x^2) * 1/(1 + e^{2 c2 (d_y - d_x + c3)}).
// The 1/(1+E) factor equals (1 - tanh(c2 (d_y - d_x + c3)))/2 and converges to
// the hard step as c2 grows.
inline double occlusion_soft_from_parts(double gauss_x, double exp_x, double exp_y,
                                        double exp_off) {
    double E = exp_y * exp_x * exp_off;
    return 1.0 - gauss_x * (1.0 / (E + 1.0));
}

inline double occlusion_soft(double d_x, double d_y, const SoftParams &p) {
    return occlusion_soft_from_parts(occ_focal_gauss(d_x, p), occ_exp_receiver(d_x, p),
                                     occ_exp_source(d_y, p), occ_exp_offset(p));
}

// Hard scatter membership: strict Euclidean disk test, with the rule that a
// pixel always reaches itself even when its CoC collapses.
inline double scatter_hard(double dist, double r_y, double max_radius) {
    if (dist < std::min(r_y, max_radius)) return 1.0;
    if (r_y < 1.0 && dist == 0.0) return 1.0;
    return 0.0;
}

// Per-source exponential of the soft disk edge, precomputable per pixel.
inline double scat_exp_source(double abs_d_y, double blur_scale, const SoftParams &p) {
    return std::exp(-p.scat_sharpness * (blur_scale * abs_d_y + p.scat_margin));
}
// Distance factor; in the windowed renderer this is a table over integer
// squared distances.
inline double scat_exp_dist(double dist, const SoftParams &p) {
    return std::exp(p.scat_sharpness * dist);
}

// S = 1 / (1 + g * e^{-s (gamma |d_y| + m - dist)}), factored as above.
inline double scatter_soft_from_parts(double exp_src, double exp_dist, const SoftParams &p) {
    return 1.0 / (1.0 + p.scat_gain * exp_src * exp_dist);
}

inline double scatter_soft(double dist, double d_y, double blur_scale, const SoftParams &p) {
    return scatter_soft_from_parts(scat_exp_source(std::abs(d_y), blur_scale, p),
                                   scat_exp_dist(dist, p), p);
}

// CoC disk area with a radius floor; an in-focus pixel scatters only to
// itself with finite weight.
inline double coc_area(double r) {
    double rr = std::max(r, kAreaFloorRadius);
    return M_PI * rr * rr;
}

// w = S * K * a / A(r_y).
inline double energy_weight(double S, double K_val, double a_y, double r_y) {
    return S * K_val * a_y / coc_area(r_y);
}

// Inter-layer visibility: mean alpha over the CoC disk of radius
// max(r_x, 0.5), strict membership, clipped to image bounds.
// Iterates in row-major order for bitwise determinism.
inline double visibility(const ImageBuffer &alpha, int px, int py, double r_x,
                         int *area_out = nullptr) {
    double r = std::max(r_x, kAreaFloorRadius);
    double r2 = r * r;
    int ri = static_cast<int>(std::ceil(r));
    int y0 = std::max(py - ri, 0), y1 = std::min(py + ri, alpha.height() - 1);
    int x0 = std::max(px - ri, 0), x1 = std::min(px + ri, alpha.width() - 1);
    double sum = 0.0;
    int count = 0;
    for (int y = y0; y <= y1; ++y) {
        double dy = y - py;
        for (int x = x0; x <= x1; ++x) {
            double dx = x - px;
            if (dx * dx + dy * dy < r2) {
                sum += alpha.at(x, y);
                ++count;
            }
        }
    }
    if (area_out) *area_out = count;
    return count > 0 ? sum / count : 0.0;
}

// Partial derivatives of the soft kernels, with the adaptive gradient leak:
// saturated sigmoid/gaussian factors are floored at leak_slope so gradients
// survive far from the focal plane.
struct KernelPartials {
    double S = 0, O = 0, w = 0;
    double dS_dd_y = 0;
    double dO_dd_x = 0, dO_dd_y = 0;
    double dw_dd_y = 0; // chains through S and through A via r = gamma |d_y|
    double dw_da_y = 0;
};

KernelPartials kernel_partials(double d_x, double d_y, double dist, double a_y,
                               double K_val, double blur_scale, double max_radius,
                               const SoftParams &p);

} // namespace kern
} // namespace bokeh
