// SPDX-License-Identifier: Apache-2.0

#include "bokeh/kernels.hpp"

namespace bokeh {
namespace kern {

static inline double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

KernelPartials kernel_partials(double d_x, double d_y, double dist, double a_y,
                               double K_val, double blur_scale, double max_radius,
                               const SoftParams &p) {
    KernelPartials out;

    // Occlusion forward pieces.
    const double gauss = occ_focal_gauss(d_x, p);
    const double E = occ_exp_source(d_y, p) * occ_exp_receiver(d_x, p) * occ_exp_offset(p);
    const double T = 1.0 / (E + 1.0); // (1 - tanh(u)) / 2
    out.O = 1.0 - gauss * T;

    // Scatter forward pieces.
    const double S = scatter_soft(dist, d_y, blur_scale, p);
    out.S = S;
    const double r_y = std::min(blur_scale * std::abs(d_y), max_radius);
    const double A = coc_area(r_y);
    out.w = S * K_val * a_y / A;

    const double c1 = p.occ_focal_sharpness;
    const double c2 = p.occ_step_sharpness;
    const double leak = p.leak_slope;

    // Leaked saturation factors. sech^2(u) = 4 T (1 - T).
    const double sech2 = std::max(4.0 * T * (1.0 - T), leak);
    const double gauss_l = std::max(gauss, leak);

    out.dO_dd_y = 0.5 * c2 * gauss_l * sech2;
    out.dO_dd_x = 2.0 * c1 * d_x * gauss_l * T - 0.5 * c2 * gauss_l * sech2;

    const double sig_prime = std::max(S * (1.0 - S), leak);
    out.dS_dd_y = sig_prime * p.scat_sharpness * blur_scale * sign0(d_y);

    // Area path only while the radius is above the floor and below the clamp.
    double dA_dd = 0.0;
    if (r_y > kAreaFloorRadius && r_y < max_radius)
        dA_dd = 2.0 * M_PI * r_y * blur_scale * sign0(d_y);

    out.dw_dd_y = K_val * a_y * (out.dS_dd_y * A - S * dA_dd) / (A * A);
    out.dw_da_y = S * K_val / A;
    return out;
}

} // namespace kern
} // namespace bokeh
