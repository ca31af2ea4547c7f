// SPDX-License-Identifier: Apache-2.0

#include "bokeh/render.hpp"

#include <cmath>

#include "bokeh/parallel.hpp"

namespace bokeh {

using namespace kern;

namespace {

// Per-layer quantities the pair loops reuse. All doubles so the windowed path
// and the brute-force oracle agree bitwise.
struct LayerPre {
    std::vector<double> d_rel;    // relative disparity
    std::vector<double> radius;   // clamped CoC radius
    std::vector<double> area;     // coc_area(radius)
    std::vector<double> scat_src; // scat_exp_source
    std::vector<double> occ_src;  // occ_exp_source
    std::vector<double> occ_rcv;  // occ_exp_receiver
    std::vector<double> gauss;    // occ_focal_gauss
    double occ_off = 1.0;
};

LayerPre precompute_layer(const Layer &layer, const LensConfig &lens, int R) {
    const int n = layer.disparity.width() * layer.disparity.height();
    LayerPre pre;
    pre.d_rel.resize(n);
    pre.radius.resize(n);
    pre.area.resize(n);
    const bool soft = lens.mode == RenderMode::Soft;
    if (soft) {
        pre.scat_src.resize(n);
        pre.occ_src.resize(n);
        pre.occ_rcv.resize(n);
        pre.gauss.resize(n);
        pre.occ_off = occ_exp_offset(lens.soft);
    }
    for (int i = 0; i < n; ++i) {
        double d = relative_disparity(layer.disparity.data()[i], lens);
        pre.d_rel[i] = d;
        pre.radius[i] = coc_radius(d, lens.blur_scale, R);
        pre.area[i] = coc_area(pre.radius[i]);
        if (soft) {
            pre.scat_src[i] = scat_exp_source(std::abs(d), lens.blur_scale, lens.soft);
            pre.occ_src[i] = occ_exp_source(d, lens.soft);
            pre.occ_rcv[i] = occ_exp_receiver(d, lens.soft);
            pre.gauss[i] = occ_focal_gauss(d, lens.soft);
        }
    }
    return pre;
}

// Tables over integer squared pixel distances within the window.
struct DistTables {
    std::vector<double> dist;     // sqrt(k)
    std::vector<double> scat_exp; // scat_exp_dist(sqrt(k))
};

DistTables make_dist_tables(int R, const SoftParams &p, bool soft) {
    DistTables t;
    const int n = 2 * R * R + 1;
    t.dist.resize(n);
    if (soft) t.scat_exp.resize(n);
    for (int k = 0; k < n; ++k) {
        t.dist[k] = std::sqrt(static_cast<double>(k));
        if (soft) t.scat_exp[k] = scat_exp_dist(t.dist[k], p);
    }
    return t;
}

inline double kernel_sample(const ApertureKernel &kernel, int dx, int dy, double r_src) {
    if (kernel.kind == ApertureKind::Circle) return 1.0;
    double inv = 1.0 / std::max(r_src, kAreaFloorRadius);
    return kernel.sample(static_cast<float>(dx * inv), static_cast<float>(dy * inv));
}

} // namespace

void render_layer(const Layer &layer, const LensConfig &lens, int R,
                  ImageBuffer &numerator, ImageBuffer &denominator, int threads) {
    const int W = layer.color.width(), H = layer.color.height();
    numerator = ImageBuffer(W, H, 3);
    denominator = ImageBuffer(W, H, 1);

    const LayerPre pre = precompute_layer(layer, lens, R);
    const bool soft = lens.mode == RenderMode::Soft;
    const DistTables tab = make_dist_tables(R, lens.soft, soft);
    const bool circle = lens.kernel.kind == ApertureKind::Circle;
    const SoftParams &sp = lens.soft;

    parallel_for(0, H, threads, [&](int y) {
        for (int x = 0; x < W; ++x) {
            const int ix = y * W + x;
            const double d_x = pre.d_rel[ix];
            const double gauss_x = soft ? pre.gauss[ix] : 0.0;
            const double occ_rcv_x = soft ? pre.occ_rcv[ix] : 0.0;
            double sum_w = 0.0;
            double sum_c[3] = {0.0, 0.0, 0.0};

            const int qy0 = std::max(y - R, 0), qy1 = std::min(y + R, H - 1);
            const int qx0 = std::max(x - R, 0), qx1 = std::min(x + R, W - 1);
            for (int qy = qy0; qy <= qy1; ++qy) {
                const int dy = qy - y;
                for (int qx = qx0; qx <= qx1; ++qx) {
                    const int dx = qx - x;
                    const int iq = qy * W + qx;
                    const double a_y = layer.alpha.data()[iq];
                    if (a_y == 0.0) continue;
                    const int k = dx * dx + dy * dy;

                    double S;
                    if (soft) {
                        S = scatter_soft_from_parts(pre.scat_src[iq], tab.scat_exp[k], sp);
                    } else {
                        S = scatter_hard(tab.dist[k], pre.radius[iq], R);
                        if (S == 0.0) continue;
                    }
                    const double K_val =
                        circle ? 1.0 : kernel_sample(lens.kernel, dx, dy, pre.radius[iq]);
                    const double w = S * K_val * a_y / pre.area[iq];
                    double O = 1.0;
                    if (lens.occlusion_enabled) {
                        O = soft ? occlusion_soft_from_parts(gauss_x, occ_rcv_x,
                                                             pre.occ_src[iq], pre.occ_off)
                                 : occlusion_hard(d_x, pre.d_rel[iq]);
                    }
                    const double wo = w * O;
                    sum_w += wo;
                    sum_c[0] += layer.color.data()[iq * 3 + 0] * wo;
                    sum_c[1] += layer.color.data()[iq * 3 + 1] * wo;
                    sum_c[2] += layer.color.data()[iq * 3 + 2] * wo;
                }
            }
            denominator.at(x, y) = static_cast<float>(sum_w);
            for (int c = 0; c < 3; ++c)
                numerator.at(x, y, c) = static_cast<float>(sum_c[c]);
        }
    });
}

RenderOutput render(const LayeredScene &scene, const LensConfig &lens, int threads,
                    bool validate_inputs) {
    if (validate_inputs)
        if (auto err = validate_scene(scene))
            throw Error("SCENE_INVALID", to_string(*err));

    const int W = scene.width(), H = scene.height();
    const int n = scene.layer_count();
    const int R = resolve_max_radius(scene, lens);

    RenderOutput out;
    out.radius = R;
    out.bokeh = ImageBuffer(W, H, 3);
    out.numerator.resize(n);
    out.denominator.resize(n);
    out.visibility.assign(n, ImageBuffer(W, H, 1));
    out.vis_count.assign(n, ImageBuffer(W, H, 1));
    out.composite.assign(n, ImageBuffer(W, H, 1));

    for (int l = 0; l < n; ++l)
        render_layer(scene.layers[l], lens, R, out.numerator[l], out.denominator[l], threads);

    // Visibility uses each layer's own CoC radius at the query pixel.
    for (int l = 0; l < n; ++l) {
        const Layer &layer = scene.layers[l];
        parallel_for(0, H, threads, [&](int y) {
            for (int x = 0; x < W; ++x) {
                double d = relative_disparity(layer.disparity.at(x, y), lens);
                double r = coc_radius(d, lens.blur_scale, R);
                int count = 0;
                double v = visibility(layer.alpha, x, y, r, &count);
                out.visibility[l].at(x, y) = static_cast<float>(v);
                out.vis_count[l].at(x, y) = static_cast<float>(count);
            }
        });
    }

    // Front-to-back blend; weights telescope to one given the opaque backmost
    // layer.
    parallel_for(0, H, threads, [&](int y) {
        for (int x = 0; x < W; ++x) {
            double prefix = 1.0;
            double b[3] = {0.0, 0.0, 0.0};
            for (int l = 0; l < n; ++l) {
                const double V = out.visibility[l].at(x, y);
                const double c_l = V * prefix;
                prefix *= 1.0 - V;
                out.composite[l].at(x, y) = static_cast<float>(c_l);
                const double Wc =
                    std::max(static_cast<double>(out.denominator[l].at(x, y)), kEpsDenominator);
                for (int c = 0; c < 3; ++c)
                    b[c] += c_l * (out.numerator[l].at(x, y, c) / Wc);
            }
            for (int c = 0; c < 3; ++c)
                out.bokeh.at(x, y, c) = static_cast<float>(b[c]);
        }
    });
    return out;
}

RenderOutput render_naive(const LayeredScene &scene, const LensConfig &lens, int threads) {
    LayeredScene flat;
    flat.layers.push_back(flatten_scene(scene));
    LensConfig naive = lens;
    naive.occlusion_enabled = false;
    return render(flat, naive, threads);
}

GradientSet backward(const LayeredScene &scene, const LensConfig &lens,
                     const RenderOutput &out, const ImageBuffer &upstream, int threads) {
    if (lens.mode != RenderMode::Soft)
        throw Error("MODE_MISMATCH", "backward requires SOFT mode");
    if (upstream.width() != scene.width() || upstream.height() != scene.height() ||
        upstream.channels() != 3)
        throw Error("SHAPE_MISMATCH", "upstream gradient must match the bokeh image");

    const int W = scene.width(), H = scene.height();
    const int n = scene.layer_count();
    const int R = out.radius;
    const int npix = W * H;
    const SoftParams &sp = lens.soft;
    const double c1 = sp.occ_focal_sharpness;
    const double c2 = sp.occ_step_sharpness;
    const double leak = sp.leak_slope;
    const double s_scat = sp.scat_sharpness;
    const double gamma = lens.blur_scale;
    const bool circle = lens.kernel.kind == ApertureKind::Circle;
    const bool occ = lens.occlusion_enabled;

    GradientSet grads;
    grads.d_color.assign(n, ImageBuffer(W, H, 3));
    grads.d_disparity.assign(n, ImageBuffer(W, H, 1));
    grads.d_alpha.assign(n, ImageBuffer(W, H, 1));

    std::vector<LayerPre> pre(n);
    for (int l = 0; l < n; ++l) pre[l] = precompute_layer(scene.layers[l], lens, R);
    const DistTables tab = make_dist_tables(R, sp, true);

    // Per-pixel, per-layer normalized layer colors F = N / max(W, eps), the
    // denominator indicator, and u = upstream * c_l.
    std::vector<std::vector<double>> F(n), u(n), Wc(n);
    std::vector<std::vector<char>> ind(n);
    for (int l = 0; l < n; ++l) {
        F[l].resize(npix * 3);
        u[l].resize(npix * 3);
        Wc[l].resize(npix);
        ind[l].resize(npix);
        for (int i = 0; i < npix; ++i) {
            double den = out.denominator[l].data()[i];
            double wc = std::max(den, kEpsDenominator);
            Wc[l][i] = wc;
            ind[l][i] = den > kEpsDenominator ? 1 : 0;
            double cl = out.composite[l].data()[i];
            for (int c = 0; c < 3; ++c) {
                F[l][i * 3 + c] = out.numerator[l].data()[i * 3 + c] / wc;
                u[l][i * 3 + c] = static_cast<double>(upstream.data()[i * 3 + c]) * cl;
            }
        }
    }

    // Visibility-path weight per pixel and layer:
    // vterm_l(o) = sum_m sum_ch g_ch(o) * dc_m/dV_l(o) * F_m_ch(o).
    std::vector<std::vector<double>> vterm(n, std::vector<double>(npix, 0.0));
    parallel_for(0, H, threads, [&](int y) {
        std::vector<double> V(n);
        for (int x = 0; x < W; ++x) {
            const int i = y * W + x;
            for (int m = 0; m < n; ++m) V[m] = out.visibility[m].data()[i];
            for (int l = 0; l < n; ++l) {
                double acc = 0.0;
                for (int m = l; m < n; ++m) {
                    // dc_m/dV_l: prefix product over k < m skipping factor l.
                    double dc = (m == l) ? 1.0 : V[m];
                    for (int k = 0; k < m; ++k)
                        if (k != l) dc *= 1.0 - V[k];
                    if (m != l) dc = -dc;
                    double dot = 0.0;
                    for (int c = 0; c < 3; ++c)
                        dot += static_cast<double>(upstream.data()[i * 3 + c]) *
                               F[m][i * 3 + c];
                    acc += dc * dot;
                }
                vterm[l][i] = acc;
            }
        }
    });

    for (int l = 0; l < n; ++l) {
        const Layer &layer = scene.layers[l];
        const LayerPre &lp = pre[l];
        parallel_for(0, H, threads, [&](int y) {
            for (int x = 0; x < W; ++x) {
                const int ip = y * W + x;
                const double d_p = lp.d_rel[ip];
                const double a_p = layer.alpha.data()[ip];
                const double r_p = lp.radius[ip];
                const double A_p = lp.area[ip];
                const double sign_p = d_p > 0 ? 1.0 : (d_p < 0 ? -1.0 : 0.0);
                const double dA_p = (r_p > kAreaFloorRadius && r_p < R)
                                        ? 2.0 * M_PI * r_p * gamma * sign_p
                                        : 0.0;
                const double gauss_p_l = std::max(lp.gauss[ip], leak);

                double gI[3] = {0, 0, 0};
                double gd = 0.0, ga = 0.0;

                const int qy0 = std::max(y - R, 0), qy1 = std::min(y + R, H - 1);
                const int qx0 = std::max(x - R, 0), qx1 = std::min(x + R, W - 1);
                for (int qy = qy0; qy <= qy1; ++qy) {
                    const int dy = qy - y;
                    for (int qx = qx0; qx <= qx1; ++qx) {
                        const int dx = qx - x;
                        const int iq = qy * W + qx;
                        const int k = dx * dx + dy * dy;

                        // ---- source path: p scatters to output pixel q ----
                        {
                            const double S =
                                scatter_soft_from_parts(lp.scat_src[ip], tab.scat_exp[k], sp);
                            double O = 1.0, dO_dd_p = 0.0;
                            if (occ) {
                                const double E =
                                    lp.occ_src[ip] * lp.occ_rcv[iq] * lp.occ_off;
                                const double T = 1.0 / (E + 1.0);
                                const double gauss_q_l = std::max(lp.gauss[iq], leak);
                                const double sech2 = std::max(4.0 * T * (1.0 - T), leak);
                                O = 1.0 - lp.gauss[iq] * T;
                                dO_dd_p = 0.5 * c2 * gauss_q_l * sech2;
                            }
                            const double K_val =
                                circle ? 1.0 : kernel_sample(lens.kernel, dx, dy, r_p);
                            const double w = S * K_val * a_p / A_p;
                            const double sig_prime = std::max(S * (1.0 - S), leak);
                            const double dS = sig_prime * s_scat * gamma * sign_p;
                            const double dw_dd = K_val * a_p * (dS * A_p - S * dA_p) / (A_p * A_p);
                            const double dw_da = S * K_val / A_p;
                            const double X_d = dw_dd * O + w * dO_dd_p;
                            const double X_a = dw_da * O;
                            const double invWc = 1.0 / Wc[l][iq];
                            const char id = ind[l][iq];
                            for (int c = 0; c < 3; ++c) {
                                const double uq = u[l][iq * 3 + c];
                                gI[c] += uq * w * O * invWc;
                                const double diff =
                                    layer.color.data()[ip * 3 + c] -
                                    (id ? F[l][iq * 3 + c] : 0.0);
                                gd += uq * diff * X_d * invWc;
                                ga += uq * diff * X_a * invWc;
                            }
                        }

                        // ---- receiver path: q scatters to output pixel p;
                        //      d(p) enters through the occlusion term ----
                        if (occ) {
                            const double a_q = layer.alpha.data()[iq];
                            if (a_q != 0.0) {
                                const double S2 = scatter_soft_from_parts(
                                    lp.scat_src[iq], tab.scat_exp[k], sp);
                                const double E2 =
                                    lp.occ_src[iq] * lp.occ_rcv[ip] * lp.occ_off;
                                const double T2 = 1.0 / (E2 + 1.0);
                                const double sech2_2 = std::max(4.0 * T2 * (1.0 - T2), leak);
                                const double dO_dd_x = 2.0 * c1 * d_p * gauss_p_l * T2 -
                                                       0.5 * c2 * gauss_p_l * sech2_2;
                                const double K_val2 =
                                    circle ? 1.0
                                           : kernel_sample(lens.kernel, -dx, -dy,
                                                           lp.radius[iq]);
                                const double w2 = S2 * K_val2 * a_q / lp.area[iq];
                                const double Xr = w2 * dO_dd_x;
                                const double invWcp = 1.0 / Wc[l][ip];
                                const char idp = ind[l][ip];
                                for (int c = 0; c < 3; ++c) {
                                    const double diff =
                                        layer.color.data()[iq * 3 + c] -
                                        (idp ? F[l][ip * 3 + c] : 0.0);
                                    gd += u[l][ip * 3 + c] * diff * Xr * invWcp;
                                }
                            }
                        }

                        // ---- visibility path: p's alpha enters V_l(q) when p
                        //      lies in q's CoC disk (disk membership itself is
                        //      straight-through) ----
                        {
                            const double rv = std::max(lp.radius[iq], kAreaFloorRadius);
                            if (static_cast<double>(k) < rv * rv) {
                                const double cnt = out.vis_count[l].data()[iq];
                                if (cnt > 0) ga += vterm[l][iq] / cnt;
                            }
                        }
                    }
                }
                for (int c = 0; c < 3; ++c)
                    grads.d_color[l].at(x, y, c) = static_cast<float>(gI[c]);
                grads.d_disparity[l].at(x, y) = static_cast<float>(gd);
                grads.d_alpha[l].at(x, y) = static_cast<float>(ga);
            }
        });
    }
    return grads;
}

} // namespace bokeh
