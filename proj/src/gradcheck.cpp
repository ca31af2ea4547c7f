// SPDX-License-Identifier: Apache-2.0

#include "bokeh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bokeh/kernels.hpp"

namespace bokeh {

using namespace kern;

namespace {

constexpr double kNoiseFloor = 1e-6; // below this both signals count as zero

// Double-precision mirror of the SOFT forward pipeline (no float stores), so
// the finite differences are limited by truncation error rather than float
// rounding. Same math and window as render().
double directional_loss(const LayeredScene &scene, const LensConfig &lens, int R,
                        const ImageBuffer &direction) {
    const int W = scene.width(), H = scene.height();
    const int n = scene.layer_count();
    const SoftParams &sp = lens.soft;
    const bool circle = lens.kernel.kind == ApertureKind::Circle;
    const double occ_off = occ_exp_offset(sp);

    struct Pre {
        std::vector<double> d_rel, radius, area, scat_src, occ_src, occ_rcv, gauss;
    };
    std::vector<Pre> pre(n);
    for (int l = 0; l < n; ++l) {
        const Layer &layer = scene.layers[l];
        Pre &p = pre[l];
        const int npix = W * H;
        p.d_rel.resize(npix);
        p.radius.resize(npix);
        p.area.resize(npix);
        p.scat_src.resize(npix);
        p.occ_src.resize(npix);
        p.occ_rcv.resize(npix);
        p.gauss.resize(npix);
        for (int i = 0; i < npix; ++i) {
            double d = relative_disparity(layer.disparity.data()[i], lens);
            p.d_rel[i] = d;
            p.radius[i] = coc_radius(d, lens.blur_scale, R);
            p.area[i] = coc_area(p.radius[i]);
            p.scat_src[i] = scat_exp_source(std::abs(d), lens.blur_scale, sp);
            p.occ_src[i] = occ_exp_source(d, sp);
            p.occ_rcv[i] = occ_exp_receiver(d, sp);
            p.gauss[i] = occ_focal_gauss(d, sp);
        }
    }

    double loss = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int ix = y * W + x;
            double prefix = 1.0;
            double b[3] = {0, 0, 0};
            for (int l = 0; l < n; ++l) {
                const Layer &layer = scene.layers[l];
                const Pre &p = pre[l];
                double sum_w = 0, sum_c[3] = {0, 0, 0};
                const int qy0 = std::max(y - R, 0), qy1 = std::min(y + R, H - 1);
                const int qx0 = std::max(x - R, 0), qx1 = std::min(x + R, W - 1);
                for (int qy = qy0; qy <= qy1; ++qy)
                    for (int qx = qx0; qx <= qx1; ++qx) {
                        const int iq = qy * W + qx;
                        const double a_y = layer.alpha.data()[iq];
                        if (a_y == 0.0) continue;
                        const double dist = std::hypot(qx - x, qy - y);
                        const double S = scatter_soft_from_parts(
                            p.scat_src[iq], scat_exp_dist(dist, sp), sp);
                        double K_val = 1.0;
                        if (!circle) {
                            double inv = 1.0 / std::max(p.radius[iq], kAreaFloorRadius);
                            K_val = lens.kernel.sample(static_cast<float>((qx - x) * inv),
                                                       static_cast<float>((qy - y) * inv));
                        }
                        const double w = S * K_val * a_y / p.area[iq];
                        double O = 1.0;
                        if (lens.occlusion_enabled)
                            O = occlusion_soft_from_parts(p.gauss[ix], p.occ_rcv[ix],
                                                          p.occ_src[iq], occ_off);
                        const double wo = w * O;
                        sum_w += wo;
                        for (int c = 0; c < 3; ++c)
                            sum_c[c] += layer.color.data()[iq * 3 + c] * wo;
                    }
                const double V = visibility(layer.alpha, x, y, p.radius[ix]);
                const double c_l = V * prefix;
                prefix *= 1.0 - V;
                const double Wc = std::max(sum_w, kEpsDenominator);
                for (int c = 0; c < 3; ++c) b[c] += c_l * (sum_c[c] / Wc);
            }
            for (int c = 0; c < 3; ++c)
                loss += static_cast<double>(direction.data()[ix * 3 + c]) * b[c];
        }
    return loss;
}

struct FamilyAccum {
    std::vector<double> rels;
    size_t degenerate = 0;

    void add(double analytic, double fd) {
        const double mag = std::max(std::abs(analytic), std::abs(fd));
        if (mag < kNoiseFloor) {
            ++degenerate;
            return;
        }
        rels.push_back(std::abs(analytic - fd) / mag);
    }

    // For parameters with piecewise-constant structure (disparity moves the
    // CoC disk membership): two FD step sizes. Samples whose FD is not
    // self-consistent straddle a jump the continuous derivative does not
    // define, and count as degenerate.
    void add_checked(double analytic, double fd_full, double fd_half) {
        const double scale = std::max({std::abs(fd_full), std::abs(fd_half), 1e-3});
        if (std::abs(fd_full - fd_half) > 0.05 * scale) {
            ++degenerate;
            return;
        }
        add(analytic, (4.0 * fd_half - fd_full) / 3.0); // Richardson extrapolation
    }

    GradCheckFamily finish(double tol) {
        GradCheckFamily f;
        f.degenerate = degenerate;
        f.checked = rels.size();
        if (rels.empty()) return f;
        std::sort(rels.begin(), rels.end());
        f.max_rel = rels.back();
        f.median_rel = rels[rels.size() / 2];
        size_t ok = 0;
        for (double r : rels)
            if (r <= tol) ++ok;
        f.frac_ok = static_cast<double>(ok) / rels.size();
        return f;
    }
};

} // namespace

GradCheckReport gradcheck(const LayeredScene &scene, const LensConfig &lens, double eps,
                          double tol, double min_frac, uint64_t seed, int threads) {
    if (lens.mode != RenderMode::Soft)
        throw Error("MODE_MISMATCH", "gradcheck requires SOFT mode");

    const int W = scene.width(), H = scene.height();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> mag(0.2f, 1.f);
    ImageBuffer direction(W, H, 3);
    for (size_t i = 0; i < direction.size(); ++i)
        direction.data()[i] = (rng() & 1 ? 1.f : -1.f) * mag(rng);

    // Pin the window radius so an FD step cannot change it.
    LensConfig fixed = lens;
    fixed.max_radius = resolve_max_radius(scene, lens);
    const int R = fixed.max_radius;

    RenderOutput fwd = render(scene, fixed, threads, /*validate_inputs=*/false);
    GradientSet analytic = backward(scene, fixed, fwd, direction, threads);

    LayeredScene probe = scene;
    FamilyAccum acc_color, acc_disp, acc_alpha;
    for (int l = 0; l < scene.layer_count(); ++l) {
        auto fd_at = [&](ImageBuffer &buf, int x, int y, int c, double step) {
            float saved = buf.at(x, y, c);
            buf.at(x, y, c) = saved + static_cast<float>(step);
            double lp = directional_loss(probe, fixed, R, direction);
            buf.at(x, y, c) = saved - static_cast<float>(step);
            double lm = directional_loss(probe, fixed, R, direction);
            buf.at(x, y, c) = saved;
            // use the realized float step, not the nominal one
            double realized = static_cast<double>(saved + static_cast<float>(step)) -
                              static_cast<double>(saved - static_cast<float>(step));
            return (lp - lm) / realized;
        };
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                for (int c = 0; c < 3; ++c)
                    acc_color.add(analytic.d_color[l].at(x, y, c),
                                  fd_at(probe.layers[l].color, x, y, c, eps));
                acc_disp.add_checked(analytic.d_disparity[l].at(x, y),
                                     fd_at(probe.layers[l].disparity, x, y, 0, eps),
                                     fd_at(probe.layers[l].disparity, x, y, 0, eps * 0.5));
                acc_alpha.add(analytic.d_alpha[l].at(x, y),
                              fd_at(probe.layers[l].alpha, x, y, 0, eps));
            }
    }

    GradCheckReport report;
    report.color = acc_color.finish(tol);
    report.disparity = acc_disp.finish(tol);
    report.alpha = acc_alpha.finish(tol);
    report.pass = report.color.frac_ok >= min_frac && report.disparity.frac_ok >= min_frac &&
                  report.alpha.frac_ok >= min_frac;
    return report;
}

LayeredScene random_gradcheck_scene(int width, int height, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> col(0.05f, 0.95f);
    std::uniform_real_distribution<float> disp(-0.6f, 0.6f);
    std::uniform_real_distribution<float> alp(0.3f, 1.f);
    Layer layer;
    layer.color = ImageBuffer(width, height, 3);
    layer.alpha = ImageBuffer(width, height, 1);
    layer.disparity = ImageBuffer(width, height, 1);
    for (size_t i = 0; i < layer.color.size(); ++i) layer.color.data()[i] = col(rng);
    for (size_t i = 0; i < layer.alpha.size(); ++i) layer.alpha.data()[i] = alp(rng);
    for (size_t i = 0; i < layer.disparity.size(); ++i) layer.disparity.data()[i] = disp(rng);
    LayeredScene scene;
    scene.layers.push_back(std::move(layer));
    return scene;
}

LensConfig gradcheck_lens() {
    LensConfig lens;
    lens.mode = RenderMode::Soft;
    lens.blur_scale = 6.0;
    lens.focus_disparity = 0.0;
    lens.soft.leak_slope = 0.0;
    return lens;
}

} // namespace bokeh
