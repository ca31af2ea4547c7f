// SPDX-License-Identifier: Apache-2.0

#include "bokeh/dfd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bokeh::dfd {

namespace {

// ---------------------------------------------------------------------------
// Separable Gaussian convolution on double planes (zero padding)
// ---------------------------------------------------------------------------

std::vector<double> gauss_kernel(int window) {
    const int half = window / 2;
    const double sigma = 1.5 * window / 11.0;
    std::vector<double> g(window);
    double sum = 0;
    for (int i = 0; i < window; ++i) {
        double d = i - half;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += g[i];
    }
    for (double &v : g) v /= sum;
    return g;
}

void convolve_sep(const std::vector<double> &src, int w, int h, const std::vector<double> &g,
                  std::vector<double> &tmp, std::vector<double> &dst) {
    const int half = static_cast<int>(g.size()) / 2;
    tmp.assign(src.size(), 0.0);
    dst.assign(src.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -half; k <= half; ++k) {
                int xx = x + k;
                if (xx >= 0 && xx < w) acc += g[k + half] * src[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -half; k <= half; ++k) {
                int yy = y + k;
                if (yy >= 0 && yy < h) acc += g[k + half] * tmp[yy * w + x];
            }
            dst[y * w + x] = acc;
        }
}

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

} // namespace

double hssim(const ImageBuffer &target, const ImageBuffer &pred,
             const std::vector<int> &windows, ImageBuffer *d_pred) {
    if (!target.same_shape(pred)) throw Error("SHAPE_MISMATCH", "hssim inputs differ in shape");
    if (windows.empty()) throw Error("WINDOW_TOO_LARGE", "empty window set");
    const int w = pred.width(), h = pred.height(), ch = pred.channels();
    for (int win : windows) {
        if (win < 3 || win % 2 == 0)
            throw Error("WINDOW_TOO_LARGE", "windows must be odd and >= 3");
        if (win > w || win > h)
            throw Error("WINDOW_TOO_LARGE", "ssim window exceeds image extent");
    }
    if (d_pred) {
        *d_pred = ImageBuffer(w, h, ch);
        d_pred->fill(0.f);
    }

    const size_t n = static_cast<size_t>(w) * h;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    std::vector<double> m1, m2, mxy, my1, my2, tmp;
    std::vector<double> a1(n), a2(n), a3(n), g1, g2, g3;

    double total = 0;
    for (int win : windows) {
        const std::vector<double> g = gauss_kernel(win);
        const int half = win / 2;
        const size_t valid =
            static_cast<size_t>(w - 2 * half) * static_cast<size_t>(h - 2 * half);
        double win_sum = 0;
        for (int c = 0; c < ch; ++c) {
            for (size_t i = 0; i < n; ++i) {
                x[i] = pred.data()[i * ch + c];
                y[i] = target.data()[i * ch + c];
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
            convolve_sep(x, w, h, g, tmp, m1);
            convolve_sep(xx, w, h, g, tmp, m2);
            convolve_sep(xy, w, h, g, tmp, mxy);
            convolve_sep(y, w, h, g, tmp, my1);
            convolve_sep(yy, w, h, g, tmp, my2);

            std::fill(a1.begin(), a1.end(), 0.0);
            std::fill(a2.begin(), a2.end(), 0.0);
            std::fill(a3.begin(), a3.end(), 0.0);
            const double weight = 1.0 / (valid * ch);
            for (int py = half; py < h - half; ++py)
                for (int px = half; px < w - half; ++px) {
                    const size_t i = static_cast<size_t>(py) * w + px;
                    const double mux = m1[i], muy = my1[i];
                    const double sx = m2[i] - mux * mux;
                    const double sy = my2[i] - muy * muy;
                    const double sxy = mxy[i] - mux * muy;
                    const double A1 = 2 * mux * muy + kC1, A2 = 2 * sxy + kC2;
                    const double B1 = mux * mux + muy * muy + kC1;
                    const double B2 = sx + sy + kC2;
                    const double v = (A1 * A2) / (B1 * B2);
                    win_sum += v * weight;
                    if (d_pred) {
                        const double dmux = (2 * muy * A2) / (B1 * B2) - v * 2 * mux / B1;
                        const double dsx = -v / B2;
                        const double dsxy = 2 * A1 / (B1 * B2);
                        a1[i] = weight * (dmux - dsx * 2 * mux - dsxy * muy);
                        a2[i] = weight * dsx;
                        a3[i] = weight * dsxy;
                    }
                }
            if (d_pred) {
                convolve_sep(a1, w, h, g, tmp, g1);
                convolve_sep(a2, w, h, g, tmp, g2);
                convolve_sep(a3, w, h, g, tmp, g3);
                const float scale = 1.f / static_cast<float>(windows.size());
                for (size_t i = 0; i < n; ++i)
                    d_pred->data()[i * ch + c] +=
                        scale * static_cast<float>(g1[i] + 2 * x[i] * g2[i] + y[i] * g3[i]);
            }
        }
        total += win_sum;
    }
    return total / windows.size();
}

// ---------------------------------------------------------------------------
// Edge-aware smoothness pyramid
// ---------------------------------------------------------------------------

namespace {

ImageBuffer downsample_box(const ImageBuffer &img) {
    const int w = img.width() / 2, h = img.height() / 2, ch = img.channels();
    ImageBuffer out(w, h, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c)
                out.at(x, y, c) = 0.25f * (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                                           img.at(2 * x, 2 * y + 1, c) +
                                           img.at(2 * x + 1, 2 * y + 1, c));
    return out;
}

// One pyramid level. grad_out (when present) accumulates into the same-level
// disparity gradient buffer with the given weight.
double level_term(const ImageBuffer &d, const ImageBuffer &img, ImageBuffer *grad_out,
                  double weight) {
    const int w = d.width(), h = d.height(), ch = img.channels();
    auto img_gx = [&](int x, int y) {
        double s = 0;
        for (int c = 0; c < ch; ++c) s += std::abs(img.at(x + 1, y, c) - img.at(x, y, c));
        return s / ch;
    };
    auto img_gy = [&](int x, int y) {
        double s = 0;
        for (int c = 0; c < ch; ++c) s += std::abs(img.at(x, y + 1, c) - img.at(x, y, c));
        return s / ch;
    };
    const size_t count = static_cast<size_t>(w) * h;
    const double norm = 1.0 / count;
    double sum = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w - 1; ++x) {
            double dd = d.at(x + 1, y) - d.at(x, y);
            double e = std::exp(-img_gx(x, y));
            sum += std::abs(dd) * e * norm;
            if (grad_out && dd != 0) {
                float gv = static_cast<float>(weight * (dd > 0 ? 1 : -1) * e * norm);
                grad_out->at(x + 1, y) += gv;
                grad_out->at(x, y) -= gv;
            }
        }
    for (int y = 0; y < h - 1; ++y)
        for (int x = 0; x < w; ++x) {
            double dd = d.at(x, y + 1) - d.at(x, y);
            double e = std::exp(-img_gy(x, y));
            sum += std::abs(dd) * e * norm;
            if (grad_out && dd != 0) {
                float gv = static_cast<float>(weight * (dd > 0 ? 1 : -1) * e * norm);
                grad_out->at(x, y + 1) += gv;
                grad_out->at(x, y) -= gv;
            }
        }
    return sum;
}

// Adjoint of downsample_box into the finer level.
void upsample_add(const ImageBuffer &coarse, ImageBuffer &fine) {
    for (int y = 0; y < coarse.height(); ++y)
        for (int x = 0; x < coarse.width(); ++x) {
            float v = 0.25f * coarse.at(x, y);
            fine.at(2 * x, 2 * y) += v;
            fine.at(2 * x + 1, 2 * y) += v;
            fine.at(2 * x, 2 * y + 1) += v;
            fine.at(2 * x + 1, 2 * y + 1) += v;
        }
}

} // namespace

double grad_reg(const ImageBuffer &disparity, const ImageBuffer &image, int levels,
                ImageBuffer *d_disparity) {
    if (!disparity.same_extent(image) || disparity.channels() != 1)
        throw Error("SHAPE_MISMATCH", "grad_reg expects a 1-channel map matching the image");
    if (d_disparity) {
        *d_disparity = ImageBuffer(disparity.width(), disparity.height(), 1);
        d_disparity->fill(0.f);
    }

    std::vector<ImageBuffer> d_pyr{disparity}, i_pyr{image};
    for (int l = 1; l < levels; ++l) {
        if (d_pyr.back().width() < 4 || d_pyr.back().height() < 4) break;
        d_pyr.push_back(downsample_box(d_pyr.back()));
        i_pyr.push_back(downsample_box(i_pyr.back()));
    }
    const int n = static_cast<int>(d_pyr.size());
    const double level_weight = 1.0 / levels;

    double total = 0;
    std::vector<ImageBuffer> grads;
    for (int l = 0; l < n; ++l) {
        ImageBuffer *g = nullptr;
        if (d_disparity) {
            grads.emplace_back(d_pyr[l].width(), d_pyr[l].height(), 1);
            g = &grads.back();
        }
        total += level_weight * level_term(d_pyr[l], i_pyr[l], g, level_weight);
    }
    if (d_disparity) {
        // chain each level's gradient down through the box filters
        for (int l = n - 1; l >= 1; --l) upsample_add(grads[l], grads[l - 1]);
        *d_disparity = std::move(grads[0]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Composite loss and the optimizer
// ---------------------------------------------------------------------------

LossValue loss(const ImageBuffer &pred, const ImageBuffer &target,
               const ImageBuffer &disparity, const ImageBuffer &image, const DfdProblem &prob,
               ImageBuffer *d_pred, ImageBuffer *d_disparity) {
    if (!pred.same_shape(target))
        throw Error("SHAPE_MISMATCH", "prediction and target differ in shape");
    LossValue v;

    v.l1 = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        v.l1 += std::abs(static_cast<double>(pred.data()[i]) - target.data()[i]);
    v.l1 /= pred.size();

    // keep only the window sizes that fit the image; small inputs simply use
    // fewer SSIM scales instead of failing outright
    std::vector<int> windows;
    for (int win : prob.windows)
        if (win <= pred.width() && win <= pred.height()) windows.push_back(win);
    if (windows.empty())
        throw Error("WINDOW_TOO_LARGE", "no ssim window fits the image extent");

    ImageBuffer hs_grad;
    v.hssim = hssim(target, pred, windows, d_pred ? &hs_grad : nullptr);
    v.grad = grad_reg(disparity, image, prob.pyramid_levels, d_disparity);

    if (d_pred) {
        *d_pred = ImageBuffer(pred.width(), pred.height(), pred.channels());
        const double l1w = prob.lambda_l1 / pred.size();
        for (size_t i = 0; i < pred.size(); ++i) {
            double diff = static_cast<double>(pred.data()[i]) - target.data()[i];
            double g = (diff > 0 ? l1w : diff < 0 ? -l1w : 0.0);
            g -= prob.lambda_hssim * hs_grad.data()[i]; // loss uses 1 - hssim
            d_pred->data()[i] = static_cast<float>(g);
        }
    }
    if (d_disparity)
        for (size_t i = 0; i < d_disparity->size(); ++i)
            d_disparity->data()[i] *= static_cast<float>(prob.lambda_grad);

    v.total = prob.lambda_l1 * v.l1 + prob.lambda_grad * v.grad +
              prob.lambda_hssim * (1.0 - v.hssim);
    return v;
}

DfdResult optimize(const DfdProblem &prob) {
    if (prob.lens.mode != RenderMode::Soft)
        throw Error("MODE_MISMATCH", "depth optimization requires SOFT mode");
    if (!prob.image.same_extent(prob.target) || !prob.image.same_extent(prob.init_disparity))
        throw Error("SHAPE_MISMATCH", "problem buffers differ in extent");
    if (prob.lambda_l1 < 0 || prob.lambda_grad < 0 || prob.lambda_hssim < 0)
        throw Error("SHAPE_MISMATCH", "loss weights must be non-negative");

    const int w = prob.image.width(), h = prob.image.height();
    LayeredScene scene;
    scene.layers.push_back(
        Layer{prob.image, ImageBuffer(w, h, 1, 1.f), prob.init_disparity});
    ImageBuffer &disp = scene.layers[0].disparity;

    const size_t n = disp.size();
    std::vector<double> m(n, 0.0), v2(n, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    DfdResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    ImageBuffer best_disp = disp;
    std::vector<double> best_history;

    for (int it = 0; it < prob.max_iterations; ++it) {
        RenderOutput fwd = render(scene, prob.lens, prob.threads);
        ImageBuffer d_pred, d_disp_reg;
        LossValue lv = loss(fwd.bokeh, prob.target, disp, prob.image, prob, &d_pred,
                            &d_disp_reg);
        if (!std::isfinite(lv.total)) throw Error("DIVERGED", "loss became non-finite");
        result.trace.push_back({it, lv.total, lv.l1, lv.grad, lv.hssim});
        if (lv.total < result.best_loss) {
            result.best_loss = lv.total;
            best_disp = disp;
        }
        best_history.push_back(result.best_loss);
        if (prob.tolerance > 0 && it >= 50) {
            double prev = best_history[it - 50];
            if ((prev - result.best_loss) / std::max(prev, 1e-12) < prob.tolerance) break;
        }

        GradientSet grads = backward(scene, prob.lens, fwd, d_pred, prob.threads);
        const ImageBuffer &d_disp_render = grads.d_disparity[0];
        const double t = it + 1;
        const double corr = std::sqrt(1 - std::pow(beta2, t)) / (1 - std::pow(beta1, t));
        for (size_t i = 0; i < n; ++i) {
            double g = static_cast<double>(d_disp_render.data()[i]) + d_disp_reg.data()[i];
            m[i] = beta1 * m[i] + (1 - beta1) * g;
            v2[i] = beta2 * v2[i] + (1 - beta2) * g * g;
            disp.data()[i] -= static_cast<float>(prob.step_size * corr * m[i] /
                                                 (std::sqrt(v2[i]) + eps));
        }
        if (!disp.all_finite()) throw Error("DIVERGED", "disparity became non-finite");
    }

    result.disparity = best_disp;
    scene.layers[0].disparity = best_disp;
    result.render = render(scene, prob.lens, prob.threads).bokeh;
    return result;
}

void save_trace_csv(const std::filesystem::path &path, const std::vector<DfdTraceRow> &trace) {
    std::ofstream out(path);
    if (!out) throw Error("IO_FAILURE", "cannot write " + path.string());
    out << "iteration,total,l1,grad,hssim\n";
    for (const DfdTraceRow &r : trace)
        out << r.iteration << "," << r.total << "," << r.l1 << "," << r.grad << "," << r.hssim
            << "\n";
}

} // namespace bokeh::dfd
