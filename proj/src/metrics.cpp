// SPDX-License-Identifier: Apache-2.0

#include "bokeh/metrics.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace bokeh::metrics {

namespace {

void check_shapes(const ImageBuffer &a, const ImageBuffer &b) {
    if (!a.same_shape(b)) throw Error("SHAPE_MISMATCH", "metric inputs differ in shape");
}

} // namespace

double rmse(const ImageBuffer &a, const ImageBuffer &b) {
    check_shapes(a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc / a.size());
}

double rmse_s(const ImageBuffer &a, const ImageBuffer &b) {
    check_shapes(a, b);
    double aa = 0.0, ab = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        aa += static_cast<double>(a.data()[i]) * a.data()[i];
        ab += static_cast<double>(a.data()[i]) * b.data()[i];
    }
    if (aa == 0.0) throw Error("ZERO_VARIANCE", "rmse_s undefined for an all-zero prediction");
    const double s = ab / aa;
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = s * a.data()[i] - static_cast<double>(b.data()[i]);
        acc += d * d;
    }
    return std::sqrt(acc / a.size());
}

double psnr(const ImageBuffer &a, const ImageBuffer &b) {
    double e = rmse(a, b);
    if (e == 0.0) return kPsnrIdenticalSentinel;
    return std::min(20.0 * std::log10(1.0 / e), kPsnrIdenticalSentinel);
}

double zncc(const ImageBuffer &a, const ImageBuffer &b) {
    check_shapes(a, b);
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a.data()[i];
        mb += b.data()[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cov = 0;
    for (size_t i = 0; i < n; ++i) {
        double da = a.data()[i] - ma, db = b.data()[i] - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    if (va == 0.0 || vb == 0.0)
        throw Error("ZERO_VARIANCE", "zncc undefined for constant images");
    return cov / std::sqrt(va * vb);
}

double ssim(const ImageBuffer &a, const ImageBuffer &b, int window) {
    check_shapes(a, b);
    if (window < 3 || window % 2 == 0)
        throw Error("WINDOW_TOO_LARGE", "ssim window must be odd and >= 3");
    if (window > a.width() || window > a.height())
        throw Error("WINDOW_TOO_LARGE", "ssim window exceeds image extent");

    const int half = window / 2;
    const double sigma = 1.5 * window / 11.0;
    std::vector<double> g(window);
    double gsum = 0.0;
    for (int i = 0; i < window; ++i) {
        double d = i - half;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        gsum += g[i];
    }
    for (double &v : g) v /= gsum;

    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    const int W = a.width(), H = a.height(), ch = a.channels();
    double total = 0.0;
    size_t count = 0;
    for (int c = 0; c < ch; ++c) {
        for (int y = half; y < H - half; ++y) {
            for (int x = half; x < W - half; ++x) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int j = -half; j <= half; ++j) {
                    for (int i = -half; i <= half; ++i) {
                        double wgt = g[j + half] * g[i + half];
                        double va = a.at(x + i, y + j, c);
                        double vb = b.at(x + i, y + j, c);
                        mx += wgt * va;
                        my += wgt * vb;
                        mxx += wgt * va * va;
                        myy += wgt * vb * vb;
                        mxy += wgt * va * vb;
                    }
                }
                double sx = mxx - mx * mx, sy = myy - my * my, sxy = mxy - mx * my;
                double num = (2 * mx * my + C1) * (2 * sxy + C2);
                double den = (mx * mx + my * my + C1) * (sx + sy + C2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / count;
}

MetricRow MetricReport::mean() const {
    MetricRow m;
    m.name = "mean";
    for (const MetricRow &r : rows) {
        m.rmse += r.rmse;
        m.rmse_s += r.rmse_s;
        m.ssim += r.ssim;
        m.psnr += r.psnr;
        m.zncc += r.zncc;
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    m.rmse /= n;
    m.rmse_s /= n;
    m.ssim /= n;
    m.psnr /= n;
    m.zncc /= n;
    return m;
}

MetricRow MetricReport::stddev() const {
    MetricRow m = mean(), s;
    s.name = "std";
    for (const MetricRow &r : rows) {
        s.rmse += (r.rmse - m.rmse) * (r.rmse - m.rmse);
        s.rmse_s += (r.rmse_s - m.rmse_s) * (r.rmse_s - m.rmse_s);
        s.ssim += (r.ssim - m.ssim) * (r.ssim - m.ssim);
        s.psnr += (r.psnr - m.psnr) * (r.psnr - m.psnr);
        s.zncc += (r.zncc - m.zncc) * (r.zncc - m.zncc);
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    s.rmse = std::sqrt(s.rmse / n);
    s.rmse_s = std::sqrt(s.rmse_s / n);
    s.ssim = std::sqrt(s.ssim / n);
    s.psnr = std::sqrt(s.psnr / n);
    s.zncc = std::sqrt(s.zncc / n);
    return s;
}

std::string MetricReport::format() const {
    std::ostringstream os;
    os << "name rmse rmse_s ssim psnr zncc\n";
    auto row = [&](const MetricRow &r) {
        os << r.name << " " << r.rmse << " " << r.rmse_s << " " << r.ssim << " " << r.psnr
           << " " << r.zncc << "\n";
    };
    for (const MetricRow &r : rows) row(r);
    row(mean());
    row(stddev());
    return os.str();
}

} // namespace bokeh::metrics
