// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "bokeh/errors.hpp"
#include "bokeh/image.hpp"

namespace bokeh::metrics {

constexpr double kPsnrIdenticalSentinel = 99.0; // dB, keeps aggregates finite

double rmse(const ImageBuffer &a, const ImageBuffer &b);

// Scale-invariant RMSE: rmse(s* a, b) with the least-squares scalar
// s* = <a,b>/<a,a> shared across channels. First argument is the prediction.
double rmse_s(const ImageBuffer &a, const ImageBuffer &b);

// 20 log10(1 / rmse), peak 1; identical images report the sentinel.
double psnr(const ImageBuffer &a, const ImageBuffer &b);

// Zero-normalized cross-correlation of the flattened images.
double zncc(const ImageBuffer &a, const ImageBuffer &b);

// Mean SSIM with a Gaussian window (sigma scaled with the window size),
// C1 = 0.01^2, C2 = 0.03^2 on unit dynamic range, valid region only.
double ssim(const ImageBuffer &a, const ImageBuffer &b, int window = 11);

struct MetricRow {
    std::string name;
    double rmse = 0, rmse_s = 0, ssim = 0, psnr = 0, zncc = 0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    MetricRow mean() const;
    MetricRow stddev() const;
    std::string format() const; // per-image rows plus mean +/- std aggregate
};

} // namespace bokeh::metrics
