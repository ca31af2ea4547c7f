// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bokeh {

// Row-major float image. Color/alpha channels live in [0,1] linear light;
// disparity buffers hold unbounded reals (1/z units).
class ImageBuffer {
  public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels, float fill = 0.f)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {
        if (width <= 0 || height <= 0 || (channels != 1 && channels != 3 && channels != 4))
            throw std::invalid_argument("ImageBuffer: bad dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float &at(int x, int y, int c = 0) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int x, int y, int c = 0) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    float *data() { return data_.data(); }
    const float *data() const { return data_.data(); }

    bool same_shape(const ImageBuffer &o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }
    bool same_extent(const ImageBuffer &o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

    bool all_finite() const {
        for (float v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(float v) { std::fill(data_.begin(), data_.end(), v); }

  private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

} // namespace bokeh
