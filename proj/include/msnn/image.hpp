#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "msnn/common.hpp"

namespace msnn {

// Planar image, values nominally in [0,1], layout data[c*H*W + y*W + x].
struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::int64_t w, std::int64_t h, std::int64_t c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w * h * c), fill) {
    if (w <= 0 || h <= 0 || c <= 0) throw InvalidArgument("image extents must be positive");
  }

  double& at(std::int64_t c, std::int64_t y, std::int64_t x) { return data[(c * height + y) * width + x]; }
  double at(std::int64_t c, std::int64_t y, std::int64_t x) const { return data[(c * height + y) * width + x]; }
  std::int64_t plane_size() const { return width * height; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height && channels == o.channels; }
};

/// Rec.601 luma; pass-through for already-gray images.
inline Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw InvalidArgument("to_gray: expected 1 or 3 channels, got " + std::to_string(img.channels));
  Image out(img.width, img.height, 1);
  const double* r = img.data.data();
  const double* g = r + img.plane_size();
  const double* b = g + img.plane_size();
  for (std::int64_t i = 0; i < img.plane_size(); ++i) out.data[static_cast<std::size_t>(i)] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

/// Bilinear sample of one channel at continuous pixel-center coordinates;
/// everything outside the frame reads as zero.
inline double sample_bilinear(const Image& img, std::int64_t c, double x, double y) {
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  auto pix = [&](std::int64_t xi, std::int64_t yi) -> double {
    if (xi < 0 || xi >= img.width || yi < 0 || yi >= img.height) return 0.0;
    return img.at(c, yi, xi);
  };
  const double top = pix(x0, y0) * (1.0 - fx) + pix(x0 + 1, y0) * fx;
  const double bot = pix(x0, y0 + 1) * (1.0 - fx) + pix(x0 + 1, y0 + 1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

/// Bilinear resize with pixel-center alignment.
inline Image resize_bilinear(const Image& img, std::int64_t out_w, std::int64_t out_h) {
  if (out_w <= 0 || out_h <= 0) throw InvalidArgument("resize_bilinear: output extents must be positive");
  Image out(out_w, out_h, img.channels);
  const double sx = static_cast<double>(img.width) / static_cast<double>(out_w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(out_h);
  for (std::int64_t c = 0; c < img.channels; ++c)
    for (std::int64_t y = 0; y < out_h; ++y) {
      const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (std::int64_t x = 0; x < out_w; ++x) {
        const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
        out.at(c, y, x) = sample_bilinear(img, c, src_x, src_y);
      }
    }
  return out;
}

/// Axis-aligned copy of [x0, x0+w) x [y0, y0+h); out-of-frame area is zero.
inline Image crop_pad(const Image& img, std::int64_t x0, std::int64_t y0, std::int64_t w, std::int64_t h) {
  Image out(w, h, img.channels);
  for (std::int64_t c = 0; c < img.channels; ++c)
    for (std::int64_t y = 0; y < h; ++y) {
      const std::int64_t sy = y0 + y;
      if (sy < 0 || sy >= img.height) continue;
      const std::int64_t xs = std::max<std::int64_t>(0, -x0);
      const std::int64_t xe = std::min<std::int64_t>(w, img.width - x0);
      for (std::int64_t x = xs; x < xe; ++x) out.at(c, y, x) = img.at(c, sy, x0 + x);
    }
  return out;
}

inline Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::int64_t c = 0; c < img.channels; ++c)
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
  return out;
}

/// Separable Gaussian blur with reflected borders.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const std::int64_t radius = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (std::int64_t i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= norm;
  auto reflect = [](std::int64_t i, std::int64_t n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp<std::int64_t>(i, 0, n - 1);
  };
  Image tmp(img.width, img.height, img.channels);
  for (std::int64_t c = 0; c < img.channels; ++c)
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (std::int64_t i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * img.at(c, y, reflect(x + i, img.width));
        tmp.at(c, y, x) = acc;
      }
  Image out(img.width, img.height, img.channels);
  for (std::int64_t c = 0; c < img.channels; ++c)
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (std::int64_t i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(c, reflect(y + i, img.height), x);
        out.at(c, y, x) = acc;
      }
  return out;
}

}  // namespace msnn
