#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccodec/common.hpp"
#include "ccodec/image.hpp"

namespace ccodec {

struct EdgeConfig {
  double blur_sigma = 1.0;
  double low = 0.015;  // on normalized gradient magnitude in [0,1]
  double high = 0.05;
};

namespace detail {

inline std::vector<double> gaussian_kernel_1d(double sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with edge-clamped borders; single channel.
inline std::vector<double> gaussian_blur(const std::vector<double>& in, int h, int w,
                                         double sigma) {
  if (sigma <= 0.0) return in;
  auto k = gaussian_kernel_1d(sigma);
  int radius = static_cast<int>(k.size() / 2);
  std::vector<double> mid(in.size()), out(in.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int sx = std::clamp(x + i, 0, w - 1);
        acc += k[i + radius] * in[static_cast<std::size_t>(y) * w + sx];
      }
      mid[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        int sy = std::clamp(y + i, 0, h - 1);
        acc += k[i + radius] * mid[static_cast<std::size_t>(sy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace detail

// Canny with Gaussian pre-blur. Gradient magnitudes are normalized by the
// Sobel maximum on unit-range input (4*sqrt(2)) so thresholds live in [0,1].
inline StructuralMap extract_edges(const Image& img, double blur_sigma, double low,
                                   double high) {
  if (!(low >= 0.0 && low < high)) throw ArgumentError("require 0 <= low < high");
  if (blur_sigma < 0.0) throw ArgumentError("blur_sigma must be >= 0");

  int h = img.height, w = img.width;
  std::vector<double> gray(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels; ++c) s += img.at(y, x, c);
      gray[static_cast<std::size_t>(y) * w + x] = s / img.channels;
    }
  std::vector<double> blurred = detail::gaussian_blur(gray, h, w, blur_sigma);

  auto px = [&](int y, int x) {
    return blurred[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w +
                   std::clamp(x, 0, w - 1)];
  };

  std::vector<double> mag(static_cast<std::size_t>(h) * w);
  std::vector<std::uint8_t> dir(static_cast<std::size_t>(h) * w);  // quantized to 4 sectors
  const double norm = 4.0 * std::numbers::sqrt2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = -px(y - 1, x - 1) - 2 * px(y, x - 1) - px(y + 1, x - 1) +
                  px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1);
      double gy = -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1) +
                  px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1);
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      mag[i] = std::min(1.0, std::hypot(gx, gy) / norm);
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += std::numbers::pi;
      // sectors: 0 = horizontal gradient, 1 = diag /, 2 = vertical, 3 = diag \.
      dir[i] = static_cast<std::uint8_t>(
          static_cast<int>(std::floor((angle + std::numbers::pi / 8) / (std::numbers::pi / 4))) % 4);
    }

  // Non-maximum suppression. Ties along the gradient break toward the
  // lower-index neighbor so a symmetric two-pixel ridge keeps one pixel.
  auto m = [&](int y, int x) -> double {
    if (y < 0 || y >= h || x < 0 || x >= w) return -1.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  static constexpr int off[4][2] = {{0, 1}, {1, -1}, {1, 0}, {1, 1}};  // (dy,dx) per sector
  std::vector<std::uint8_t> nms(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (mag[i] < low) continue;
      int dy = off[dir[i]][0], dx = off[dir[i]][1];
      double a = m(y - dy, x - dx);  // lower-index side
      double b = m(y + dy, x + dx);
      if (mag[i] > a && mag[i] >= b) nms[i] = mag[i] >= high ? 2 : 1;
    }

  // Hysteresis: grow strong pixels through weak ones (8-connectivity).
  StructuralMap out(h, w);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < nms.size(); ++i)
    if (nms[i] == 2) {
      out.mask[i] = 1;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (nms[j] == 1 && !out.mask[j]) {
          out.mask[j] = 1;
          stack.push_back(j);
        }
      }
  }
  return out;
}

inline StructuralMap extract_edges(const Image& img, const EdgeConfig& cfg = {}) {
  return extract_edges(img, cfg.blur_sigma, cfg.low, cfg.high);
}

}  // namespace ccodec
