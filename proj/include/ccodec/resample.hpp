#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ccodec/common.hpp"
#include "ccodec/image.hpp"

namespace ccodec {

// Lanczos-windowed sinc, lobe parameter a=3.
inline double lanczos3(double x) {
  x = std::abs(x);
  if (x < 1e-12) return 1.0;
  if (x >= 3.0) return 0.0;
  double px = std::numbers::pi * x;
  return 3.0 * std::sin(px) * std::sin(px / 3.0) / (px * px);
}

namespace detail {

struct TapSet {
  int first;                    // first source index
  std::vector<double> weights;  // normalized to sum 1
};

// Origin-aligned mapping: src = dst * den / num. When downsampling the
// kernel is stretched by den/num to act as an anti-alias filter.
inline std::vector<TapSet> lanczos_taps(int src_len, int dst_len, int num, int den) {
  double filter_scale = num < den ? static_cast<double>(den) / num : 1.0;
  double support = 3.0 * filter_scale;
  std::vector<TapSet> taps(dst_len);
  for (int i = 0; i < dst_len; ++i) {
    double x = static_cast<double>(i) * den / num;
    int lo = static_cast<int>(std::ceil(x - support));
    int hi = static_cast<int>(std::floor(x + support));
    TapSet t;
    t.first = lo;
    t.weights.resize(hi - lo + 1);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) {
      double w = lanczos3((x - j) / filter_scale);
      t.weights[j - lo] = w;
      sum += w;
    }
    for (double& w : t.weights) w /= sum;
    taps[i] = std::move(t);
  }
  return taps;
}

}  // namespace detail

// Separable Lanczos-3 resampling of an H x W x C raster by the rational
// factor num/den. Output range is unconstrained; image pipelines that
// require [0,1] clamp afterwards (see lanczos_resample_unit).
inline Image lanczos_resample(const Image& in, int scale_num, int scale_den) {
  if (scale_num <= 0 || scale_den <= 0)
    throw ArgumentError("resample scale must be positive");
  if ((static_cast<long long>(in.height) * scale_num) % scale_den != 0 ||
      (static_cast<long long>(in.width) * scale_num) % scale_den != 0)
    throw ArgumentError("resample target dimensions must be integral");
  int oh = static_cast<int>(static_cast<long long>(in.height) * scale_num / scale_den);
  int ow = static_cast<int>(static_cast<long long>(in.width) * scale_num / scale_den);
  if (oh <= 0 || ow <= 0) throw ArgumentError("resample target dimensions must be positive");
  if (scale_num == scale_den) return in;

  auto col_taps = detail::lanczos_taps(in.width, ow, scale_num, scale_den);
  auto row_taps = detail::lanczos_taps(in.height, oh, scale_num, scale_den);

  // Horizontal pass.
  Image mid(in.height, ow, in.channels);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < ow; ++x) {
      const auto& t = col_taps[x];
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          int sx = std::clamp(t.first + static_cast<int>(k), 0, in.width - 1);
          acc += t.weights[k] * in.at(y, sx, c);
        }
        mid.at(y, x, c) = acc;
      }
    }

  // Vertical pass.
  Image out(oh, ow, in.channels);
  for (int y = 0; y < oh; ++y) {
    const auto& t = row_taps[y];
    for (int x = 0; x < ow; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          int sy = std::clamp(t.first + static_cast<int>(k), 0, in.height - 1);
          acc += t.weights[k] * mid.at(sy, x, c);
        }
        out.at(y, x, c) = acc;
      }
  }
  return out;
}

// Resize to explicit target dimensions (per-axis rational scale).
inline Image lanczos_resize(const Image& in, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize target must be positive");
  auto col_taps = detail::lanczos_taps(in.width, out_w, out_w, in.width);
  auto row_taps = detail::lanczos_taps(in.height, out_h, out_h, in.height);

  Image mid(in.height, out_w, in.channels);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < out_w; ++x) {
      const auto& t = col_taps[x];
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k)
          acc += t.weights[k] *
                 in.at(y, std::clamp(t.first + static_cast<int>(k), 0, in.width - 1), c);
        mid.at(y, x, c) = acc;
      }
    }
  Image out(out_h, out_w, in.channels);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = row_taps[y];
    for (int x = 0; x < out_w; ++x)
      for (int c = 0; c < in.channels; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k)
          acc += t.weights[k] *
                 mid.at(std::clamp(t.first + static_cast<int>(k), 0, in.height - 1), x, c);
        out.at(y, x, c) = std::clamp(acc, 0.0, 1.0);
      }
  }
  return out;
}

// Resampling for [0,1]-valued images: clamps ringing back into range.
inline Image lanczos_resample_unit(const Image& in, int scale_num, int scale_den) {
  Image out = lanczos_resample(in, scale_num, scale_den);
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace ccodec
