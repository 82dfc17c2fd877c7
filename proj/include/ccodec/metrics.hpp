#pragma once

#include <cmath>
#include <vector>

#include "ccodec/common.hpp"
#include "ccodec/image.hpp"

namespace ccodec {

constexpr double kPsnrCap = 99.0;  // reported for zero-MSE pairs

inline double psnr(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw ArgumentError("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

// Mean local SSIM on channel-mean grayscale; 11x11 Gaussian window
// sigma=1.5, K1=0.01, K2=0.03, unit dynamic range.
inline double ssim_metric(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw ArgumentError("ssim_metric: shape mismatch");
  int H = a.height, W = a.width;
  if (H < 11 || W < 11) throw ArgumentError("ssim_metric: images smaller than the window");

  std::vector<double> ga(static_cast<std::size_t>(H) * W), gb(ga.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double sa = 0, sb = 0;
      for (int c = 0; c < a.channels; ++c) {
        sa += a.at(y, x, c);
        sb += b.at(y, x, c);
      }
      ga[static_cast<std::size_t>(y) * W + x] = sa / a.channels;
      gb[static_cast<std::size_t>(y) * W + x] = sb / a.channels;
    }

  const int R = 5;
  double win[11][11];
  double wsum = 0.0;
  for (int y = -R; y <= R; ++y)
    for (int x = -R; x <= R; ++x) {
      win[y + R][x + R] = std::exp(-(x * x + y * y) / (2.0 * 1.5 * 1.5));
      wsum += win[y + R][x + R];
    }
  for (auto& row : win)
    for (double& v : row) v /= wsum;

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  int count = 0;
  for (int y = R; y < H - R; ++y)
    for (int x = R; x < W - R; ++x) {
      double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
      for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) {
          double w = win[dy + R][dx + R];
          double va = ga[static_cast<std::size_t>(y + dy) * W + (x + dx)];
          double vb = gb[static_cast<std::size_t>(y + dy) * W + (x + dx)];
          ma += w * va;
          mb += w * vb;
          maa += w * va * va;
          mbb += w * vb * vb;
          mab += w * va * vb;
        }
      double sa = maa - ma * ma, sb = mbb - mb * mb, sab = mab - ma * mb;
      double v = ((2 * ma * mb + c1) * (2 * sab + c2)) /
                 ((ma * ma + mb * mb + c1) * (sa + sb + c2));
      acc += v;
      ++count;
    }
  return acc / count;
}

}  // namespace ccodec
