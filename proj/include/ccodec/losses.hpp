#pragma once

#include <cmath>
#include <vector>

#include "ccodec/autograd.hpp"
#include "ccodec/models.hpp"

namespace ccodec {

struct LossWeights {
  double gan = 1.0;
  double rec = 10.0;
  double ssim = 0.25;
  double vgg = 0.2;
  double latent = 1.0;
  double kl = 0.01;
};

// Sum-reduced binary cross entropy; predictions clamped to [eps, 1-eps].
inline nn::Var bce_loss(nn::Graph& g, nn::Var pred, nn::Var target, double eps = 1e-7) {
  if (!pred->val.same_shape(target->val)) throw ArgumentError("bce_loss: shape mismatch");
  nn::Var p = nn::clamp_op(g, pred, eps, 1.0 - eps);
  nn::Var pos = nn::mul(g, target, nn::log_op(g, p));
  nn::Var one_minus_t = nn::add_scalar(g, nn::neg(g, target), 1.0);
  nn::Var one_minus_p = nn::add_scalar(g, nn::neg(g, p), 1.0);
  nn::Var negt = nn::mul(g, one_minus_t, nn::log_op(g, one_minus_p));
  return nn::neg(g, nn::sum_all(g, nn::add(g, pos, negt)));
}

inline nn::Var rec_loss(nn::Graph& g, nn::Var x, nn::Var xhat) {
  if (!x->val.same_shape(xhat->val)) throw ArgumentError("rec_loss: shape mismatch");
  return nn::mean_all(g, nn::abs_op(g, nn::sub(g, x, xhat)));
}

namespace detail {

inline nn::Tensor gaussian_window_11() {
  const int R = 5;
  const double sigma = 1.5;
  nn::Tensor w({1, 1, 11, 11});
  double sum = 0.0;
  for (int y = -R; y <= R; ++y)
    for (int x = -R; x <= R; ++x) {
      double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      w.v[static_cast<std::size_t>(y + R) * 11 + (x + R)] = v;
      sum += v;
    }
  for (double& v : w.v) v /= sum;
  return w;
}

inline nn::Var to_gray(nn::Graph& g, nn::Var x) {
  int C = x->val.dim(1);
  nn::Tensor w({1, C, 1, 1});
  for (double& v : w.v) v = 1.0 / C;
  return nn::conv2d(g, x, g.leaf(std::move(w)), nullptr, 1, 0);
}

}  // namespace detail

// Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
// dynamic range 1, computed on the channel-mean grayscale.
inline nn::Var ssim_op(nn::Graph& g, nn::Var x, nn::Var y) {
  if (!x->val.same_shape(y->val)) throw ArgumentError("ssim: shape mismatch");
  if (x->val.dim(2) < 11 || x->val.dim(3) < 11)
    throw ArgumentError("ssim: images smaller than the 11x11 window");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  nn::Var gx = detail::to_gray(g, x);
  nn::Var gy = detail::to_gray(g, y);
  nn::Var win = g.leaf(detail::gaussian_window_11());
  auto blur = [&](nn::Var t) { return nn::conv2d(g, t, win, nullptr, 1, 0); };

  nn::Var mx = blur(gx);
  nn::Var my = blur(gy);
  nn::Var mxx = nn::mul(g, mx, mx);
  nn::Var myy = nn::mul(g, my, my);
  nn::Var mxy = nn::mul(g, mx, my);
  nn::Var sx = nn::sub(g, blur(nn::mul(g, gx, gx)), mxx);
  nn::Var sy = nn::sub(g, blur(nn::mul(g, gy, gy)), myy);
  nn::Var sxy = nn::sub(g, blur(nn::mul(g, gx, gy)), mxy);

  nn::Var num = nn::mul(g, nn::add_scalar(g, nn::mul_scalar(g, mxy, 2.0), c1),
                        nn::add_scalar(g, nn::mul_scalar(g, sxy, 2.0), c2));
  nn::Var den = nn::mul(g, nn::add_scalar(g, nn::add(g, mxx, myy), c1),
                        nn::add_scalar(g, nn::add(g, sx, sy), c2));
  return nn::mean_all(g, nn::mul(g, num, nn::recip(g, den)));
}

inline nn::Var ssim_loss(nn::Graph& g, nn::Var x, nn::Var y) {
  return nn::add_scalar(g, nn::neg(g, ssim_op(g, x, y)), 1.0);
}

inline nn::Var perceptual_loss(nn::Graph& g, nn::Var x, nn::Var xhat, PerceptualNet& net) {
  auto fx = net.features(g, x);
  auto fy = net.features(g, xhat);
  nn::Var total = nullptr;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    nn::Var term = nn::mean_all(g, nn::abs_op(g, nn::sub(g, fx[i], fy[i])));
    total = total ? nn::add(g, total, term) : term;
  }
  return total;
}

// Least-squares GAN objectives; means taken per scale, averaged over scales.
inline nn::Var lsgan_d_loss(nn::Graph& g, const std::vector<nn::Var>& real_scores,
                            const std::vector<nn::Var>& fake_scores) {
  nn::Var total = nullptr;
  for (nn::Var r : real_scores) {
    nn::Var e = nn::add_scalar(g, r, -1.0);
    nn::Var term = nn::mean_all(g, nn::mul(g, e, e));
    total = total ? nn::add(g, total, term) : term;
  }
  for (nn::Var f : fake_scores) {
    nn::Var term = nn::mean_all(g, nn::mul(g, f, f));
    total = nn::add(g, total, term);
  }
  return nn::mul_scalar(g, total, 0.5 / static_cast<double>(real_scores.size()));
}

inline nn::Var lsgan_g_loss(nn::Graph& g, const std::vector<nn::Var>& fake_scores) {
  nn::Var total = nullptr;
  for (nn::Var f : fake_scores) {
    nn::Var e = nn::add_scalar(g, f, -1.0);
    nn::Var term = nn::mean_all(g, nn::mul(g, e, e));
    total = total ? nn::add(g, total, term) : term;
  }
  return nn::mul_scalar(g, total, 0.5 / static_cast<double>(fake_scores.size()));
}

// Batch-averaged KL(q(mu,sigma^2) || N(0,I)) in closed form.
inline nn::Var kl_loss(nn::Graph& g, nn::Var mu, nn::Var logvar) {
  if (!mu->val.same_shape(logvar->val)) throw ArgumentError("kl_loss: shape mismatch");
  int N = mu->val.dim(0);
  nn::Var t = nn::add(g, nn::mul(g, mu, mu), nn::exp_op(g, logvar));
  t = nn::add_scalar(g, nn::sub(g, t, logvar), -1.0);
  return nn::mul_scalar(g, nn::sum_all(g, t), 0.5 / static_cast<double>(N));
}

// L1 between the training latent and the posterior mean re-extracted from
// the reconstruction.
inline nn::Var latent_regression_loss(nn::Graph& g, nn::Var z, nn::Var xhat,
                                      TextureEncoderNet& encoder) {
  auto [mu_hat, logvar_hat] = encoder.forward(g, xhat);
  (void)logvar_hat;
  return nn::mean_all(g, nn::abs_op(g, nn::sub(g, z, mu_hat)));
}

struct LossTerms {
  nn::Var gan = nullptr;
  nn::Var rec = nullptr;
  nn::Var ssim = nullptr;
  nn::Var vgg = nullptr;
  nn::Var latent = nullptr;
  nn::Var kl = nullptr;
};

inline nn::Var total_loss(nn::Graph& g, const LossTerms& t, const LossWeights& w) {
  nn::Var total = nn::mul_scalar(g, t.gan, w.gan);
  total = nn::add(g, total, nn::mul_scalar(g, t.rec, w.rec));
  total = nn::add(g, total, nn::mul_scalar(g, t.vgg, w.vgg));
  total = nn::add(g, total, nn::mul_scalar(g, t.ssim, w.ssim));
  total = nn::add(g, total, nn::mul_scalar(g, t.kl, w.kl));
  total = nn::add(g, total, nn::mul_scalar(g, t.latent, w.latent));
  return total;
}

}  // namespace ccodec
