#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "ccodec/common.hpp"
#include "ccodec/tensor.hpp"

namespace ccodec::nn {

// Learnable parameter with Adam state.
struct Param {
  std::string name;
  Tensor val;
  Tensor grad;
  Tensor m, v2;  // Adam moments
  bool trainable = true;

  Param() = default;
  Param(std::string n, std::vector<int> shape) : name(std::move(n)), val(shape), grad(shape), m(shape), v2(shape) {}

  void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

struct Node;
using Var = Node*;

struct Node {
  Tensor val;
  Tensor grad;  // allocated lazily during backward
  bool needs_grad = false;
  std::function<void(Node&)> back;  // propagates this->grad into parents

  void ensure_grad() {
    if (grad.v.empty()) grad = Tensor(val.shape);
  }
};

// Tape of one forward pass; owns all nodes, backward runs in reverse
// creation order.
class Graph {
 public:
  bool grad_enabled = true;

  Var leaf(Tensor t, bool needs_grad = false) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = std::move(t);
    n.needs_grad = needs_grad && grad_enabled;
    return &n;
  }

  // Parameter leaf: backward accumulates into p.grad.
  Var use(Param& p) {
    Var n = leaf(p.val, p.trainable);
    if (n->needs_grad) {
      Param* pp = &p;
      n->back = [pp](Node& self) {
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) pp->grad.v[i] += self.grad.v[i];
      };
    }
    return n;
  }

  Var make(Tensor val, bool needs_grad, std::function<void(Node&)> back) {
    nodes_.emplace_back();
    Node& n = nodes_.back();
    n.val = std::move(val);
    n.needs_grad = needs_grad && grad_enabled;
    if (n.needs_grad) n.back = std::move(back);
    return &n;
  }

  void backward(Var loss) {
    if (loss->val.numel() != 1) throw ArgumentError("backward expects a scalar loss");
    loss->ensure_grad();
    loss->grad.v[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = *it;
      if (n.needs_grad && n.back && !n.grad.v.empty()) n.back(n);
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// Temporarily disables graph construction (inference / detached passes).
struct NoGrad {
  explicit NoGrad(Graph& g) : g_(g), prev_(g.grad_enabled) { g_.grad_enabled = false; }
  ~NoGrad() { g_.grad_enabled = prev_; }
  Graph& g_;
  bool prev_;
};

namespace detail {
inline void accum(Node* p, const Tensor& g) {
  if (!p->needs_grad) return;
  p->ensure_grad();
  for (std::size_t i = 0; i < g.v.size(); ++i) p->grad.v[i] += g.v[i];
}
}  // namespace detail

// ---- elementwise ----

inline Var add(Graph& g, Var a, Var b) {
  if (!a->val.same_shape(b->val)) throw ArgumentError("add: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
  return g.make(std::move(out), a->needs_grad || b->needs_grad, [a, b](Node& self) {
    detail::accum(a, self.grad);
    detail::accum(b, self.grad);
  });
}

inline Var sub(Graph& g, Var a, Var b) {
  if (!a->val.same_shape(b->val)) throw ArgumentError("sub: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->val.v[i];
  return g.make(std::move(out), a->needs_grad || b->needs_grad, [a, b](Node& self) {
    detail::accum(a, self.grad);
    if (b->needs_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.v.size(); ++i) b->grad.v[i] -= self.grad.v[i];
    }
  });
}

inline Var mul(Graph& g, Var a, Var b) {
  if (!a->val.same_shape(b->val)) throw ArgumentError("mul: shape mismatch");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
  return g.make(std::move(out), a->needs_grad || b->needs_grad, [a, b](Node& self) {
    if (a->needs_grad) {
      a->ensure_grad();
      for (std::size_t i = 0; i < self.grad.v.size(); ++i)
        a->grad.v[i] += self.grad.v[i] * b->val.v[i];
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (std::size_t i = 0; i < self.grad.v.size(); ++i)
        b->grad.v[i] += self.grad.v[i] * a->val.v[i];
    }
  });
}

inline Var mul_scalar(Graph& g, Var a, double s) {
  Tensor out = a->val;
  for (double& x : out.v) x *= s;
  return g.make(std::move(out), a->needs_grad, [a, s](Node& self) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i] * s;
  });
}

inline Var add_scalar(Graph& g, Var a, double s) {
  Tensor out = a->val;
  for (double& x : out.v) x += s;
  return g.make(std::move(out), a->needs_grad,
                [a](Node& self) { detail::accum(a, self.grad); });
}

inline Var neg(Graph& g, Var a) { return mul_scalar(g, a, -1.0); }

template <class F, class DF>
inline Var unary(Graph& g, Var a, F f, DF df) {
  Tensor out = a->val;
  for (double& x : out.v) x = f(x);
  return g.make(std::move(out), a->needs_grad, [a, df](Node& self) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (std::size_t i = 0; i < self.grad.v.size(); ++i)
      a->grad.v[i] += self.grad.v[i] * df(a->val.v[i], self.val.v[i]);
  });
}

inline Var relu(Graph& g, Var a) {
  return unary(g, a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline Var lrelu(Graph& g, Var a, double slope = 0.2) {
  return unary(g, a, [slope](double x) { return x > 0 ? x : slope * x; },
               [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

inline Var sigmoid(Graph& g, Var a) {
  return unary(g, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh_op(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

inline Var exp_op(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

inline Var log_op(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

inline Var sqrt_op(Graph& g, Var a) {
  // derivative guarded so sqrt(0) inputs do not poison the backward pass
  return unary(g, a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / std::max(y, 1e-12); });
}

inline Var recip(Graph& g, Var a) {
  return unary(g, a, [](double x) { return 1.0 / x; },
               [](double, double y) { return -y * y; });
}

inline Var abs_op(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

inline Var clamp_op(Graph& g, Var a, double lo, double hi) {
  return unary(g, a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---- reductions ----

inline Var sum_all(Graph& g, Var a) {
  Tensor out({1});
  double s = 0.0;
  for (double x : a->val.v) s += x;
  out.v[0] = s;
  return g.make(std::move(out), a->needs_grad, [a](Node& self) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    double gr = self.grad.v[0];
    for (double& x : a->grad.v) x += gr;
  });
}

inline Var mean_all(Graph& g, Var a) {
  std::size_t n = a->val.numel();
  return mul_scalar(g, sum_all(g, a), 1.0 / static_cast<double>(n));
}

// Mean over spatial positions: [N,C,H,W] -> [N,C].
inline Var spatial_mean(Graph& g, Var a) {
  const auto& s = a->val.shape;
  if (s.size() != 4) throw ArgumentError("spatial_mean expects NCHW");
  int N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor out({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* p = a->val.v.data() + (static_cast<std::size_t>(n) * C + c) * HW;
      double acc = 0.0;
      for (int i = 0; i < HW; ++i) acc += p[i];
      out.v[static_cast<std::size_t>(n) * C + c] = acc / HW;
    }
  return g.make(std::move(out), a->needs_grad, [a, N, C, HW](Node& self) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double gr = self.grad.v[static_cast<std::size_t>(n) * C + c] / HW;
        double* p = a->grad.v.data() + (static_cast<std::size_t>(n) * C + c) * HW;
        for (int i = 0; i < HW; ++i) p[i] += gr;
      }
  });
}

// ---- [N,C] broadcast over [N,C,H,W] ----

namespace detail {
enum class BcOp { Add, Sub, Mul };
}

inline Var broadcast_nc(Graph& g, Var x, Var v, detail::BcOp op) {
  const auto& s = x->val.shape;
  if (s.size() != 4 || v->val.shape.size() != 2 || v->val.dim(0) != s[0] ||
      v->val.dim(1) != s[1])
    throw ArgumentError("broadcast_nc: shape mismatch " + x->val.shape_str() + " vs " +
                        v->val.shape_str());
  int N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor out = x->val;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double b = v->val.v[static_cast<std::size_t>(n) * C + c];
      double* p = out.v.data() + (static_cast<std::size_t>(n) * C + c) * HW;
      switch (op) {
        case detail::BcOp::Add:
          for (int i = 0; i < HW; ++i) p[i] += b;
          break;
        case detail::BcOp::Sub:
          for (int i = 0; i < HW; ++i) p[i] -= b;
          break;
        case detail::BcOp::Mul:
          for (int i = 0; i < HW; ++i) p[i] *= b;
          break;
      }
    }
  return g.make(std::move(out), x->needs_grad || v->needs_grad, [x, v, N, C, HW, op](Node& self) {
    if (x->needs_grad) {
      x->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
          double b = v->val.v[static_cast<std::size_t>(n) * C + c];
          for (int i = 0; i < HW; ++i) {
            double gr = self.grad.v[base + i];
            x->grad.v[base + i] += op == detail::BcOp::Mul ? gr * b : gr;
          }
        }
    }
    if (v->needs_grad) {
      v->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          std::size_t base = (static_cast<std::size_t>(n) * C + c) * HW;
          double acc = 0.0;
          for (int i = 0; i < HW; ++i) {
            double gr = self.grad.v[base + i];
            acc += op == detail::BcOp::Mul ? gr * x->val.v[base + i] : gr;
          }
          if (op == detail::BcOp::Sub) acc = -acc;
          v->grad.v[static_cast<std::size_t>(n) * C + c] += acc;
        }
    }
  });
}

inline Var bc_add(Graph& g, Var x, Var v) { return broadcast_nc(g, x, v, detail::BcOp::Add); }
inline Var bc_sub(Graph& g, Var x, Var v) { return broadcast_nc(g, x, v, detail::BcOp::Sub); }
inline Var bc_mul(Graph& g, Var x, Var v) { return broadcast_nc(g, x, v, detail::BcOp::Mul); }

// ---- linear algebra ----

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// x: [N,I], w: [O,I], b: [O] (optional) -> [N,O]
inline Var linear(Graph& g, Var x, Var w, Var b) {
  int N = x->val.dim(0), I = x->val.dim(1), O = w->val.dim(0);
  if (w->val.dim(1) != I) throw ArgumentError("linear: weight/input mismatch");
  Tensor out({N, O});
  {
    CMapMat X(x->val.v.data(), N, I), W(w->val.v.data(), O, I);
    MapMat Y(out.v.data(), N, O);
    Y.noalias() = X * W.transpose();
    if (b) {
      if (b->val.numel() != static_cast<std::size_t>(O))
        throw ArgumentError("linear: bias size mismatch");
      Eigen::Map<const Eigen::RowVectorXd> B(b->val.v.data(), O);
      Y.rowwise() += B;
    }
  }
  bool ng = x->needs_grad || w->needs_grad || (b && b->needs_grad);
  return g.make(std::move(out), ng, [x, w, b, N, I, O](Node& self) {
    CMapMat G(self.grad.v.data(), N, O);
    if (x->needs_grad) {
      x->ensure_grad();
      MapMat GX(x->grad.v.data(), N, I);
      CMapMat W(w->val.v.data(), O, I);
      GX.noalias() += G * W;
    }
    if (w->needs_grad) {
      w->ensure_grad();
      MapMat GW(w->grad.v.data(), O, I);
      CMapMat X(x->val.v.data(), N, I);
      GW.noalias() += G.transpose() * X;
    }
    if (b && b->needs_grad) {
      b->ensure_grad();
      Eigen::Map<Eigen::RowVectorXd> GB(b->grad.v.data(), O);
      GB += G.colwise().sum();
    }
  });
}

namespace detail {

// im2col: [C,H,W] sample -> [C*kh*kw, oh*ow]
inline void im2col(const double* src, int C, int H, int W, int kh, int kw, int stride,
                   int pad, int oh, int ow, double* dst) {
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* row = dst + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) *
                                (static_cast<std::size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y) {
          int sy = y * stride + ky - pad;
          for (int x = 0; x < ow; ++x) {
            int sx = x * stride + kx - pad;
            row[static_cast<std::size_t>(y) * ow + x] =
                (sy >= 0 && sy < H && sx >= 0 && sx < W)
                    ? src[(static_cast<std::size_t>(c) * H + sy) * W + sx]
                    : 0.0;
          }
        }
      }
}

inline void col2im_add(const double* col, int C, int H, int W, int kh, int kw, int stride,
                       int pad, int oh, int ow, double* dst) {
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* row = col + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) *
                                      (static_cast<std::size_t>(oh) * ow);
        for (int y = 0; y < oh; ++y) {
          int sy = y * stride + ky - pad;
          if (sy < 0 || sy >= H) continue;
          for (int x = 0; x < ow; ++x) {
            int sx = x * stride + kx - pad;
            if (sx < 0 || sx >= W) continue;
            dst[(static_cast<std::size_t>(c) * H + sy) * W + sx] +=
                row[static_cast<std::size_t>(y) * ow + x];
          }
        }
      }
}

}  // namespace detail

// x: [N,C,H,W], w: [O,C,kh,kw], b: [O] or nullptr.
inline Var conv2d(Graph& g, Var x, Var w, Var b, int stride = 1, int pad = 1) {
  const auto& xs = x->val.shape;
  const auto& ws = w->val.shape;
  if (xs.size() != 4 || ws.size() != 4) throw ArgumentError("conv2d expects 4-D tensors");
  int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int O = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != C)
    throw ArgumentError("conv2d: channel mismatch, input " + x->val.shape_str() +
                        " weight " + w->val.shape_str());
  int oh = (H + 2 * pad - kh) / stride + 1;
  int ow = (W + 2 * pad - kw) / stride + 1;
  if (oh <= 0 || ow <= 0) throw ArgumentError("conv2d: empty output");
  int K = C * kh * kw, P = oh * ow;

  Tensor out({N, O, oh, ow});
  std::vector<double> col(static_cast<std::size_t>(K) * P);
  for (int n = 0; n < N; ++n) {
    detail::im2col(x->val.v.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh,
                   kw, stride, pad, oh, ow, col.data());
    CMapMat Wm(w->val.v.data(), O, K);
    CMapMat Cm(col.data(), K, P);
    MapMat Ym(out.v.data() + static_cast<std::size_t>(n) * O * P, O, P);
    Ym.noalias() = Wm * Cm;
    if (b) {
      Eigen::Map<const Eigen::VectorXd> B(b->val.v.data(), O);
      Ym.colwise() += B;
    }
  }

  bool ng = x->needs_grad || w->needs_grad || (b && b->needs_grad);
  return g.make(std::move(out), ng,
                [x, w, b, N, C, H, W, O, kh, kw, stride, pad, oh, ow, K, P](Node& self) {
    std::vector<double> col(static_cast<std::size_t>(K) * P);
    std::vector<double> gcol(static_cast<std::size_t>(K) * P);
    if (x->needs_grad) x->ensure_grad();
    if (w->needs_grad) w->ensure_grad();
    if (b && b->needs_grad) b->ensure_grad();
    for (int n = 0; n < N; ++n) {
      CMapMat Gm(self.grad.v.data() + static_cast<std::size_t>(n) * O * P, O, P);
      if (w->needs_grad) {
        detail::im2col(x->val.v.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W,
                       kh, kw, stride, pad, oh, ow, col.data());
        MapMat GW(w->grad.v.data(), O, K);
        CMapMat Cm(col.data(), K, P);
        GW.noalias() += Gm * Cm.transpose();
      }
      if (x->needs_grad) {
        CMapMat Wm(w->val.v.data(), O, K);
        MapMat GC(gcol.data(), K, P);
        GC.noalias() = Wm.transpose() * Gm;
        detail::col2im_add(gcol.data(), C, H, W, kh, kw, stride, pad, oh, ow,
                           x->grad.v.data() + static_cast<std::size_t>(n) * C * H * W);
      }
      if (b && b->needs_grad) {
        Eigen::Map<Eigen::VectorXd> GB(b->grad.v.data(), O);
        GB += Gm.rowwise().sum();
      }
    }
  });
}

// ---- spatial rearrangement ----

inline Var avg_pool(Graph& g, Var x, int k) {
  const auto& s = x->val.shape;
  if (s.size() != 4 || s[2] % k != 0 || s[3] % k != 0)
    throw ArgumentError("avg_pool: dims must divide kernel");
  int N = s[0], C = s[1], H = s[2], W = s[3], oh = H / k, ow = W / k;
  Tensor out({N, C, oh, ow});
  double inv = 1.0 / (k * k);
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = x->val.v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.v.data() + static_cast<std::size_t>(nc) * oh * ow;
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo) {
        double acc = 0.0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx)
            acc += src[static_cast<std::size_t>(y * k + dy) * W + xo * k + dx];
        dst[static_cast<std::size_t>(y) * ow + xo] = acc * inv;
      }
  }
  return g.make(std::move(out), x->needs_grad, [x, N, C, H, W, oh, ow, k, inv](Node& self) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      double* dst = x->grad.v.data() + static_cast<std::size_t>(nc) * H * W;
      const double* src = self.grad.v.data() + static_cast<std::size_t>(nc) * oh * ow;
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo) {
          double gr = src[static_cast<std::size_t>(y) * ow + xo] * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx)
              dst[static_cast<std::size_t>(y * k + dy) * W + xo * k + dx] += gr;
        }
    }
  });
}

inline Var global_avg_pool(Graph& g, Var x) { return spatial_mean(g, x); }

inline Var upsample_nearest2(Graph& g, Var x) {
  const auto& s = x->val.shape;
  if (s.size() != 4) throw ArgumentError("upsample_nearest2 expects NCHW");
  int N = s[0], C = s[1], H = s[2], W = s[3];
  Tensor out({N, C, 2 * H, 2 * W});
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = x->val.v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.v.data() + static_cast<std::size_t>(nc) * 4 * H * W;
    for (int y = 0; y < 2 * H; ++y)
      for (int xo = 0; xo < 2 * W; ++xo)
        dst[static_cast<std::size_t>(y) * 2 * W + xo] =
            src[static_cast<std::size_t>(y / 2) * W + xo / 2];
  }
  return g.make(std::move(out), x->needs_grad, [x, N, C, H, W](Node& self) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      double* dst = x->grad.v.data() + static_cast<std::size_t>(nc) * H * W;
      const double* src = self.grad.v.data() + static_cast<std::size_t>(nc) * 4 * H * W;
      for (int y = 0; y < 2 * H; ++y)
        for (int xo = 0; xo < 2 * W; ++xo)
          dst[static_cast<std::size_t>(y / 2) * W + xo / 2] +=
              src[static_cast<std::size_t>(y) * 2 * W + xo];
    }
  });
}

// Bilinear 2x upsampling, half-pixel center alignment.
inline Var upsample_bilinear2(Graph& g, Var x) {
  const auto& s = x->val.shape;
  if (s.size() != 4) throw ArgumentError("upsample_bilinear2 expects NCHW");
  int N = s[0], C = s[1], H = s[2], W = s[3];
  int OH = 2 * H, OW = 2 * W;
  // Precompute 1-D taps: src = (dst+0.5)/2 - 0.5 clamped.
  auto taps = [](int out_len, int in_len) {
    std::vector<std::tuple<int, int, double>> t(out_len);  // (i0, i1, w1)
    for (int i = 0; i < out_len; ++i) {
      double sp = (i + 0.5) / 2.0 - 0.5;
      sp = std::clamp(sp, 0.0, static_cast<double>(in_len - 1));
      int i0 = static_cast<int>(std::floor(sp));
      int i1 = std::min(i0 + 1, in_len - 1);
      t[i] = {i0, i1, sp - i0};
    }
    return t;
  };
  auto ty = taps(OH, H), tx = taps(OW, W);
  Tensor out({N, C, OH, OW});
  for (int nc = 0; nc < N * C; ++nc) {
    const double* src = x->val.v.data() + static_cast<std::size_t>(nc) * H * W;
    double* dst = out.v.data() + static_cast<std::size_t>(nc) * OH * OW;
    for (int y = 0; y < OH; ++y) {
      auto [y0, y1, wy] = ty[y];
      for (int xo = 0; xo < OW; ++xo) {
        auto [x0, x1, wx] = tx[xo];
        double v = (1 - wy) * ((1 - wx) * src[static_cast<std::size_t>(y0) * W + x0] +
                               wx * src[static_cast<std::size_t>(y0) * W + x1]) +
                   wy * ((1 - wx) * src[static_cast<std::size_t>(y1) * W + x0] +
                         wx * src[static_cast<std::size_t>(y1) * W + x1]);
        dst[static_cast<std::size_t>(y) * OW + xo] = v;
      }
    }
  }
  return g.make(std::move(out), x->needs_grad, [x, N, C, H, W, OH, OW, ty, tx](Node& self) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int nc = 0; nc < N * C; ++nc) {
      double* dst = x->grad.v.data() + static_cast<std::size_t>(nc) * H * W;
      const double* src = self.grad.v.data() + static_cast<std::size_t>(nc) * OH * OW;
      for (int y = 0; y < OH; ++y) {
        auto [y0, y1, wy] = ty[y];
        for (int xo = 0; xo < OW; ++xo) {
          auto [x0, x1, wx] = tx[xo];
          double gr = src[static_cast<std::size_t>(y) * OW + xo];
          dst[static_cast<std::size_t>(y0) * W + x0] += (1 - wy) * (1 - wx) * gr;
          dst[static_cast<std::size_t>(y0) * W + x1] += (1 - wy) * wx * gr;
          dst[static_cast<std::size_t>(y1) * W + x0] += wy * (1 - wx) * gr;
          dst[static_cast<std::size_t>(y1) * W + x1] += wy * wx * gr;
        }
      }
    }
  });
}

// [N, C*r*r, H, W] -> [N, C, H*r, W*r]
inline Var pixel_shuffle(Graph& g, Var x, int r) {
  const auto& s = x->val.shape;
  if (s.size() != 4 || s[1] % (r * r) != 0)
    throw ArgumentError("pixel_shuffle: channels must divide r^2");
  int N = s[0], C = s[1] / (r * r), H = s[2], W = s[3];
  Tensor out({N, C, H * r, W * r});
  auto src_index = [C, H, W, r](int n, int c, int oy, int ox) {
    int cy = oy % r, cx = ox % r;
    int ic = (c * r + cy) * r + cx;
    return ((static_cast<std::size_t>(n) * (C * r * r) + ic) * H + oy / r) * W + ox / r;
  };
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oy = 0; oy < H * r; ++oy)
        for (int ox = 0; ox < W * r; ++ox)
          out.v[((static_cast<std::size_t>(n) * C + c) * (H * r) + oy) * (W * r) + ox] =
              x->val.v[src_index(n, c, oy, ox)];
  return g.make(std::move(out), x->needs_grad, [x, N, C, H, W, r, src_index](Node& self) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int oy = 0; oy < H * r; ++oy)
          for (int ox = 0; ox < W * r; ++ox)
            x->grad.v[src_index(n, c, oy, ox)] +=
                self.grad.v[((static_cast<std::size_t>(n) * C + c) * (H * r) + oy) * (W * r) + ox];
  });
}

inline Var concat_channels(Graph& g, Var a, Var b) {
  const auto& sa = a->val.shape;
  const auto& sb = b->val.shape;
  if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
    throw ArgumentError("concat_channels: incompatible shapes " + a->val.shape_str() +
                        " vs " + b->val.shape_str());
  int N = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
  Tensor out({N, Ca + Cb, sa[2], sa[3]});
  for (int n = 0; n < N; ++n) {
    std::copy_n(a->val.v.data() + static_cast<std::size_t>(n) * Ca * HW, Ca * HW,
                out.v.data() + static_cast<std::size_t>(n) * (Ca + Cb) * HW);
    std::copy_n(b->val.v.data() + static_cast<std::size_t>(n) * Cb * HW, Cb * HW,
                out.v.data() + static_cast<std::size_t>(n) * (Ca + Cb) * HW + Ca * HW);
  }
  return g.make(std::move(out), a->needs_grad || b->needs_grad, [a, b, N, Ca, Cb, HW](Node& self) {
    if (a->needs_grad) {
      a->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < Ca * HW; ++i)
          a->grad.v[static_cast<std::size_t>(n) * Ca * HW + i] +=
              self.grad.v[static_cast<std::size_t>(n) * (Ca + Cb) * HW + i];
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int i = 0; i < Cb * HW; ++i)
          b->grad.v[static_cast<std::size_t>(n) * Cb * HW + i] +=
              self.grad.v[static_cast<std::size_t>(n) * (Ca + Cb) * HW + Ca * HW + i];
    }
  });
}

// Column slice of a [N,M] tensor.
inline Var slice_cols(Graph& g, Var x, int start, int len) {
  if (x->val.shape.size() != 2) throw ArgumentError("slice_cols expects [N,M]");
  int N = x->val.dim(0), M = x->val.dim(1);
  if (start < 0 || start + len > M) throw ArgumentError("slice_cols: out of range");
  Tensor out({N, len});
  for (int n = 0; n < N; ++n)
    std::copy_n(x->val.v.data() + static_cast<std::size_t>(n) * M + start, len,
                out.v.data() + static_cast<std::size_t>(n) * len);
  return g.make(std::move(out), x->needs_grad, [x, N, M, start, len](Node& self) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < len; ++i)
        x->grad.v[static_cast<std::size_t>(n) * M + start + i] +=
            self.grad.v[static_cast<std::size_t>(n) * len + i];
  });
}

// Detached copy (no gradient flow).
inline Var detach(Graph& g, Var a) { return g.leaf(a->val, false); }

// Adaptive instance normalization (alpha * (x - mu) / (sigma + eps) + beta),
// per-channel moments over spatial positions; alpha/beta are [N,C].
inline Var adain(Graph& g, Var x, Var alpha, Var beta, double eps = 1e-8) {
  if (x->val.shape.size() != 4) throw ArgumentError("adain expects NCHW input");
  if (alpha->val.shape != std::vector<int>{x->val.dim(0), x->val.dim(1)} ||
      beta->val.shape != alpha->val.shape)
    throw ArgumentError("adain: affine parameter channel mismatch");
  Var mu = spatial_mean(g, x);
  Var centered = bc_sub(g, x, mu);
  Var var = spatial_mean(g, mul(g, centered, centered));
  Var sigma = sqrt_op(g, var);
  Var scale = mul(g, alpha, recip(g, add_scalar(g, sigma, eps)));
  return bc_add(g, bc_mul(g, centered, scale), beta);
}

}  // namespace ccodec::nn
