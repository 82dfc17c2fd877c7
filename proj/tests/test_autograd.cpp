#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "ccodec/autograd.hpp"
#include "ccodec/nn.hpp"

using namespace ccodec;

namespace {

using BuildFn = std::function<nn::Var(nn::Graph&, const std::vector<nn::Var>&)>;

// Central finite differences against the tape gradient for every input
// tensor; rel tolerance 1e-2, step 1e-4.
void check_grads(std::vector<nn::Tensor> inputs, const BuildFn& build, double h = 1e-4,
                 double tol = 1e-2) {
  auto eval = [&](const std::vector<nn::Tensor>& ins) {
    nn::Graph g;
    g.grad_enabled = false;
    std::vector<nn::Var> vars;
    for (const auto& t : ins) vars.push_back(g.leaf(t));
    return build(g, vars)->val.v[0];
  };

  nn::Graph g;
  std::vector<nn::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t, true));
  nn::Var loss = build(g, vars);
  ASSERT_EQ(loss->val.numel(), 1u);
  g.backward(loss);

  for (std::size_t vi = 0; vi < inputs.size(); ++vi) {
    ASSERT_FALSE(vars[vi]->grad.v.empty()) << "input " << vi << " received no gradient";
    for (std::size_t i = 0; i < inputs[vi].v.size(); ++i) {
      std::vector<nn::Tensor> plus = inputs, minus = inputs;
      plus[vi].v[i] += h;
      minus[vi].v[i] -= h;
      double fd = (eval(plus) - eval(minus)) / (2 * h);
      double an = vars[vi]->grad.v[i];
      double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      ASSERT_LE(std::abs(fd - an) / denom, tol)
          << "input " << vi << " elem " << i << ": fd " << fd << " analytic " << an;
    }
  }
}

nn::Tensor rand_tensor(std::vector<int> shape, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST(Autograd, ElementwiseChain) {
  nn::Rng rng(31);
  check_grads({rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var t = nn::mul(g, nn::add(g, v[0], v[1]), nn::sub(g, v[0], v[1]));
                return nn::sum_all(g, nn::tanh_op(g, t));
              });
}

TEST(Autograd, UnaryOps) {
  nn::Rng rng(32);
  // positive inputs away from kinks/singularities
  check_grads({rand_tensor({3, 3}, rng, 0.3, 1.5)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var a = nn::log_op(g, v[0]);
                a = nn::add(g, a, nn::sqrt_op(g, v[0]));
                a = nn::add(g, a, nn::recip(g, v[0]));
                a = nn::add(g, a, nn::exp_op(g, v[0]));
                a = nn::add(g, a, nn::sigmoid(g, v[0]));
                return nn::mean_all(g, a);
              });
  // lrelu/relu/abs with inputs pushed off zero
  nn::Tensor t = rand_tensor({4, 4}, rng);
  for (double& x : t.v) x += x >= 0 ? 0.2 : -0.2;
  check_grads({t}, [](nn::Graph& g, const std::vector<nn::Var>& v) {
    nn::Var a = nn::lrelu(g, v[0]);
    a = nn::add(g, a, nn::relu(g, v[0]));
    a = nn::add(g, a, nn::abs_op(g, v[0]));
    return nn::sum_all(g, a);
  });
}

TEST(Autograd, ClampInterior) {
  nn::Rng rng(33);
  check_grads({rand_tensor({2, 5}, rng, -0.4, 0.4)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::sum_all(g, nn::clamp_op(g, v[0], -0.5, 0.5));
              });
}

TEST(Autograd, Linear) {
  nn::Rng rng(34);
  check_grads({rand_tensor({2, 3}, rng), rand_tensor({4, 3}, rng), rand_tensor({4}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::mean_all(g, nn::tanh_op(g, nn::linear(g, v[0], v[1], v[2])));
              });
}

TEST(Autograd, Conv2dStride1) {
  nn::Rng rng(35);
  check_grads({rand_tensor({2, 2, 4, 4}, rng), rand_tensor({3, 2, 3, 3}, rng),
               rand_tensor({3}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::mean_all(g, nn::conv2d(g, v[0], v[1], v[2], 1, 1));
              });
}

TEST(Autograd, Conv2dStride2) {
  nn::Rng rng(36);
  check_grads({rand_tensor({1, 2, 4, 4}, rng), rand_tensor({2, 2, 3, 3}, rng),
               rand_tensor({2}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::sum_all(g, nn::conv2d(g, v[0], v[1], v[2], 2, 1));
              });
}

TEST(Autograd, SpatialOps) {
  nn::Rng rng(37);
  check_grads({rand_tensor({1, 2, 4, 4}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var a = nn::avg_pool(g, v[0], 2);
                a = nn::upsample_nearest2(g, a);
                a = nn::upsample_bilinear2(g, a);
                return nn::mean_all(g, nn::mul(g, a, a));
              });
  check_grads({rand_tensor({1, 8, 2, 2}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var a = nn::pixel_shuffle(g, v[0], 2);
                return nn::sum_all(g, nn::mul(g, a, a));
              });
}

TEST(Autograd, ConcatSliceBroadcast) {
  nn::Rng rng(38);
  check_grads({rand_tensor({2, 1, 3, 3}, rng), rand_tensor({2, 2, 3, 3}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::mean_all(g, nn::concat_channels(g, v[0], v[1]));
              });
  check_grads({rand_tensor({2, 6}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var a = nn::slice_cols(g, v[0], 1, 3);
                return nn::sum_all(g, nn::mul(g, a, a));
              });
  check_grads({rand_tensor({2, 3, 2, 2}, rng), rand_tensor({2, 3}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                nn::Var a = nn::bc_mul(g, v[0], v[1]);
                a = nn::bc_add(g, a, v[1]);
                a = nn::bc_sub(g, a, v[1]);
                return nn::mean_all(g, nn::mul(g, a, a));
              });
}

TEST(Autograd, Adain) {
  nn::Rng rng(39);
  check_grads({rand_tensor({2, 2, 3, 3}, rng), rand_tensor({2, 2}, rng, 0.5, 1.5),
               rand_tensor({2, 2}, rng)},
              [](nn::Graph& g, const std::vector<nn::Var>& v) {
                return nn::mean_all(
                    g, nn::mul(g, nn::adain(g, v[0], v[1], v[2]), nn::adain(g, v[0], v[1], v[2])));
              },
              1e-4, 2e-2);
}

TEST(Autograd, DetachAndNoGrad) {
  nn::Graph g;
  nn::Var x = g.leaf(nn::Tensor({2, 2}, 1.0), true);
  nn::Var d = nn::detach(g, x);
  nn::Var loss = nn::sum_all(g, nn::add(g, x, d));
  g.backward(loss);
  for (double v : x->grad.v) EXPECT_DOUBLE_EQ(v, 1.0);  // only the direct path

  nn::Graph g2;
  {
    nn::NoGrad ng(g2);
    nn::Var y = g2.leaf(nn::Tensor({2}, 1.0), true);
    EXPECT_FALSE(y->needs_grad);
  }
  EXPECT_TRUE(g2.grad_enabled);
}

TEST(Autograd, ParamAccumulation) {
  nn::Param p("p", {3});
  p.val.v = {1.0, 2.0, 3.0};
  nn::Graph g;
  nn::Var a = g.use(p);
  nn::Var b = g.use(p);  // parameter used twice: gradients add
  nn::Var loss = nn::sum_all(g, nn::mul(g, a, b));
  g.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p.grad.v[i], 2.0 * p.val.v[i]);
}

TEST(Adam, ConvergesOnQuadratic) {
  nn::Param p("q", {2});
  p.val.v = {5.0, -3.0};
  nn::Adam opt;
  opt.lr = 0.1;
  for (int i = 0; i < 500; ++i) {
    p.zero_grad();
    for (std::size_t j = 0; j < 2; ++j) p.grad.v[j] = 2.0 * p.val.v[j];
    opt.step({&p});
  }
  EXPECT_NEAR(p.val.v[0], 0.0, 1e-3);
  EXPECT_NEAR(p.val.v[1], 0.0, 1e-3);
}

TEST(Adam, GlobalNormClipScalesUpdates) {
  nn::Param a("a", {1}), b("b", {1});
  a.grad.v = {30.0};
  b.grad.v = {40.0};  // norm 50 > clip 10
  nn::Adam opt;
  opt.clip_norm = 10.0;
  opt.step({&a, &b});
  // after clipping, first-step Adam update magnitude is lr * g/|g| direction
  EXPECT_LT(a.val.v[0], 0.0);
  EXPECT_LT(b.val.v[0], 0.0);
}

TEST(Checkpoint, BitwiseRoundtrip) {
  nn::Rng rng(41);
  nn::Conv2d conv("t.conv", 2, 3, 3, 1, 1, rng);
  nn::Linear lin("t.lin", 4, 5, rng);
  std::vector<nn::Param*> params;
  conv.collect(params);
  lin.collect(params);
  std::string path = (std::filesystem::temp_directory_path() / "cc_ckpt_test.bin").string();
  nn::save_checkpoint(path, "TST1", {{"note", "x"}}, params);

  nn::Rng rng2(99);
  nn::Conv2d conv2("t.conv", 2, 3, 3, 1, 1, rng2);
  nn::Linear lin2("t.lin", 4, 5, rng2);
  std::vector<nn::Param*> params2;
  conv2.collect(params2);
  lin2.collect(params2);
  nn::load_checkpoint(path, "TST1", params2);
  for (std::size_t i = 0; i < params.size(); ++i)
    EXPECT_EQ(params[i]->val.v, params2[i]->val.v) << params[i]->name;

  nn::Meta meta = nn::read_checkpoint_meta(path, "TST1");
  EXPECT_EQ(meta.at("note"), "x");
  EXPECT_THROW(nn::load_checkpoint(path, "BAD1", params2), FormatError);
  params2.pop_back();
  EXPECT_THROW(nn::load_checkpoint(path, "TST1", params2), FormatError);
}

TEST(Rng, DeterministicStreams) {
  nn::Rng a(7), b(7), c(8);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  bool differs = false;
  nn::Rng a2(7);
  for (int i = 0; i < 100; ++i) differs |= a2.next_u64() != c.next_u64();
  EXPECT_TRUE(differs);
}

TEST(Rng, NormalMoments) {
  nn::Rng rng(42);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
