#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ccodec/models.hpp"

using namespace ccodec;

namespace {
std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

GeneratorConfig small_cfg(int k) {
  GeneratorConfig c;
  c.k = k;
  c.d = 8;
  c.channels.assign(static_cast<std::size_t>(k + 1), 6);
  return c;
}
}  // namespace

TEST(Adain, TwoPixelContract) {
  // channel {1,3}: mean 2, std 1; alpha=2, beta=5 -> {3,7}
  nn::Graph g;
  nn::Tensor x({1, 1, 1, 2});
  x.v = {1.0, 3.0};
  nn::Var out = nn::adain(g, g.leaf(x), g.leaf(nn::Tensor({1, 1}, 2.0)),
                          g.leaf(nn::Tensor({1, 1}, 5.0)), Generator::kAdainEps);
  EXPECT_NEAR(out->val.v[0], 3.0, 1e-4);
  EXPECT_NEAR(out->val.v[1], 7.0, 1e-4);
}

TEST(Adain, PostNormalizationMoments) {
  nn::Rng rng(61);
  const int N = 2, C = 3, H = 8, W = 8;
  nn::Tensor x({N, C, H, W});
  for (double& v : x.v) v = rng.uniform(-2.0, 2.0);
  nn::Tensor alpha({N, C}), beta({N, C});
  for (double& v : alpha.v) v = rng.uniform(0.5, 2.0);
  for (double& v : beta.v) v = rng.uniform(-1.0, 1.0);

  nn::Graph g;
  nn::Var out = nn::adain(g, g.leaf(x), g.leaf(alpha), g.leaf(beta), Generator::kAdainEps);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      double mean = 0, sq = 0;
      const double* p = out->val.v.data() + (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int i = 0; i < H * W; ++i) mean += p[i];
      mean /= H * W;
      for (int i = 0; i < H * W; ++i) sq += (p[i] - mean) * (p[i] - mean);
      double std_dev = std::sqrt(sq / (H * W));
      std::size_t nc = static_cast<std::size_t>(n) * C + c;
      EXPECT_NEAR(mean, beta.v[nc], 1e-4);
      EXPECT_NEAR(std_dev, std::abs(alpha.v[nc]), 1e-3);
    }
}

TEST(Adain, ConstantChannelReturnsBeta) {
  nn::Graph g;
  nn::Var out = nn::adain(g, g.leaf(nn::Tensor({1, 2, 4, 4}, 0.7)),
                          g.leaf(nn::Tensor({1, 2}, 3.0)), g.leaf(nn::Tensor({1, 2}, -1.5)),
                          Generator::kAdainEps);
  for (double v : out->val.v) EXPECT_NEAR(v, -1.5, 1e-6);
}

TEST(Generator, ShapeLawAcrossK) {
  for (int k : {3, 4, 5, 7}) {
    nn::Rng rng(62);
    Generator gen(small_cfg(k), rng);
    int R = 1 << (k + 1);
    EXPECT_EQ(gen.cfg.resolution(), R);
    nn::Graph g;
    nn::NoGrad ng(g);
    nn::Var z = g.leaf(nn::Tensor({1, 8}, 0.1));
    nn::Var s = g.leaf(nn::Tensor({1, 1, R, R}, 0.0));
    nn::Var out = gen.forward(g, z, s);
    EXPECT_EQ(out->val.shape, (std::vector<int>{1, 3, R, R})) << "k=" << k;
    for (double v : out->val.v) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Generator, ZeroedUpperBandsReproduceUpsampledBase) {
  nn::Rng rng(63);
  Generator gen(small_cfg(4), rng);
  // zero every to_rgb head above level 0: x_k must equal repeated 2x
  // bilinear upsampling of x_0
  for (std::size_t i = 1; i < gen.to_rgb.size(); ++i) {
    std::fill(gen.to_rgb[i].w.val.v.begin(), gen.to_rgb[i].w.val.v.end(), 0.0);
    std::fill(gen.to_rgb[i].b.val.v.begin(), gen.to_rgb[i].b.val.v.end(), 0.0);
  }
  int R = gen.cfg.resolution();
  nn::Graph g;
  nn::NoGrad ng(g);
  nn::Tensor st({1, 1, R, R});
  for (double& v : st.v) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
  nn::Tensor zt({1, 8});
  for (double& v : zt.v) v = rng.normal();
  auto xs = gen.forward_pyramid(g, g.leaf(zt), g.leaf(st));
  nn::Var expect = xs[0];
  for (int i = 0; i < gen.cfg.k; ++i) expect = nn::upsample_bilinear2(g, expect);
  ASSERT_EQ(xs.back()->val.shape, expect->val.shape);
  for (std::size_t i = 0; i < expect->val.v.size(); ++i)
    ASSERT_NEAR(xs.back()->val.v[i], expect->val.v[i], 1e-12);
}

TEST(Generator, DeterministicForFixedSeedAndInputs) {
  auto run = [] {
    nn::Rng rng(64);
    Generator gen(small_cfg(3), rng);
    int R = gen.cfg.resolution();
    StructuralMap s(R, R);
    for (int x = 0; x < R; ++x) s.at(R / 2, x) = 1;
    std::vector<double> z(8, 0.3);
    return generate(gen, z, s);
  };
  Image a = run(), b = run();
  EXPECT_EQ(a.pixels, b.pixels);
}

TEST(Generator, LatentActuallyModulatesOutput) {
  nn::Rng rng(65);
  Generator gen(small_cfg(3), rng);
  int R = gen.cfg.resolution();
  StructuralMap s(R, R);
  std::vector<double> z1(8, 0.5), z2(8, -0.5);
  Image a = generate(gen, z1, s), b = generate(gen, z2, s);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.pixels[i] - b.pixels[i]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Generator, InputValidation) {
  nn::Rng rng(66);
  Generator gen(small_cfg(3), rng);
  StructuralMap wrong(8, 8);  // needs 16x16
  EXPECT_THROW(generate(gen, std::vector<double>(8, 0.0), wrong), ArgumentError);
  StructuralMap right(16, 16);
  EXPECT_THROW(generate(gen, std::vector<double>(5, 0.0), right), ArgumentError);
  GeneratorConfig bad;
  bad.k = 3;
  bad.channels = {4, 4};  // needs k+1 entries
  EXPECT_THROW(Generator(bad, rng), ArgumentError);
}

TEST(Generator, CheckpointRoundtripBitwise) {
  nn::Rng rng(67);
  Generator gen(small_cfg(3), rng);
  std::string path = tmp_path("cc_gen.ckpt");
  gen.save(path);
  Generator back = Generator::from_checkpoint(path);
  EXPECT_EQ(back.cfg.k, gen.cfg.k);
  EXPECT_EQ(back.cfg.d, gen.cfg.d);
  EXPECT_EQ(back.cfg.channels, gen.cfg.channels);
  auto pa = gen.params();
  auto pb = back.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->val.v, pb[i]->val.v);
}

TEST(Encoder, ShapesAndClampedLogvar) {
  nn::Rng rng(68);
  TextureEncoderNet enc(16, {8, 8, 12}, rng);
  nn::Graph g;
  nn::NoGrad ng(g);
  nn::Tensor x({2, 3, 16, 16});
  for (double& v : x.v) v = rng.uniform();
  auto [mu, logvar] = enc.forward(g, g.leaf(x));
  EXPECT_EQ(mu->val.shape, (std::vector<int>{2, 16}));
  EXPECT_EQ(logvar->val.shape, (std::vector<int>{2, 16}));
  for (double v : logvar->val.v) {
    EXPECT_GE(v, -TextureEncoderNet::kLogvarClamp);
    EXPECT_LE(v, TextureEncoderNet::kLogvarClamp);
  }
}

TEST(Encoder, CheckpointRoundtripPreservesPosterior) {
  nn::Rng rng(69);
  TextureEncoderNet enc(8, {6, 8, 8}, rng);
  Image img(32, 32, 3);
  for (double& v : img.pixels) v = rng.uniform();
  PosteriorGaussian before = encode_texture(enc, img);
  std::string path = tmp_path("cc_enc.ckpt");
  enc.save(path);
  TextureEncoderNet back = TextureEncoderNet::from_checkpoint(path);
  PosteriorGaussian after = encode_texture(back, img);
  EXPECT_EQ(before.mu, after.mu);
  EXPECT_EQ(before.logvar, after.logvar);
}

TEST(Encoder, SampleLatentReparameterization) {
  PosteriorGaussian post;
  post.mu = {1.0, -2.0};
  post.logvar = {0.0, 2.0 * std::log(3.0)};
  std::vector<double> z = sample_latent(post, {0.5, -1.0});
  EXPECT_DOUBLE_EQ(z[0], 1.5);
  EXPECT_NEAR(z[1], -2.0 - 3.0, 1e-12);
  EXPECT_THROW(sample_latent(post, {0.1}), ArgumentError);
}

TEST(Discriminator, PatchScoreDims) {
  nn::Rng rng(70);
  Discriminator dis({6, 8, 8, 8}, rng);
  nn::Graph g;
  nn::NoGrad ng(g);
  nn::Var img = g.leaf(nn::Tensor({1, 3, 64, 64}, 0.5));
  nn::Var s = g.leaf(nn::Tensor({1, 1, 64, 64}, 0.0));
  auto scores = dis.forward(g, img, s);
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0]->val.shape, (std::vector<int>{1, 1, 4, 4}));  // 64/16
  EXPECT_EQ(scores[1]->val.shape, (std::vector<int>{1, 1, 2, 2}));  // half scale
}

TEST(EdgeSR, OutputShapeAndBinarization) {
  nn::Rng rng(71);
  EdgeSRNet net(rng);
  StructuralMap low(8, 8);
  low.at(4, 4) = 1;
  StructuralMap up = sr_upsample(net, low, 0.5);
  EXPECT_EQ(up.height, 32);
  EXPECT_EQ(up.width, 32);
  for (auto v : up.mask) EXPECT_LE(v, 1);
}

TEST(EdgeSR, CheckpointRoundtrip) {
  nn::Rng rng(72);
  EdgeSRNet net(rng);
  StructuralMap low(4, 4);
  low.at(1, 2) = 1;
  StructuralMap a = sr_upsample(net, low);
  std::string path = tmp_path("cc_esr.ckpt");
  net.save(path);
  nn::Rng rng2(999);
  EdgeSRNet other(rng2);
  other.load(path);
  EXPECT_EQ(sr_upsample(other, low), a);
}
