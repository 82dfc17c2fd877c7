#pragma once

#include <string>
#include <vector>

#include "ccodec/autograd.hpp"
#include "ccodec/common.hpp"
#include "ccodec/image.hpp"
#include "ccodec/nn.hpp"

namespace ccodec {

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

// ---- tensor <-> raster glue ----

inline nn::Tensor images_to_tensor(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw ArgumentError("empty batch");
  int N = static_cast<int>(imgs.size());
  int H = imgs[0].height, W = imgs[0].width, C = imgs[0].channels;
  nn::Tensor t({N, C, H, W});
  for (int n = 0; n < N; ++n) {
    const Image& im = imgs[static_cast<std::size_t>(n)];
    if (im.height != H || im.width != W || im.channels != C)
      throw ArgumentError("batch images must share dimensions");
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          t.v[((static_cast<std::size_t>(n) * C + c) * H + y) * W + x] = im.at(y, x, c);
  }
  return t;
}

inline nn::Tensor maps_to_tensor(const std::vector<StructuralMap>& maps) {
  std::vector<Image> imgs;
  imgs.reserve(maps.size());
  for (const auto& m : maps) imgs.push_back(map_to_image(m));
  return images_to_tensor(imgs);
}

inline Image tensor_to_image(const nn::Tensor& t, int n = 0) {
  if (t.shape.size() != 4) throw ArgumentError("tensor_to_image expects NCHW");
  int C = t.dim(1), H = t.dim(2), W = t.dim(3);
  Image im(H, W, C);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        im.at(y, x, c) = t.v[((static_cast<std::size_t>(n) * C + c) * H + y) * W + x];
  return im;
}

// ---- structure-layer super-resolution (4x) ----

struct EdgeSRNet {
  static constexpr char kMagic[5] = "ESR1";
  static constexpr int kScale = 4;

  nn::Conv2d c1, c2, c3, head;

  explicit EdgeSRNet(nn::Rng& rng)
      : c1("esr.c1", 1, 16, 3, 1, 1, rng),
        c2("esr.c2", 16, 32, 3, 1, 1, rng),
        c3("esr.c3", 32, 16, 3, 1, 1, rng),
        head("esr.head", 16, kScale * kScale, 3, 1, 1, rng) {}

  // [N,1,h,w] -> [N,1,4h,4w], entries in (0,1).
  nn::Var forward(nn::Graph& g, nn::Var x) {
    nn::Var h = nn::relu(g, c1(g, x));
    h = nn::relu(g, c2(g, h));
    h = nn::relu(g, c3(g, h));
    return nn::sigmoid(g, nn::pixel_shuffle(g, head(g, h), kScale));
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> p;
    c1.collect(p);
    c2.collect(p);
    c3.collect(p);
    head.collect(p);
    return p;
  }

  void save(const std::string& path) {
    save_checkpoint(path, kMagic, {{"scale", "4"}}, params());
  }
  void load(const std::string& path) { load_checkpoint(path, kMagic, params()); }
};

inline StructuralMap sr_upsample(EdgeSRNet& model, const StructuralMap& low,
                                 double threshold = 0.5) {
  nn::Graph g;
  nn::NoGrad ng(g);
  nn::Var x = g.leaf(maps_to_tensor({low}));
  nn::Var y = model.forward(g, x);
  Image prob = tensor_to_image(y->val);
  return binarize(prob, threshold);
}

// ---- variational texture encoder ----

struct PosteriorGaussian {
  std::vector<double> mu;
  std::vector<double> logvar;
};

struct TextureEncoderNet {
  static constexpr char kMagic[5] = "TEX1";
  static constexpr double kLogvarClamp = 20.0;

  struct Block {
    nn::Conv2d down, conv, skip;
    Block() = default;
    Block(const std::string& name, int cin, int cout, nn::Rng& rng)
        : down(name + ".down", cin, cout, 3, 2, 1, rng),
          conv(name + ".conv", cout, cout, 3, 1, 1, rng),
          skip(name + ".skip", cin, cout, 1, 2, 0, rng) {}
    nn::Var operator()(nn::Graph& g, nn::Var x) {
      nn::Var h = nn::lrelu(g, down(g, x));
      h = conv(g, h);
      return nn::lrelu(g, nn::add(g, h, skip(g, x)));
    }
    void collect(std::vector<nn::Param*>& p) {
      down.collect(p);
      conv.collect(p);
      skip.collect(p);
    }
  };

  int d;
  std::vector<int> chans;
  nn::Conv2d stem;
  std::vector<Block> blocks;
  nn::Linear mu_head, logvar_head;

  TextureEncoderNet(int d_, const std::vector<int>& chans_, nn::Rng& rng) : d(d_), chans(chans_) {
    if (chans.size() < 2) throw ArgumentError("texture encoder needs >= 2 channel entries");
    stem = nn::Conv2d("enc.stem", 3, chans[0], 3, 1, 1, rng);
    for (std::size_t i = 0; i + 1 < chans.size(); ++i)
      blocks.emplace_back("enc.b" + std::to_string(i), chans[i], chans[i + 1], rng);
    mu_head = nn::Linear("enc.mu", chans.back(), d, rng);
    logvar_head = nn::Linear("enc.logvar", chans.back(), d, rng);
  }

  // x: [N,3,H,W] -> (mu [N,d], logvar [N,d] clamped to [-20,20])
  std::pair<nn::Var, nn::Var> forward(nn::Graph& g, nn::Var x) {
    nn::Var h = nn::lrelu(g, stem(g, x));
    for (auto& b : blocks) h = b(g, h);
    nn::Var pooled = nn::global_avg_pool(g, h);
    nn::Var mu = mu_head(g, pooled);
    nn::Var logvar = nn::clamp_op(g, logvar_head(g, pooled), -kLogvarClamp, kLogvarClamp);
    return {mu, logvar};
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> p;
    stem.collect(p);
    for (auto& b : blocks) b.collect(p);
    mu_head.collect(p);
    logvar_head.collect(p);
    return p;
  }

  void save(const std::string& path) {
    save_checkpoint(path, kMagic, {{"d", std::to_string(d)}, {"channels", join_ints(chans)}},
                    params());
  }
  void load(const std::string& path) { load_checkpoint(path, kMagic, params()); }

  static TextureEncoderNet from_checkpoint(const std::string& path) {
    nn::Meta meta = nn::read_checkpoint_meta(path, kMagic);
    nn::Rng rng(0);
    TextureEncoderNet enc(std::stoi(meta.at("d")), split_ints(meta.at("channels")), rng);
    enc.load(path);
    return enc;
  }
};

inline PosteriorGaussian encode_texture(TextureEncoderNet& enc, const Image& img) {
  nn::Graph g;
  nn::NoGrad ng(g);
  auto [mu, logvar] = enc.forward(g, g.leaf(images_to_tensor({img})));
  return {mu->val.v, logvar->val.v};
}

// z = mu + exp(logvar/2) * noise
inline std::vector<double> sample_latent(const PosteriorGaussian& post,
                                         const std::vector<double>& noise) {
  if (noise.size() != post.mu.size()) throw ArgumentError("sample_latent: noise size mismatch");
  std::vector<double> z(post.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = post.mu[i] + std::exp(0.5 * post.logvar[i]) * noise[i];
  return z;
}

// ---- hierarchical fusion generator ----

struct GeneratorConfig {
  int k = 5;       // block count; output resolution 2^(k+1)
  int d = 64;      // texture latent dimension
  std::vector<int> channels = {256, 256, 128, 128, 64, 64};  // c_0..c_k

  int resolution() const { return 1 << (k + 1); }

  void validate() const {
    if (k < 1 || k > 12) throw ArgumentError("generator: k out of range");
    if (static_cast<int>(channels.size()) != k + 1)
      throw ArgumentError("generator: channel schedule must list c_0..c_k");
    if (d < 1) throw ArgumentError("generator: d must be positive");
  }
};

struct Generator {
  static constexpr char kMagic[5] = "HFG1";
  static constexpr double kAdainEps = 1e-8;

  // One fusion block: 2x upsample at entry, edge-channel concat, three
  // adain->conv->lrelu stages modulated from z, plus a 1x1 projection skip.
  struct FuseBlock {
    nn::Conv2d convs[3];
    nn::Linear affines[3];
    nn::Conv2d skip;
    int cins[3];

    FuseBlock() = default;
    FuseBlock(const std::string& name, int c_prev, int c_out, int d, nn::Rng& rng) {
      int cin0 = c_prev + 1;  // concatenated edge channel
      cins[0] = cin0;
      cins[1] = c_out;
      cins[2] = c_out;
      convs[0] = nn::Conv2d(name + ".conv0", cin0, c_out, 3, 1, 1, rng);
      convs[1] = nn::Conv2d(name + ".conv1", c_out, c_out, 3, 1, 1, rng);
      convs[2] = nn::Conv2d(name + ".conv2", c_out, c_out, 3, 1, 1, rng);
      for (int j = 0; j < 3; ++j)
        affines[j] = nn::Linear(name + ".affine" + std::to_string(j), d, 2 * cins[j], rng);
      skip = nn::Conv2d(name + ".skip", cin0, c_out, 1, 1, 0, rng);
    }

    nn::Var operator()(nn::Graph& g, nn::Var prev, nn::Var s_i, nn::Var z) {
      nn::Var u = nn::concat_channels(g, nn::upsample_nearest2(g, prev), s_i);
      nn::Var h = u;
      for (int j = 0; j < 3; ++j) {
        nn::Var ab = affines[j](g, z);
        nn::Var alpha = nn::slice_cols(g, ab, 0, cins[j]);
        nn::Var beta = nn::slice_cols(g, ab, cins[j], cins[j]);
        h = nn::adain(g, h, alpha, beta, kAdainEps);
        h = nn::lrelu(g, convs[j](g, h));
      }
      return nn::add(g, h, skip(g, u));
    }

    void collect(std::vector<nn::Param*>& p) {
      for (auto& c : convs) c.collect(p);
      for (auto& a : affines) a.collect(p);
      skip.collect(p);
    }
  };

  GeneratorConfig cfg;
  nn::Conv2d g0_conv;
  std::vector<FuseBlock> blocks;
  std::vector<nn::Conv2d> to_rgb;  // one per level 0..k

  Generator(const GeneratorConfig& c, nn::Rng& rng) : cfg(c) {
    cfg.validate();
    g0_conv = nn::Conv2d("gen.g0", 1, cfg.channels[0], 3, 1, 1, rng);
    for (int i = 1; i <= cfg.k; ++i)
      blocks.emplace_back("gen.b" + std::to_string(i), cfg.channels[i - 1], cfg.channels[i],
                          cfg.d, rng);
    for (int i = 0; i <= cfg.k; ++i)
      to_rgb.emplace_back("gen.rgb" + std::to_string(i), cfg.channels[i], 3, 3, 1, 1, rng);
  }

  // z: [N,d], s: [N,1,R,R] with R = 2^(k+1). Returns the accumulated RGB
  // pyramid x_0..x_k (pre output mapping); the image output is
  // 0.5*tanh(x_k)+0.5.
  std::vector<nn::Var> forward_pyramid(nn::Graph& g, nn::Var z, nn::Var s) {
    int R = cfg.resolution();
    if (s->val.dim(2) != R || s->val.dim(3) != R)
      throw ArgumentError("generator: structural map must be " + std::to_string(R) +
                          " square, got " + s->val.shape_str());
    if (z->val.dim(1) != cfg.d) throw ArgumentError("generator: latent dim mismatch");

    std::vector<nn::Var> xs;
    nn::Var a = g0_conv(g, nn::avg_pool(g, s, R / 2));  // A_0 at 2x2
    xs.push_back(to_rgb[0](g, a));
    for (int i = 1; i <= cfg.k; ++i) {
      int res = 1 << (i + 1);
      nn::Var s_i = res == R ? s : nn::avg_pool(g, s, R / res);
      a = blocks[static_cast<std::size_t>(i - 1)](g, a, s_i, z);
      nn::Var b = to_rgb[static_cast<std::size_t>(i)](g, a);
      xs.push_back(nn::add(g, b, nn::upsample_bilinear2(g, xs.back())));
    }
    return xs;
  }

  nn::Var forward(nn::Graph& g, nn::Var z, nn::Var s) {
    nn::Var xk = forward_pyramid(g, z, s).back();
    return nn::add_scalar(g, nn::mul_scalar(g, nn::tanh_op(g, xk), 0.5), 0.5);
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> p;
    g0_conv.collect(p);
    for (auto& b : blocks) b.collect(p);
    for (auto& r : to_rgb) r.collect(p);
    return p;
  }

  nn::Meta meta() const {
    return {{"k", std::to_string(cfg.k)},
            {"d", std::to_string(cfg.d)},
            {"channels", join_ints(cfg.channels)}};
  }

  void save(const std::string& path) { save_checkpoint(path, kMagic, meta(), params()); }
  void load(const std::string& path) { load_checkpoint(path, kMagic, params()); }

  static Generator from_checkpoint(const std::string& path) {
    nn::Meta meta = nn::read_checkpoint_meta(path, kMagic);
    GeneratorConfig c;
    c.k = std::stoi(meta.at("k"));
    c.d = std::stoi(meta.at("d"));
    c.channels = split_ints(meta.at("channels"));
    nn::Rng rng(0);
    Generator gen(c, rng);
    gen.load(path);
    return gen;
  }
};

// Deterministic inference entry: latent + binary map -> image in [0,1].
inline Image generate(Generator& gen, const std::vector<double>& z, const StructuralMap& s) {
  if (static_cast<int>(z.size()) != gen.cfg.d)
    throw ArgumentError("generate: latent length mismatch");
  nn::Graph g;
  nn::NoGrad ng(g);
  nn::Tensor zt({1, gen.cfg.d});
  zt.v = z;
  nn::Var out = gen.forward(g, g.leaf(std::move(zt)), g.leaf(maps_to_tensor({s})));
  return tensor_to_image(out->val);
}

// ---- conditional multi-scale discriminator ----

struct Discriminator {
  static constexpr char kMagic[5] = "DIS1";

  struct Scale {
    std::vector<nn::Conv2d> convs;
    nn::Conv2d head;
    Scale() = default;
    Scale(const std::string& name, const std::vector<int>& chans, nn::Rng& rng) {
      int cin = 4;  // RGB + edge condition
      for (std::size_t i = 0; i < chans.size(); ++i) {
        convs.emplace_back(name + ".c" + std::to_string(i), cin, chans[i], 3, 2, 1, rng);
        cin = chans[i];
      }
      head = nn::Conv2d(name + ".head", cin, 1, 3, 1, 1, rng);
    }
    nn::Var operator()(nn::Graph& g, nn::Var x) {
      nn::Var h = x;
      for (auto& c : convs) h = nn::lrelu(g, c(g, h));
      return head(g, h);  // raw least-squares scores
    }
    void collect(std::vector<nn::Param*>& p) {
      for (auto& c : convs) c.collect(p);
      head.collect(p);
    }
  };

  Scale full, half;

  Discriminator(const std::vector<int>& chans, nn::Rng& rng)
      : full("dis.full", chans, rng), half("dis.half", chans, rng) {}

  // img [N,3,H,W], s [N,1,H,W] -> two patch score maps (full, half res).
  std::vector<nn::Var> forward(nn::Graph& g, nn::Var img, nn::Var s) {
    if (img->val.dim(2) != s->val.dim(2) || img->val.dim(3) != s->val.dim(3))
      throw ArgumentError("discriminator: image/map dims differ");
    nn::Var x = nn::concat_channels(g, img, s);
    return {full(g, x), half(g, nn::avg_pool(g, x, 2))};
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> p;
    full.collect(p);
    half.collect(p);
    return p;
  }

  void save(const std::string& path) { save_checkpoint(path, kMagic, {}, params()); }
  void load(const std::string& path) { load_checkpoint(path, kMagic, params()); }
};

// Frozen random-weight feature pyramid standing in for a pretrained
// perceptual network; the seed is recorded alongside checkpoints.
struct PerceptualNet {
  nn::Conv2d c1, c2, c3;

  explicit PerceptualNet(std::uint64_t seed) {
    nn::Rng rng(seed);
    c1 = nn::Conv2d("perc.c1", 3, 16, 3, 1, 1, rng);
    c2 = nn::Conv2d("perc.c2", 16, 32, 3, 1, 1, rng);
    c3 = nn::Conv2d("perc.c3", 32, 48, 3, 1, 1, rng);
    for (nn::Param* p : {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b}) p->trainable = false;
  }

  std::vector<nn::Var> features(nn::Graph& g, nn::Var x) {
    nn::Var f1 = nn::lrelu(g, c1(g, x));
    nn::Var f2 = nn::lrelu(g, c2(g, nn::avg_pool(g, f1, 2)));
    nn::Var f3 = nn::lrelu(g, c3(g, nn::avg_pool(g, f2, 2)));
    return {f1, f2, f3};
  }
};

}  // namespace ccodec
