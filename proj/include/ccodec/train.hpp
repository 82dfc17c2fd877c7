#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ccodec/bitstream.hpp"
#include "ccodec/config.hpp"
#include "ccodec/dataset.hpp"
#include "ccodec/losses.hpp"
#include "ccodec/models.hpp"

namespace ccodec {

struct TrainConfig {
  int batch_size = 16;
  double lr = 0.0002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int steps = 2000;
  std::string dataset_dir;
  int image_size = 64;
  int d = 64;
  std::vector<int> gen_channels = {80, 80, 64, 48, 32, 24};
  std::vector<int> enc_channels = {32, 48, 64, 80, 96};
  std::vector<int> dis_channels = {12, 16, 24, 32};
  std::uint64_t seed = 42;
  std::uint64_t perceptual_seed = 1234;
  int val_count = 32;
  int eval_every = 50;
  int checkpoint_every = 500;
  int edgesr_steps = 4000;
  int edgesr_batch = 8;
  double grad_clip = 10.0;
  std::string checkpoint_dir = "checkpoints";
  std::string log_csv = "train_log.csv";
  EdgeConfig edge;
  double down_threshold = 0.1;

  int block_count() const {
    int k = 0;
    while ((1 << (k + 1)) < image_size) ++k;
    if ((1 << (k + 1)) != image_size)
      throw ConfigError("image_size must be a power of two >= 8");
    return k;
  }

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (lr <= 0) throw ConfigError("lr must be positive");
    block_count();
    if (static_cast<int>(gen_channels.size()) != block_count() + 1)
      throw ConfigError("gen_channels must list c_0..c_k (" +
                        std::to_string(block_count() + 1) + " entries)");
  }
};

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "batch_size",    "lr",           "adam_beta1",     "adam_beta2",
      "steps",         "dataset_dir",  "image_size",     "tex.d",
      "gen_channels",  "enc_channels", "dis_channels",   "seed",
      "perceptual_seed", "val_count",  "eval_every",     "checkpoint_every",
      "edgesr_steps",  "edgesr_batch", "grad_clip",      "checkpoint_dir",
      "log_csv",       "edge.blur_sigma", "edge.low",    "edge.high",
      "binarize.threshold", "tex.qp",
      "loss.gan",      "loss.rec",     "loss.ssim",      "loss.vgg",
      "loss.latent",   "loss.kl"};
  return keys;
}

inline TrainConfig train_config_from(const Config& c) {
  c.validate_keys(known_config_keys());
  TrainConfig t;
  t.batch_size = c.integer("batch_size", t.batch_size);
  t.lr = c.real("lr", t.lr);
  t.adam_beta1 = c.real("adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.real("adam_beta2", t.adam_beta2);
  t.steps = c.integer("steps", t.steps);
  t.dataset_dir = c.str("dataset_dir", t.dataset_dir);
  t.image_size = c.integer("image_size", t.image_size);
  t.d = c.integer("tex.d", t.d);
  if (c.has("gen_channels")) t.gen_channels = split_ints(c.str("gen_channels", ""));
  if (c.has("enc_channels")) t.enc_channels = split_ints(c.str("enc_channels", ""));
  if (c.has("dis_channels")) t.dis_channels = split_ints(c.str("dis_channels", ""));
  t.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<int>(t.seed)));
  t.perceptual_seed =
      static_cast<std::uint64_t>(c.integer("perceptual_seed", static_cast<int>(t.perceptual_seed)));
  t.val_count = c.integer("val_count", t.val_count);
  t.eval_every = c.integer("eval_every", t.eval_every);
  t.checkpoint_every = c.integer("checkpoint_every", t.checkpoint_every);
  t.edgesr_steps = c.integer("edgesr_steps", t.edgesr_steps);
  t.edgesr_batch = c.integer("edgesr_batch", t.edgesr_batch);
  t.grad_clip = c.real("grad_clip", t.grad_clip);
  t.checkpoint_dir = c.str("checkpoint_dir", t.checkpoint_dir);
  t.log_csv = c.str("log_csv", t.log_csv);
  t.edge.blur_sigma = c.real("edge.blur_sigma", t.edge.blur_sigma);
  t.edge.low = c.real("edge.low", t.edge.low);
  t.edge.high = c.real("edge.high", t.edge.high);
  t.down_threshold = c.real("binarize.threshold", t.down_threshold);
  return t;
}

inline LossWeights loss_weights_from(const Config& c) {
  LossWeights w;
  w.gan = c.real("loss.gan", w.gan);
  w.rec = c.real("loss.rec", w.rec);
  w.ssim = c.real("loss.ssim", w.ssim);
  w.vgg = c.real("loss.vgg", w.vgg);
  w.latent = c.real("loss.latent", w.latent);
  w.kl = c.real("loss.kl", w.kl);
  return w;
}

namespace detail {

inline void check_finite(double v, const char* what, int step) {
  if (!std::isfinite(v))
    throw Error(std::string("non-finite ") + what + " at step " + std::to_string(step));
}

inline nn::Tensor batch_images(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<Image> imgs;
  for (std::size_t i : idx) imgs.push_back(ds.images[i]);
  return images_to_tensor(imgs);
}

inline nn::Tensor batch_maps(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<StructuralMap> maps;
  for (std::size_t i : idx) maps.push_back(ds.maps[i]);
  return maps_to_tensor(maps);
}

inline nn::Tensor batch_maps(const std::vector<StructuralMap>& all,
                             const std::vector<std::size_t>& idx) {
  std::vector<StructuralMap> maps;
  for (std::size_t i : idx) maps.push_back(all[i]);
  return maps_to_tensor(maps);
}

}  // namespace detail

// ---- structure-layer SR training (BCE objective) ----

struct EdgeSRTrainResult {
  double initial_loss = 0;
  double final_loss = 0;
};

// Trains the 4x upsampler on (downsampled map, original map) pairs.
inline EdgeSRTrainResult train_edge_sr(EdgeSRNet& net, const Dataset& ds,
                                       const TrainConfig& cfg) {
  if (ds.size() == 0) throw ConfigError("empty dataset");
  nn::Rng rng(cfg.seed ^ 0xe5d6f7a8ull);
  nn::Adam opt;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.adam_beta1;
  opt.beta2 = cfg.adam_beta2;
  opt.clip_norm = cfg.grad_clip;
  auto params = net.params();

  // Precompute low-res inputs once.
  std::vector<StructuralMap> lows;
  lows.reserve(ds.size());
  for (const auto& m : ds.maps) {
    Image low = lanczos_resample_unit(map_to_image(m), 1, EdgeSRNet::kScale);
    lows.push_back(binarize(low, cfg.down_threshold));
  }

  EdgeSRTrainResult res;
  for (int step = 0; step < cfg.edgesr_steps; ++step) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(cfg.edgesr_batch));
    for (auto& i : idx) i = rng.uniform_int(ds.size());
    std::vector<StructuralMap> lo, hi;
    for (std::size_t i : idx) {
      lo.push_back(lows[i]);
      hi.push_back(ds.maps[i]);
    }
    nn::Graph g;
    nn::Var pred = net.forward(g, g.leaf(maps_to_tensor(lo)));
    nn::Var target = g.leaf(maps_to_tensor(hi));
    nn::Var loss = nn::mul_scalar(g, bce_loss(g, pred, target), 1.0 / cfg.edgesr_batch);
    double lv = loss->val.v[0];
    detail::check_finite(lv, "edge-sr loss", step);
    if (step == 0) res.initial_loss = lv;
    res.final_loss = lv;
    nn::Adam::zero_grads(params);
    g.backward(loss);
    opt.step(params);
  }
  return res;
}

// ---- joint encoder/generator/discriminator training ----

struct TrainResult {
  std::vector<double> val_l1;  // validation L1 at step 0, then every eval_every
  double initial_val_l1 = 0;
  double final_val_l1_smoothed = 0;  // mean of last 10 evals
  int steps_run = 0;
};

struct Trainer {
  TrainConfig cfg;
  LossWeights weights;
  Dataset train_set, val_set;
  // Structure inputs for the codec nets come from the same edge extractor the
  // encoder uses at compress time, so train and deploy distributions match.
  // (The dataset's own maps are still used to supervise the SR net.)
  std::vector<StructuralMap> train_codec_maps, val_codec_maps;
  TextureEncoderNet encoder;
  Generator generator;
  Discriminator discriminator;
  PerceptualNet perceptual;
  EdgeSRNet edge_sr;
  nn::Rng rng;

  Trainer(const TrainConfig& c, const LossWeights& w, Dataset full)
      : cfg(c),
        weights(w),
        encoder(make_encoder(c)),
        generator(make_generator(c)),
        discriminator(make_discriminator(c)),
        perceptual(c.perceptual_seed),
        edge_sr(make_edge_sr(c)),
        rng(c.seed) {
    cfg.validate();
    if (full.size() == 0) throw ConfigError("empty dataset");
    std::size_t val_n = std::min<std::size_t>(static_cast<std::size_t>(cfg.val_count),
                                              full.size() / 5);
    val_n = std::max<std::size_t>(val_n, 1);
    for (std::size_t i = 0; i < full.size(); ++i) {
      if (i < full.size() - val_n) {
        train_set.images.push_back(std::move(full.images[i]));
        train_set.maps.push_back(std::move(full.maps[i]));
      } else {
        val_set.images.push_back(std::move(full.images[i]));
        val_set.maps.push_back(std::move(full.maps[i]));
      }
    }
    for (const Image& img : train_set.images)
      train_codec_maps.push_back(extract_edges(img, cfg.edge));
    for (const Image& img : val_set.images)
      val_codec_maps.push_back(extract_edges(img, cfg.edge));
  }

  static TextureEncoderNet make_encoder(const TrainConfig& c) {
    nn::Rng r(c.seed ^ 0x1111ull);
    return TextureEncoderNet(c.d, c.enc_channels, r);
  }
  static Generator make_generator(const TrainConfig& c) {
    GeneratorConfig gc;
    gc.k = c.block_count();
    gc.d = c.d;
    gc.channels = c.gen_channels;
    nn::Rng r(c.seed ^ 0x2222ull);
    return Generator(gc, r);
  }
  static Discriminator make_discriminator(const TrainConfig& c) {
    nn::Rng r(c.seed ^ 0x3333ull);
    return Discriminator(c.dis_channels, r);
  }
  static EdgeSRNet make_edge_sr(const TrainConfig& c) {
    nn::Rng r(c.seed ^ 0x4444ull);
    return EdgeSRNet(r);
  }

  double validation_l1() {
    double acc = 0.0;
    std::size_t n = val_set.size();
    const std::size_t chunk = 8;
    for (std::size_t start = 0; start < n; start += chunk) {
      std::vector<std::size_t> idx;
      for (std::size_t i = start; i < std::min(n, start + chunk); ++i) idx.push_back(i);
      nn::Graph g;
      nn::NoGrad ng(g);
      nn::Var x = g.leaf(detail::batch_images(val_set, idx));
      nn::Var s = g.leaf(detail::batch_maps(val_codec_maps, idx));
      auto [mu, logvar] = encoder.forward(g, x);
      (void)logvar;
      nn::Var xhat = generator.forward(g, mu, s);
      nn::Var l1 = rec_loss(g, x, xhat);
      acc += l1->val.v[0] * static_cast<double>(idx.size());
    }
    return acc / static_cast<double>(n);
  }

  void save_checkpoints() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.checkpoint_dir);
    encoder.save((fs::path(cfg.checkpoint_dir) / "texenc.ckpt").string());
    generator.save((fs::path(cfg.checkpoint_dir) / "hfgan.ckpt").string());
    discriminator.save((fs::path(cfg.checkpoint_dir) / "dis.ckpt").string());
    edge_sr.save((fs::path(cfg.checkpoint_dir) / "edgesr.ckpt").string());
  }

  // Degrades the extracted edge maps through the structure layer (downsample,
  // binarize, SR restore) so the codec nets train on exactly the maps the
  // decoder will condition on. Requires edge_sr to be trained already.
  void roundtrip_codec_maps() {
    auto roundtrip = [&](StructuralMap& m) {
      Image low = lanczos_resample_unit(map_to_image(m), 1, EdgeSRNet::kScale);
      m = sr_upsample(edge_sr, binarize(low, cfg.down_threshold), 0.5);
    };
    for (auto& m : train_codec_maps) roundtrip(m);
    for (auto& m : val_codec_maps) roundtrip(m);
  }

  TrainResult run(std::ostream* progress = nullptr) {
    roundtrip_codec_maps();
    auto gen_params = generator.params();
    auto enc_params = encoder.params();
    auto dis_params = discriminator.params();
    std::vector<nn::Param*> ge_params = gen_params;
    ge_params.insert(ge_params.end(), enc_params.begin(), enc_params.end());

    nn::Adam opt_ge, opt_d;
    for (nn::Adam* o : {&opt_ge, &opt_d}) {
      o->lr = cfg.lr;
      o->beta1 = cfg.adam_beta1;
      o->beta2 = cfg.adam_beta2;
      o->clip_norm = cfg.grad_clip;
    }

    std::ofstream csv(cfg.log_csv);
    csv << "step,d_loss,gan,rec,ssim,vgg,kl,latent,total\n";

    TrainResult result;
    result.initial_val_l1 = validation_l1();
    result.val_l1.push_back(result.initial_val_l1);

    const int N = cfg.batch_size;
    for (int step = 0; step < cfg.steps; ++step) {
      std::vector<std::size_t> idx(static_cast<std::size_t>(N));
      for (auto& i : idx) i = rng.uniform_int(train_set.size());
      nn::Tensor xt = detail::batch_images(train_set, idx);
      nn::Tensor st = detail::batch_maps(train_codec_maps, idx);
      nn::Tensor noise({N, cfg.d});
      for (double& v : noise.v) v = rng.normal();

      // Discriminator step (generator frozen).
      double d_loss_v;
      nn::Tensor xhat_detached;
      {
        nn::Graph g;
        nn::Var x = g.leaf(xt);
        nn::Var s = g.leaf(st);
        {
          nn::NoGrad ng(g);
          auto [mu, logvar] = encoder.forward(g, x);
          nn::Var z = nn::add(
              g, mu, nn::mul(g, nn::exp_op(g, nn::mul_scalar(g, logvar, 0.5)), g.leaf(noise)));
          xhat_detached = generator.forward(g, z, s)->val;
        }
        nn::Var xf = g.leaf(xhat_detached);
        auto real_scores = discriminator.forward(g, x, s);
        auto fake_scores = discriminator.forward(g, xf, s);
        nn::Var d_loss = lsgan_d_loss(g, real_scores, fake_scores);
        d_loss_v = d_loss->val.v[0];
        detail::check_finite(d_loss_v, "d_loss", step);
        nn::Adam::zero_grads(dis_params);
        g.backward(d_loss);
        opt_d.step(dis_params);
      }

      // Encoder + generator step.
      {
        nn::Graph g;
        nn::Var x = g.leaf(xt);
        nn::Var s = g.leaf(st);
        auto [mu, logvar] = encoder.forward(g, x);
        nn::Var z = nn::add(
            g, mu, nn::mul(g, nn::exp_op(g, nn::mul_scalar(g, logvar, 0.5)), g.leaf(noise)));
        nn::Var xhat = generator.forward(g, z, s);

        LossTerms terms;
        terms.gan = lsgan_g_loss(g, discriminator.forward(g, xhat, s));
        terms.rec = rec_loss(g, x, xhat);
        terms.ssim = ssim_loss(g, x, xhat);
        terms.vgg = perceptual_loss(g, x, xhat, perceptual);
        terms.kl = kl_loss(g, mu, logvar);
        terms.latent = latent_regression_loss(g, z, xhat, encoder);
        nn::Var total = total_loss(g, terms, weights);

        double tv = total->val.v[0];
        detail::check_finite(tv, "total loss", step);
        csv << step << ',' << d_loss_v << ',' << terms.gan->val.v[0] << ','
            << terms.rec->val.v[0] << ',' << terms.ssim->val.v[0] << ','
            << terms.vgg->val.v[0] << ',' << terms.kl->val.v[0] << ','
            << terms.latent->val.v[0] << ',' << tv << '\n';

        nn::Adam::zero_grads(ge_params);
        g.backward(total);
        opt_ge.step(ge_params);
      }

      if ((step + 1) % cfg.eval_every == 0) {
        double v = validation_l1();
        detail::check_finite(v, "validation L1", step);
        result.val_l1.push_back(v);
        if (progress)
          (*progress) << "step " << (step + 1) << " val_l1 " << v << std::endl;
        csv.flush();
      }
      if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0)
        save_checkpoints();
      result.steps_run = step + 1;
    }

    save_checkpoints();
    std::size_t tail = std::min<std::size_t>(10, result.val_l1.size());
    double acc = 0.0;
    for (std::size_t i = result.val_l1.size() - tail; i < result.val_l1.size(); ++i)
      acc += result.val_l1[i];
    result.final_val_l1_smoothed = acc / static_cast<double>(tail);
    return result;
  }
};

}  // namespace ccodec
