// ccodec: command-line surface for the conceptual codec.
// Exit codes: 0 success, 1 runtime error, 2 usage/config error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ccodec/bitstream.hpp"
#include "ccodec/dataset.hpp"
#include "ccodec/metrics.hpp"
#include "ccodec/train.hpp"

namespace {

using namespace ccodec;

struct GlobalOpts {
  std::string config_path;
  long long seed = -1;  // -1: not given
  std::string checkpoint_dir = "checkpoints";
};

Config load_config(const GlobalOpts& g) {
  return g.config_path.empty() ? Config() : Config::from_file(g.config_path);
}

CodecConfig codec_config_from(const Config& c) {
  CodecConfig cc;
  cc.edge.blur_sigma = c.real("edge.blur_sigma", cc.edge.blur_sigma);
  cc.edge.low = c.real("edge.low", cc.edge.low);
  cc.edge.high = c.real("edge.high", cc.edge.high);
  cc.down_threshold = c.real("binarize.threshold", cc.down_threshold);
  cc.qp = c.integer("tex.qp", cc.qp);
  return cc;
}

int run_compress(const GlobalOpts& g, const std::string& in, const std::string& out, int qp,
                 bool full_res) {
  Config c = load_config(g);
  CodecConfig cc = codec_config_from(c);
  if (qp >= 0) cc.qp = qp;
  cc.full_res_structure = full_res;
  ModelSet models = ModelSet::load(g.checkpoint_dir);
  Image img = load_image(in);
  ConceptualBitstream bs = compress(img, models, cc);
  write_bitstream(bs, out);
  std::printf("bpp %.6f\n", bpp(bs, bs.height, bs.width));
  return 0;
}

int run_decompress(const GlobalOpts& g, const std::string& in, const std::string& out,
                   bool print_bpp_only) {
  ConceptualBitstream bs = read_bitstream(in);
  if (print_bpp_only) {
    std::printf("bpp %.6f\n", bpp(bs, bs.height, bs.width));
    if (out.empty()) return 0;
  }
  if (out.empty()) throw ArgumentError("decompress: output path required");
  ModelSet models = ModelSet::load(g.checkpoint_dir);
  save_image(decompress(bs, models), out);
  return 0;
}

int run_gen_dataset(const GlobalOpts& g, const std::string& out_dir, int count, int size) {
  std::uint64_t seed = g.seed >= 0 ? static_cast<std::uint64_t>(g.seed) : 42u;
  generate_toy_dataset(out_dir, count, seed, size);
  std::printf("wrote %d image/map pairs to %s\n", count, out_dir.c_str());
  return 0;
}

int run_train(const GlobalOpts& g, const std::string& dataset_dir) {
  Config c = load_config(g);
  TrainConfig tc = train_config_from(c);
  LossWeights w = loss_weights_from(c);
  if (!dataset_dir.empty()) tc.dataset_dir = dataset_dir;
  if (tc.dataset_dir.empty()) throw ConfigError("train: dataset_dir not set");
  if (g.seed >= 0) tc.seed = static_cast<std::uint64_t>(g.seed);
  if (!g.checkpoint_dir.empty()) tc.checkpoint_dir = g.checkpoint_dir;
  tc.validate();

  Dataset ds = load_dataset(tc.dataset_dir, tc.image_size, tc.edge);
  std::printf("loaded %zu images from %s\n", ds.size(), tc.dataset_dir.c_str());

  Trainer trainer(tc, w, std::move(ds));
  std::printf("training edge upsampler (%d steps)\n", tc.edgesr_steps);
  EdgeSRTrainResult er = train_edge_sr(trainer.edge_sr, trainer.train_set, tc);
  std::printf("edge-sr bce %.4f -> %.4f\n", er.initial_loss, er.final_loss);
  std::printf("training codec (%d steps, batch %d)\n", tc.steps, tc.batch_size);
  TrainResult tr = trainer.run(&std::cout);
  std::printf("val L1 %.4f -> %.4f (smoothed)\n", tr.initial_val_l1, tr.final_val_l1_smoothed);
  std::printf("checkpoints in %s, log in %s\n", tc.checkpoint_dir.c_str(), tc.log_csv.c_str());
  return 0;
}

int run_manipulate(const GlobalOpts& g, const std::string& mode,
                   const std::vector<std::string>& inputs, const std::string& out,
                   const std::string& decode_png) {
  Config c = load_config(g);
  ConceptualBitstream result;
  if (mode == "swap-texture") {
    if (inputs.size() != 2)
      throw ArgumentError("swap-texture needs two input bitstreams");
    result = swap_texture(read_bitstream(inputs[0]), read_bitstream(inputs[1]));
  } else if (mode == "edit-structure") {
    if (inputs.size() != 2)
      throw ArgumentError("edit-structure needs a bitstream and an edge-map PNG");
    ConceptualBitstream bs = read_bitstream(inputs[0]);
    StructuralMap map = binarize(load_image(inputs[1]), 0.5);
    result = replace_structure(bs, map, codec_config_from(c));
  } else {
    throw ArgumentError("unknown manipulate mode: " + mode);
  }
  write_bitstream(result, out);
  if (!decode_png.empty()) {
    ModelSet models = ModelSet::load(g.checkpoint_dir);
    save_image(decompress(result, models), decode_png);
  }
  return 0;
}

int run_eval(const GlobalOpts& g, const std::string& corpus_dir, const std::string& csv_path) {
  Config c = load_config(g);
  CodecConfig cc = codec_config_from(c);
  ModelSet models = ModelSet::load(g.checkpoint_dir);
  int res = models.generator.cfg.resolution();
  Dataset ds = load_dataset(corpus_dir, res, cc.edge);

  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << "path,bpp,psnr,ssim\n";
  double sum_bpp = 0, sum_psnr = 0, sum_ssim = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Image& x = ds.images[i];
    ConceptualBitstream bs = compress(x, models, cc);
    Image xhat = decompress(bs, models, cc.sr_threshold);
    double b = bpp(bs, bs.height, bs.width);
    double p = psnr(x, xhat);
    double s = ssim_metric(x, xhat);
    csv << "image_" << i << ',' << b << ',' << p << ',' << s << '\n';
    sum_bpp += b;
    sum_psnr += p;
    sum_ssim += s;
  }
  double n = static_cast<double>(ds.size());
  csv << "mean," << sum_bpp / n << ',' << sum_psnr / n << ',' << sum_ssim / n << '\n';
  std::printf("images %zu mean_bpp %.6f mean_psnr %.4f mean_ssim %.4f\n", ds.size(),
              sum_bpp / n, sum_psnr / n, sum_ssim / n);
  std::printf("report: %s\n", csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conceptual image codec"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--config", g.config_path, "key=value config file");
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--checkpoint-dir", g.checkpoint_dir, "model checkpoint directory");

  std::string in, out, mode, decode_png, csv_path = "eval_report.csv", dataset_dir;
  std::vector<std::string> inputs;
  int qp = -1, count = 500, size = 64;
  bool full_res = false, print_bpp = false;

  auto* c_compress = app.add_subcommand("compress", "PNG -> .ccb bitstream");
  c_compress->fallthrough();
  c_compress->add_option("input", in, "input PNG")->required();
  c_compress->add_option("output", out, "output .ccb")->required();
  c_compress->add_option("--qp", qp, "quantization parameter (0-51)");
  c_compress->add_flag("--full-res-structure", full_res, "skip structure downsampling");

  auto* c_decompress = app.add_subcommand("decompress", ".ccb bitstream -> PNG");
  c_decompress->fallthrough();
  c_decompress->add_option("input", in, "input .ccb")->required();
  c_decompress->add_option("output", out, "output PNG");
  c_decompress->add_flag("--print-bpp", print_bpp, "print the stream's bits per pixel");

  auto* c_gen = app.add_subcommand("gen-dataset", "generate toy shape corpus");
  c_gen->fallthrough();
  c_gen->add_option("out_dir", out, "output directory")->required();
  c_gen->add_option("--count", count, "number of image/map pairs");
  c_gen->add_option("--size", size, "square image size");

  auto* c_train = app.add_subcommand("train", "train codec networks");
  c_train->fallthrough();
  c_train->add_option("dataset_dir", dataset_dir, "training image directory");

  auto* c_manip = app.add_subcommand("manipulate", "compressed-domain editing");
  c_manip->fallthrough();
  c_manip->add_option("mode", mode, "swap-texture | edit-structure")->required();
  c_manip->add_option("inputs", inputs, "mode inputs")->expected(2);
  c_manip->add_option("--output", out, "output .ccb")->required();
  c_manip->add_option("--decode", decode_png, "also decode result to this PNG");

  auto* c_eval = app.add_subcommand("eval", "bpp/PSNR/SSIM report over a corpus");
  c_eval->fallthrough();
  c_eval->add_option("corpus_dir", in, "directory of PNGs")->required();
  c_eval->add_option("--out", csv_path, "CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*c_compress) return run_compress(g, in, out, qp, full_res);
    if (*c_decompress) return run_decompress(g, in, out, print_bpp);
    if (*c_gen) return run_gen_dataset(g, out, count, size);
    if (*c_train) return run_train(g, dataset_dir);
    if (*c_manip) return run_manipulate(g, mode, inputs, out, decode_png);
    if (*c_eval) return run_eval(g, in, csv_path);
  } catch (const ccodec::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ccodec::ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
