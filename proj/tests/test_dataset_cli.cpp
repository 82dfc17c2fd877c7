#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccodec/bitstream.hpp"
#include "ccodec/config.hpp"
#include "ccodec/dataset.hpp"
#include "ccodec/train.hpp"

using namespace ccodec;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Bytes slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(CCODEC_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST(ToyDataset, DeterministicPerSeed) {
  auto [img1, map1] = make_toy_sample(7, 3, 64);
  auto [img2, map2] = make_toy_sample(7, 3, 64);
  EXPECT_EQ(img1.pixels, img2.pixels);
  EXPECT_EQ(map1, map2);
  auto [img3, map3] = make_toy_sample(8, 3, 64);
  EXPECT_NE(img1.pixels, img3.pixels);
}

TEST(ToyDataset, EdgeMapMarksShapeBoundaries) {
  auto [img, map] = make_toy_sample(1, 0, 64);
  int edges = 0;
  for (auto v : map.mask) edges += v;
  EXPECT_GT(edges, 10);                  // shapes produce boundaries
  EXPECT_LT(edges, 64 * 64 / 2);         // maps stay sparse
  EXPECT_EQ(img.channels, 3);
  for (double v : img.pixels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(ToyDataset, GeneratorWritesPairsDeterministically) {
  fs::path d1 = tmp_dir("cc_ds1"), d2 = tmp_dir("cc_ds2");
  generate_toy_dataset(d1.string(), 4, 11, 32);
  generate_toy_dataset(d2.string(), 4, 11, 32);
  int count = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    ++count;
    EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path();
  }
  EXPECT_EQ(count, 8);  // n image + n map files
}

TEST(ToyDataset, LoadDatasetPairsImagesWithMaps) {
  fs::path d = tmp_dir("cc_ds_load");
  generate_toy_dataset(d.string(), 3, 5, 32);
  Dataset ds = load_dataset(d.string(), 32);
  ASSERT_EQ(ds.size(), 3u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.images[i].height, 32);
    EXPECT_EQ(ds.images[i].channels, 3);
    EXPECT_EQ(ds.maps[i].height, 32);
  }
  // provided maps are used verbatim (not re-derived)
  auto [img0, map0] = make_toy_sample(5, 0, 32);
  EXPECT_EQ(ds.maps[0], map0);
  EXPECT_THROW(load_dataset((d / "nope").string(), 32), ConfigError);
  fs::path empty = tmp_dir("cc_ds_empty");
  EXPECT_THROW(load_dataset(empty.string(), 32), ConfigError);
}

TEST(Config, ParsesKeyValueWithComments) {
  fs::path p = fs::temp_directory_path() / "cc_cfg.txt";
  std::ofstream(p) << "# comment\nlr = 0.001\nsteps=50  # inline\n\ndataset_dir = /tmp/ds\n";
  Config c = Config::from_file(p.string());
  EXPECT_DOUBLE_EQ(c.real("lr", 0.0), 0.001);
  EXPECT_EQ(c.integer("steps", 0), 50);
  EXPECT_EQ(c.str("dataset_dir", ""), "/tmp/ds");
  EXPECT_EQ(c.integer("missing", 42), 42);
}

TEST(Config, ErrorsNameLineAndOffenders) {
  fs::path p = fs::temp_directory_path() / "cc_cfg_bad.txt";
  std::ofstream(p) << "lr = 0.001\nnot a pair\n";
  try {
    Config::from_file(p.string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }

  Config c;
  c.set("lr", "0.1");
  c.set("bogus1", "x");
  c.set("bogus2", "y");
  try {
    c.validate_keys(known_config_keys());
    FAIL();
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("bogus1"), std::string::npos);
    EXPECT_NE(msg.find("bogus2"), std::string::npos);
  }

  Config bad;
  bad.set("steps", "many");
  EXPECT_THROW(bad.integer("steps", 0), ConfigError);
  bad.set("lr", "fast");
  EXPECT_THROW(bad.real("lr", 0.0), ConfigError);
}

TEST(Config, TrainConfigMapping) {
  Config c;
  c.set("batch_size", "4");
  c.set("steps", "10");
  c.set("gen_channels", "8,8,8,8,8,8");
  c.set("loss.rec", "5.0");
  c.set("edge.low", "0.05");
  TrainConfig t = train_config_from(c);
  EXPECT_EQ(t.batch_size, 4);
  EXPECT_EQ(t.steps, 10);
  EXPECT_EQ(t.gen_channels, (std::vector<int>{8, 8, 8, 8, 8, 8}));
  EXPECT_DOUBLE_EQ(t.edge.low, 0.05);
  LossWeights w = loss_weights_from(c);
  EXPECT_DOUBLE_EQ(w.rec, 5.0);
  EXPECT_DOUBLE_EQ(w.gan, 1.0);  // default untouched

  TrainConfig bad;
  bad.image_size = 48;  // not a power of two
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);                       // missing subcommand
  EXPECT_EQ(run_cli("frobnicate"), 2);             // unknown subcommand
  EXPECT_EQ(run_cli("compress onlyone.png"), 2);   // missing positional
}

TEST(Cli, MissingCheckpointExitsTwo) {
  fs::path d = tmp_dir("cc_cli_nock");
  fs::path img = d / "x.png";
  save_image(Image(64, 64, 3, 0.5), img.string());
  EXPECT_EQ(run_cli("compress " + img.string() + " " + (d / "x.ccb").string() +
                    " --checkpoint-dir " + (d / "none").string()),
            2);
}

TEST(Cli, GenDatasetDeterministicAndCounted) {
  fs::path d1 = tmp_dir("cc_cli_ds1"), d2 = tmp_dir("cc_cli_ds2");
  EXPECT_EQ(run_cli("gen-dataset " + d1.string() + " --count 3 --size 32 --seed 9"), 0);
  EXPECT_EQ(run_cli("gen-dataset " + d2.string() + " --count 3 --size 32 --seed 9"), 0);
  int count = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    ++count;
    EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename()));
  }
  EXPECT_EQ(count, 6);
}

TEST(Cli, PrintBppReadsStreamWithoutModels) {
  ConceptualBitstream bs;
  bs.height = 256;
  bs.width = 256;
  std::size_t header = bs.byte_size();
  bs.structure.assign(512, 0x01);
  bs.texture.assign(1024 - header - 512, 0x02);
  fs::path d = tmp_dir("cc_cli_bpp");
  fs::path p = d / "s.ccb";
  write_bitstream(bs, p.string());
  std::string cmd = std::string(CCODEC_BIN) + " decompress " + p.string() +
                    " --print-bpp > " + (d / "out.txt").string() + " 2>/dev/null";
  ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
  std::ifstream is(d / "out.txt");
  std::string word, val;
  is >> word >> val;
  EXPECT_EQ(word, "bpp");
  EXPECT_NEAR(std::stod(val), 0.125, 1e-9);
}

TEST(Cli, CorruptStreamExitsOne) {
  fs::path d = tmp_dir("cc_cli_corrupt");
  fs::path p = d / "bad.ccb";
  std::ofstream(p, std::ios::binary) << "this is not a bitstream";
  EXPECT_EQ(run_cli("decompress " + p.string() + " out.png"), 1);
}

TEST(Cli, UnknownConfigKeysExitTwo) {
  fs::path d = tmp_dir("cc_cli_cfg");
  fs::path cfg = d / "t.cfg";
  std::ofstream(cfg) << "definitely_not_a_key = 1\n";
  EXPECT_EQ(run_cli("--config " + cfg.string() + " train " + d.string()), 2);
}
