#include <gtest/gtest.h>

#include "ccodec/structcodec.hpp"
#include "ccodec/tensor.hpp"

using namespace ccodec;

namespace {
StructuralMap random_map(nn::Rng& rng, int h, int w, double density) {
  StructuralMap m(h, w);
  for (auto& v : m.mask) v = rng.uniform() < density ? 1 : 0;
  return m;
}
}  // namespace

TEST(StructCodec, RoundtripAcrossDensities) {
  nn::Rng rng(11);
  for (double density : {0.0, 0.05, 0.3, 0.5, 0.9, 1.0}) {
    for (auto [h, w] : {std::pair{16, 16}, {64, 64}, {33, 17}, {1, 40}}) {
      StructuralMap m = random_map(rng, h, w, density);
      StructurePayload p = encode_map(m, 4);
      EXPECT_EQ(p.low_h, h);
      EXPECT_EQ(p.low_w, w);
      EXPECT_EQ(p.scale, 4);
      EXPECT_EQ(decode_map(p), m) << "density " << density << " " << h << "x" << w;
    }
  }
}

TEST(StructCodec, AllZeroMapIsTiny) {
  StructuralMap m(64, 64);
  Bytes payload = encode_map(m, 4).serialize();
  EXPECT_LE(payload.size(), 16u);
}

TEST(StructCodec, HalfDensityNearsEntropyLimit) {
  // incompressible input: ~4096 bits of payload, within 10%
  nn::Rng rng(12);
  StructuralMap m = random_map(rng, 64, 64, 0.5);
  Bytes payload = encode_map(m, 4).serialize();
  EXPECT_GE(payload.size(), 461u);
  EXPECT_LE(payload.size(), 563u);
}

TEST(StructCodec, StructuredMapCompressesWell) {
  StructuralMap m(64, 64);
  for (int x = 0; x < 64; ++x) m.at(32, x) = 1;  // one horizontal line
  Bytes payload = encode_map(m, 4).serialize();
  EXPECT_LT(payload.size(), 120u);
  EXPECT_EQ(decode_map(StructurePayload::parse(payload)), m);
}

TEST(StructCodec, SerializeParseByteExact) {
  nn::Rng rng(13);
  StructuralMap m = random_map(rng, 20, 30, 0.2);
  StructurePayload p = encode_map(m, 4);
  Bytes b = p.serialize();
  StructurePayload q = StructurePayload::parse(b);
  EXPECT_EQ(q.low_h, p.low_h);
  EXPECT_EQ(q.low_w, p.low_w);
  EXPECT_EQ(q.scale, p.scale);
  EXPECT_EQ(q.bit_length, p.bit_length);
  EXPECT_EQ(q.coded, p.coded);
  EXPECT_EQ(q.serialize(), b);
}

TEST(StructCodec, TruncationRejected) {
  nn::Rng rng(14);
  StructuralMap m = random_map(rng, 32, 32, 0.4);
  Bytes b = encode_map(m, 4).serialize();
  for (std::size_t cut : {b.size() - 1, b.size() / 2, std::size_t{4}, std::size_t{0}}) {
    Bytes trunc(b.begin(), b.begin() + static_cast<long>(cut));
    EXPECT_THROW(StructurePayload::parse(trunc), DecodeError) << "cut " << cut;
  }
  Bytes extended = b;
  extended.push_back(0);
  EXPECT_THROW(StructurePayload::parse(extended), DecodeError);
}

TEST(StructCodec, EmptyAndOversizeRejected) {
  EXPECT_THROW(encode_map(StructuralMap(), 4), ArgumentError);
  StructurePayload p;
  p.low_h = 0;
  p.low_w = 5;
  EXPECT_THROW(decode_map(p), DecodeError);
}

TEST(StructCodec, ContextTemplateIsCausal) {
  // context of (y,x) must not depend on pixels at or after (y,x) in raster
  // order; flipping a later pixel leaves the context unchanged
  StructuralMap m(8, 8);
  std::size_t before = detail::edge_context(m, 4, 4);
  m.at(4, 4) = 1;
  m.at(4, 5) = 1;
  m.at(5, 0) = 1;
  EXPECT_EQ(detail::edge_context(m, 4, 4), before);
  m.at(3, 4) = 1;  // one row up: part of the template
  EXPECT_NE(detail::edge_context(m, 4, 4), before);
}

TEST(StructCodec, ScaleFieldPreserved) {
  StructuralMap m(16, 16);
  m.at(3, 3) = 1;
  for (int scale : {1, 2, 4, 8}) {
    StructurePayload p = StructurePayload::parse(encode_map(m, scale).serialize());
    EXPECT_EQ(p.scale, scale);
  }
}
