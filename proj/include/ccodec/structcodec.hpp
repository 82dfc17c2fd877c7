#pragma once

#include <cstdint>
#include <string>

#include "ccodec/arith.hpp"
#include "ccodec/common.hpp"
#include "ccodec/image.hpp"

namespace ccodec {

// Transport form of the downsampled structural map.
// Byte layout (big-endian): u16 low_h, u16 low_w, u8 scale, u32 bit-length,
// arithmetic-coded bits padded to a byte boundary.
struct StructurePayload {
  int low_h = 0;
  int low_w = 0;
  int scale = 4;
  std::uint32_t bit_length = 0;
  Bytes coded;

  Bytes serialize() const {
    Bytes out;
    put_u16(out, static_cast<std::uint16_t>(low_h));
    put_u16(out, static_cast<std::uint16_t>(low_w));
    put_u8(out, static_cast<std::uint8_t>(scale));
    put_u32(out, bit_length);
    out.insert(out.end(), coded.begin(), coded.end());
    return out;
  }

  static StructurePayload parse(const Bytes& b) {
    ByteReader r(b);
    StructurePayload p;
    p.low_h = r.u16();
    p.low_w = r.u16();
    p.scale = r.u8();
    p.bit_length = r.u32();
    std::size_t nbytes = (p.bit_length + 7) / 8;
    if (r.remaining() != nbytes)
      throw DecodeError("structure payload length mismatch at byte offset " +
                        std::to_string(r.pos()) + ": declared " + std::to_string(nbytes) +
                        " coded bytes, found " + std::to_string(r.remaining()));
    const std::uint8_t* d = r.bytes(nbytes);
    p.coded.assign(d, d + nbytes);
    return p;
  }
};

namespace detail {

// 10-pixel causal template: 3 pixels two rows up, 5 one row up, 2 to the
// left. Out-of-bounds neighbors read as 0.
inline std::size_t edge_context(const StructuralMap& m, int y, int x) {
  auto bit = [&](int yy, int xx) -> std::size_t {
    if (yy < 0 || xx < 0 || xx >= m.width) return 0;
    return m.at(yy, xx);
  };
  std::size_t ctx = 0;
  ctx = (ctx << 1) | bit(y - 2, x - 1);
  ctx = (ctx << 1) | bit(y - 2, x);
  ctx = (ctx << 1) | bit(y - 2, x + 1);
  ctx = (ctx << 1) | bit(y - 1, x - 2);
  ctx = (ctx << 1) | bit(y - 1, x - 1);
  ctx = (ctx << 1) | bit(y - 1, x);
  ctx = (ctx << 1) | bit(y - 1, x + 1);
  ctx = (ctx << 1) | bit(y - 1, x + 2);
  ctx = (ctx << 1) | bit(y, x - 2);
  ctx = (ctx << 1) | bit(y, x - 1);
  return ctx;
}

constexpr std::size_t kEdgeContexts = 1u << 10;

}  // namespace detail

// Lossless context-adaptive coding of a binary map.
inline StructurePayload encode_map(const StructuralMap& map, int scale = 4) {
  if (map.height <= 0 || map.width <= 0) throw ArgumentError("encode_map: empty map");
  if (map.height > 0xffff || map.width > 0xffff)
    throw ArgumentError("encode_map: dimensions exceed u16 header field");
  BitWriter bw;
  ArithEncoder enc(bw);
  AdaptiveBitModel model(detail::kEdgeContexts);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      model.encode(enc, detail::edge_context(map, y, x), map.at(y, x));
  enc.finish();

  StructurePayload p;
  p.low_h = map.height;
  p.low_w = map.width;
  p.scale = scale;
  p.bit_length = bw.bit_count();
  p.coded = bw.bytes();
  return p;
}

inline StructuralMap decode_map(const StructurePayload& payload) {
  if (payload.low_h <= 0 || payload.low_w <= 0)
    throw DecodeError("structure payload header declares empty map");
  StructuralMap map(payload.low_h, payload.low_w);
  BitReader br(payload.coded.data(), payload.coded.size(), payload.bit_length);
  ArithDecoder dec(br);
  AdaptiveBitModel model(detail::kEdgeContexts);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      map.at(y, x) = static_cast<std::uint8_t>(model.decode(dec, detail::edge_context(map, y, x)));
  return map;
}

}  // namespace ccodec
