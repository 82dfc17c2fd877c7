#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "ccodec/common.hpp"
#include "ccodec/edge.hpp"
#include "ccodec/image.hpp"
#include "ccodec/models.hpp"
#include "ccodec/resample.hpp"
#include "ccodec/structcodec.hpp"
#include "ccodec/texcodec.hpp"

namespace ccodec {

constexpr std::uint8_t kBitstreamVersion = 1;
constexpr std::uint8_t kFlagFullResStructure = 0x01;  // scale=1 bypass (ablation)
constexpr int kStructureScale = 4;

// Container: magic 'CCB1', u8 version, u16 height, u16 width, u8 flags,
// u32 structure length + bytes, u32 texture length + bytes. Big-endian.
struct ConceptualBitstream {
  int height = 0;
  int width = 0;
  std::uint8_t flags = 0;
  Bytes structure;  // serialized StructurePayload
  Bytes texture;    // serialized TexturePayload

  Bytes serialize() const {
    Bytes out;
    out.insert(out.end(), {'C', 'C', 'B', '1'});
    put_u8(out, kBitstreamVersion);
    put_u16(out, static_cast<std::uint16_t>(height));
    put_u16(out, static_cast<std::uint16_t>(width));
    put_u8(out, flags);
    put_u32(out, static_cast<std::uint32_t>(structure.size()));
    out.insert(out.end(), structure.begin(), structure.end());
    put_u32(out, static_cast<std::uint32_t>(texture.size()));
    out.insert(out.end(), texture.begin(), texture.end());
    return out;
  }

  static ConceptualBitstream parse(const Bytes& b) {
    ByteReader r(b);
    const std::uint8_t* magic = r.bytes(4);
    if (std::memcmp(magic, "CCB1", 4) != 0)
      throw FormatError("not a conceptual bitstream (bad magic)");
    std::uint8_t version = r.u8();
    if (version != kBitstreamVersion)
      throw FormatError("unsupported bitstream version " + std::to_string(version));
    ConceptualBitstream bs;
    bs.height = r.u16();
    bs.width = r.u16();
    if (bs.height == 0 || bs.width == 0)
      throw DecodeError("bitstream header declares empty image");
    bs.flags = r.u8();
    if (bs.flags & ~kFlagFullResStructure)
      throw DecodeError("unknown flag bits 0x" + std::to_string(bs.flags));
    std::uint32_t slen = r.u32();
    if (slen > r.remaining())
      throw DecodeError("structure payload length " + std::to_string(slen) +
                        " exceeds remaining " + std::to_string(r.remaining()) + " bytes");
    const std::uint8_t* sp = r.bytes(slen);
    bs.structure.assign(sp, sp + slen);
    std::uint32_t tlen = r.u32();
    if (tlen != r.remaining())
      throw DecodeError("texture payload length " + std::to_string(tlen) +
                        " does not match remaining " + std::to_string(r.remaining()) + " bytes");
    const std::uint8_t* tp = r.bytes(tlen);
    bs.texture.assign(tp, tp + tlen);
    return bs;
  }

  std::size_t byte_size() const {
    return 4 + 1 + 2 + 2 + 1 + 4 + structure.size() + 4 + texture.size();
  }
};

inline double bpp(const ConceptualBitstream& bs, int h, int w) {
  if (h <= 0 || w <= 0) throw ArgumentError("bpp: dimensions must be positive");
  return 8.0 * static_cast<double>(bs.byte_size()) / (static_cast<double>(h) * w);
}

// Codec-level configuration shared by compress/decompress.
struct CodecConfig {
  EdgeConfig edge;
  double down_threshold = 0.1;  // re-binarization after Lanczos downsampling
  double sr_threshold = 0.5;    // re-binarization after super-resolution
  int qp = 20;
  bool full_res_structure = false;
};

// The three trained networks the codec needs.
struct ModelSet {
  TextureEncoderNet encoder;
  Generator generator;
  EdgeSRNet edge_sr;

  static ModelSet load(const std::string& dir) {
    namespace fs = std::filesystem;
    auto want = [&](const char* name) {
      std::string p = (fs::path(dir) / name).string();
      if (!fs::exists(p)) throw ConfigError("missing checkpoint: " + p);
      return p;
    };
    nn::Rng rng(0);
    ModelSet ms{TextureEncoderNet::from_checkpoint(want("texenc.ckpt")),
                Generator::from_checkpoint(want("hfgan.ckpt")), EdgeSRNet(rng)};
    ms.edge_sr.load(want("edgesr.ckpt"));
    return ms;
  }

  void save(const std::string& dir) {
    std::filesystem::create_directories(dir);
    namespace fs = std::filesystem;
    encoder.save((fs::path(dir) / "texenc.ckpt").string());
    generator.save((fs::path(dir) / "hfgan.ckpt").string());
    edge_sr.save((fs::path(dir) / "edgesr.ckpt").string());
  }
};

// Structure layer: edge map -> downsample -> binary coder payload.
inline Bytes encode_structure_layer(const StructuralMap& edges, const CodecConfig& cfg) {
  if (cfg.full_res_structure) return encode_map(edges, 1).serialize();
  Image low = lanczos_resample_unit(map_to_image(edges), 1, kStructureScale);
  StructuralMap low_map = binarize(low, cfg.down_threshold);
  return encode_map(low_map, kStructureScale).serialize();
}

inline StructuralMap decode_structure_layer(const Bytes& payload_bytes, ModelSet& models,
                                            int height, int width, double sr_threshold) {
  StructurePayload payload = StructurePayload::parse(payload_bytes);
  StructuralMap low = decode_map(payload);
  StructuralMap full =
      payload.scale == 1 ? low : sr_upsample(models.edge_sr, low, sr_threshold);
  if (full.height != height || full.width != width)
    throw DecodeError("restored structural map is " + std::to_string(full.height) + "x" +
                      std::to_string(full.width) + ", header says " + std::to_string(height) +
                      "x" + std::to_string(width));
  return full;
}

inline ConceptualBitstream compress(const Image& img, ModelSet& models,
                                    const CodecConfig& cfg = {}) {
  int res = models.generator.cfg.resolution();
  if (img.height != res || img.width != res)
    throw ConfigError("compress: image must be " + std::to_string(res) +
                      " square for the loaded generator, got " + std::to_string(img.height) +
                      "x" + std::to_string(img.width));
  if (img.channels != 3) throw ConfigError("compress: RGB input required");

  ConceptualBitstream bs;
  bs.height = img.height;
  bs.width = img.width;
  bs.flags = cfg.full_res_structure ? kFlagFullResStructure : 0;

  StructuralMap edges = extract_edges(img, cfg.edge);
  bs.structure = encode_structure_layer(edges, cfg);

  // Encode-time latent is the posterior mean (deterministic bitstreams).
  PosteriorGaussian post = encode_texture(models.encoder, img);
  QuantizedTexture qt = quantize(post.mu, cfg.qp);
  bs.texture = entropy_encode(qt).serialize();
  return bs;
}

inline Image decompress(const ConceptualBitstream& bs, ModelSet& models,
                        double sr_threshold = 0.5) {
  StructuralMap full =
      decode_structure_layer(bs.structure, models, bs.height, bs.width, sr_threshold);
  TexturePayload tex = TexturePayload::parse(bs.texture);
  if (tex.d != models.generator.cfg.d)
    throw DecodeError("texture payload dimension " + std::to_string(tex.d) +
                      " does not match generator latent dimension " +
                      std::to_string(models.generator.cfg.d));
  std::vector<double> z = dequantize(entropy_decode(tex));
  return generate(models.generator, z, full);
}

// ---- compressed-domain manipulation ----

inline ConceptualBitstream swap_texture(const ConceptualBitstream& a,
                                        const ConceptualBitstream& b) {
  TexturePayload ta = TexturePayload::parse(a.texture);
  TexturePayload tb = TexturePayload::parse(b.texture);
  if (ta.d != tb.d || ta.qp != tb.qp)
    throw ArgumentError("swap_texture: incompatible texture payloads (d/qp differ)");
  ConceptualBitstream out = a;
  out.texture = b.texture;
  return out;
}

inline ConceptualBitstream replace_structure(const ConceptualBitstream& bs,
                                             const StructuralMap& edited_map,
                                             const CodecConfig& cfg = {}) {
  if (edited_map.height != bs.height || edited_map.width != bs.width)
    throw ArgumentError("replace_structure: map dims do not match bitstream header");
  ConceptualBitstream out = bs;
  CodecConfig c = cfg;
  c.full_res_structure = (bs.flags & kFlagFullResStructure) != 0;
  out.structure = encode_structure_layer(edited_map, c);
  return out;
}

// ---- .ccb file I/O ----

inline void write_bitstream(const ConceptualBitstream& bs, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  Bytes b = bs.serialize();
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!os) throw IoError("failed writing " + path);
}

inline ConceptualBitstream read_bitstream(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  Bytes b((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return ConceptualBitstream::parse(b);
}

}  // namespace ccodec
