#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ccodec/autograd.hpp"
#include "ccodec/common.hpp"
#include "ccodec/tensor.hpp"

namespace ccodec::nn {

inline void he_init(Param& p, Rng& rng, int fan_in) {
  double std = std::sqrt(2.0 / fan_in);
  for (double& x : p.val.v) x = rng.normal() * std;
}

struct Conv2d {
  Param w, b;
  int stride = 1, pad = 1;

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride_, int pad_, Rng& rng)
      : w(name + ".w", {out_ch, in_ch, k, k}), b(name + ".b", {out_ch}), stride(stride_), pad(pad_) {
    he_init(w, rng, in_ch * k * k);
  }

  Var operator()(Graph& g, Var x) { return conv2d(g, x, g.use(w), g.use(b), stride, pad); }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

struct Linear {
  Param w, b;

  Linear() = default;
  Linear(const std::string& name, int in_dim, int out_dim, Rng& rng)
      : w(name + ".w", {out_dim, in_dim}), b(name + ".b", {out_dim}) {
    he_init(w, rng, in_dim);
  }

  Var operator()(Graph& g, Var x) { return linear(g, x, g.use(w), g.use(b)); }

  void collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// Adam with optional global-norm gradient clipping.
struct Adam {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // <= 0 disables clipping
  long long t = 0;

  void step(const std::vector<Param*>& params) {
    ++t;
    double scale = 1.0;
    if (clip_norm > 0) {
      double sq = 0.0;
      for (Param* p : params)
        for (double gx : p->grad.v) sq += gx * gx;
      double norm = std::sqrt(sq);
      if (norm > clip_norm) scale = clip_norm / norm;
    }
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Param* p : params) {
      for (std::size_t i = 0; i < p->val.v.size(); ++i) {
        double gx = p->grad.v[i] * scale;
        p->m.v[i] = beta1 * p->m.v[i] + (1.0 - beta1) * gx;
        p->v2.v[i] = beta2 * p->v2.v[i] + (1.0 - beta2) * gx * gx;
        double mhat = p->m.v[i] / bc1;
        double vhat = p->v2.v[i] / bc2;
        p->val.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  static void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
  }
};

// ---- checkpoint blobs ----
// Layout: 4-byte magic, u8 version, u32 meta count, (u16 len + key,
// u16 len + value)*, u32 param count, per param: u16 name len + name,
// u8 ndim, u32 dims..., raw little-endian doubles. Save/load is bitwise.

using Meta = std::map<std::string, std::string>;

namespace ckpt_detail {
inline void w_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }
inline void w_u16(std::ostream& os, std::uint16_t v) {
  w_u8(os, static_cast<std::uint8_t>(v >> 8));
  w_u8(os, static_cast<std::uint8_t>(v & 0xff));
}
inline void w_u32(std::ostream& os, std::uint32_t v) {
  w_u16(os, static_cast<std::uint16_t>(v >> 16));
  w_u16(os, static_cast<std::uint16_t>(v & 0xffff));
}
inline void w_str(std::ostream& os, const std::string& s) {
  w_u16(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint8_t r_u8(std::istream& is) {
  int c = is.get();
  if (c < 0) throw DecodeError("checkpoint truncated");
  return static_cast<std::uint8_t>(c);
}
inline std::uint16_t r_u16(std::istream& is) {
  std::uint16_t hi = r_u8(is);
  return static_cast<std::uint16_t>(hi << 8 | r_u8(is));
}
inline std::uint32_t r_u32(std::istream& is) {
  std::uint32_t hi = r_u16(is);
  return hi << 16 | r_u16(is);
}
inline std::string r_str(std::istream& is) {
  std::uint16_t n = r_u16(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DecodeError("checkpoint truncated");
  return s;
}
}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const char magic[4], const Meta& meta,
                            const std::vector<Param*>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path);
  os.write(magic, 4);
  ckpt_detail::w_u8(os, 1);
  ckpt_detail::w_u32(os, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    ckpt_detail::w_str(os, k);
    ckpt_detail::w_str(os, v);
  }
  ckpt_detail::w_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    ckpt_detail::w_str(os, p->name);
    ckpt_detail::w_u8(os, static_cast<std::uint8_t>(p->val.shape.size()));
    for (int d : p->val.shape) ckpt_detail::w_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p->val.v.data()),
             static_cast<std::streamsize>(p->val.v.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint " + path);
}

// Reads meta only (to construct the model before loading weights).
inline Meta read_checkpoint_meta(const std::string& path, const char magic[4]) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic (expected " + std::string(magic, 4) + ")");
  std::uint8_t ver = ckpt_detail::r_u8(is);
  if (ver != 1) throw FormatError(path + ": unsupported checkpoint version");
  Meta meta;
  std::uint32_t n = ckpt_detail::r_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string k = ckpt_detail::r_str(is);
    meta[k] = ckpt_detail::r_str(is);
  }
  return meta;
}

inline void load_checkpoint(const std::string& path, const char magic[4],
                            const std::vector<Param*>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0)
    throw FormatError(path + ": bad checkpoint magic (expected " + std::string(magic, 4) + ")");
  if (ckpt_detail::r_u8(is) != 1) throw FormatError(path + ": unsupported checkpoint version");
  std::uint32_t nmeta = ckpt_detail::r_u32(is);
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    ckpt_detail::r_str(is);
    ckpt_detail::r_str(is);
  }
  std::uint32_t np = ckpt_detail::r_u32(is);
  if (np != params.size())
    throw FormatError(path + ": parameter count mismatch (" + std::to_string(np) + " vs " +
                      std::to_string(params.size()) + ")");
  for (Param* p : params) {
    std::string name = ckpt_detail::r_str(is);
    if (name != p->name) throw FormatError(path + ": parameter order mismatch at " + name);
    std::uint8_t ndim = ckpt_detail::r_u8(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(ckpt_detail::r_u32(is));
    if (shape != p->val.shape)
      throw FormatError(path + ": shape mismatch for " + name);
    is.read(reinterpret_cast<char*>(p->val.v.data()),
            static_cast<std::streamsize>(p->val.v.size() * sizeof(double)));
    if (!is) throw DecodeError(path + ": checkpoint truncated in " + name);
  }
}

}  // namespace ccodec::nn
