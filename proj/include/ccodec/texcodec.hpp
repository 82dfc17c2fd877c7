#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ccodec/arith.hpp"
#include "ccodec/common.hpp"

namespace ccodec {

constexpr int kTexScaleLog2 = 10;  // s = 2^10 in the Q_step formula

// Q_step = 2^((qp-4)/6 - 10)
inline double q_step(int qp) {
  if (qp < 0 || qp > 51) throw ArgumentError("qp must be in [0,51]");
  return std::exp2((qp - 4) / 6.0 - kTexScaleLog2);
}

struct QuantizedTexture {
  std::vector<int> q;  // each within signed 16-bit range
  int qp = 51;
  int scale_log2 = kTexScaleLog2;
  int overflow_count = 0;  // coordinates clamped to the 16-bit range
};

inline QuantizedTexture quantize(const std::vector<double>& z, int qp) {
  double step = q_step(qp);
  QuantizedTexture out;
  out.qp = qp;
  out.q.reserve(z.size());
  for (double x : z) {
    double f = std::floor(x / step);
    int v;
    if (f < -32768.0) {
      v = -32768;
      ++out.overflow_count;
    } else if (f > 32767.0) {
      v = 32767;
      ++out.overflow_count;
    } else {
      v = static_cast<int>(f);
    }
    out.q.push_back(v);
  }
  return out;
}

inline std::vector<double> dequantize(const QuantizedTexture& qt) {
  double step = q_step(qt.qp);
  std::vector<double> z(qt.q.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = qt.q[i] * step;
  return z;
}

// ---- entropy coding of quantized latents ----
//
// Static model: standard normal discretized into bins [q*Q_step,(q+1)*Q_step)
// for |q| <= 1023, plus an escape symbol followed by a raw 16-bit emission.
// The coded bitstream starts with one mode bit: 0 = arithmetic, 1 = raw
// 16-bit fallback (used when the model would exceed the raw size).

namespace detail {

constexpr int kLatentRange = 1023;
constexpr int kLatentSymbols = 2 * kLatentRange + 1;  // in-range bins
constexpr int kEscape = kLatentSymbols;               // symbol index
constexpr std::uint32_t kLatentTotal = 1u << 16;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Real-valued bin probabilities (bins then escape); sums to 1 exactly.
inline std::vector<double> latent_bin_probs(int qp) {
  double step = q_step(qp);
  std::vector<double> p(kLatentSymbols + 1);
  double mass = 0.0;
  for (int q = -kLatentRange; q <= kLatentRange; ++q) {
    double pr = normal_cdf((q + 1) * step) - normal_cdf(q * step);
    p[static_cast<std::size_t>(q + kLatentRange)] = pr;
    mass += pr;
  }
  p[kEscape] = 1.0 - mass;
  return p;
}

// Integer cumulative frequency table, every symbol >= 1, total 2^16.
inline std::vector<std::uint32_t> latent_cum_freq(int qp) {
  auto p = latent_bin_probs(qp);
  int nsym = kLatentSymbols + 1;
  std::uint32_t budget = kLatentTotal - static_cast<std::uint32_t>(nsym);
  std::vector<std::uint32_t> freq(nsym);
  std::uint32_t assigned = 0;
  std::size_t argmax = 0;
  for (int i = 0; i < nsym; ++i) {
    freq[i] = 1 + static_cast<std::uint32_t>(std::llround(p[i] * budget));
    assigned += freq[i];
    if (freq[i] > freq[argmax]) argmax = static_cast<std::size_t>(i);
  }
  // absorb rounding drift into the most probable symbol
  if (assigned > kLatentTotal)
    freq[argmax] -= assigned - kLatentTotal;
  else
    freq[argmax] += kLatentTotal - assigned;
  std::vector<std::uint32_t> cum(nsym + 1, 0);
  for (int i = 0; i < nsym; ++i) cum[i + 1] = cum[i] + freq[i];
  return cum;
}

}  // namespace detail

struct TexturePayload {
  int d = 0;
  int qp = 51;
  std::uint32_t bit_length = 0;
  Bytes coded;

  // Big-endian: u16 d, u8 qp, u32 bit-length, coded bits.
  Bytes serialize() const {
    Bytes out;
    put_u16(out, static_cast<std::uint16_t>(d));
    put_u8(out, static_cast<std::uint8_t>(qp));
    put_u32(out, bit_length);
    out.insert(out.end(), coded.begin(), coded.end());
    return out;
  }

  static TexturePayload parse(const Bytes& b) {
    ByteReader r(b);
    TexturePayload p;
    p.d = r.u16();
    p.qp = r.u8();
    p.bit_length = r.u32();
    if (p.qp > 51) throw DecodeError("texture payload: qp out of range");
    std::size_t nbytes = (p.bit_length + 7) / 8;
    if (r.remaining() != nbytes)
      throw DecodeError("texture payload length mismatch at byte offset " +
                        std::to_string(r.pos()) + ": declared " + std::to_string(nbytes) +
                        " coded bytes, found " + std::to_string(r.remaining()));
    const std::uint8_t* d8 = r.bytes(nbytes);
    p.coded.assign(d8, d8 + nbytes);
    return p;
  }
};

inline TexturePayload entropy_encode(const QuantizedTexture& qt) {
  for (int v : qt.q)
    if (v < -32768 || v > 32767) throw ArgumentError("entropy_encode: symbol out of 16-bit range");

  auto cum = detail::latent_cum_freq(qt.qp);
  BitWriter model_bits;
  {
    model_bits.put(0);  // mode: arithmetic
    ArithEncoder enc(model_bits);
    for (int v : qt.q) {
      if (std::abs(v) <= detail::kLatentRange) {
        int idx = v + detail::kLatentRange;
        enc.encode(cum[idx], cum[idx + 1], detail::kLatentTotal);
      } else {
        enc.encode(cum[detail::kEscape], cum[detail::kEscape + 1], detail::kLatentTotal);
        std::uint32_t raw = static_cast<std::uint32_t>(v + 32768);
        for (int b = 15; b >= 0; --b) {
          int bit = (raw >> b) & 1;
          enc.encode(bit ? 1u : 0u, bit ? 2u : 1u, 2);
        }
      }
    }
    enc.finish();
  }

  std::uint32_t raw_bits = 1 + 16 * static_cast<std::uint32_t>(qt.q.size());
  TexturePayload p;
  p.d = static_cast<int>(qt.q.size());
  p.qp = qt.qp;
  if (model_bits.bit_count() <= raw_bits) {
    p.bit_length = model_bits.bit_count();
    p.coded = model_bits.bytes();
  } else {
    BitWriter raw;
    raw.put(1);  // mode: raw
    for (int v : qt.q) {
      std::uint32_t u = static_cast<std::uint32_t>(v + 32768);
      for (int b = 15; b >= 0; --b) raw.put((u >> b) & 1);
    }
    p.bit_length = raw.bit_count();
    p.coded = raw.bytes();
  }
  return p;
}

inline QuantizedTexture entropy_decode(const TexturePayload& p) {
  QuantizedTexture qt;
  qt.qp = p.qp;
  qt.q.reserve(static_cast<std::size_t>(p.d));
  BitReader br(p.coded.data(), p.coded.size(), p.bit_length);
  int mode = br.get();
  if (mode == 1) {
    for (int i = 0; i < p.d; ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 16; ++b) u = (u << 1) | static_cast<std::uint32_t>(br.get());
      qt.q.push_back(static_cast<int>(u) - 32768);
    }
    return qt;
  }
  auto cum = detail::latent_cum_freq(p.qp);
  ArithDecoder dec(br);
  for (int i = 0; i < p.d; ++i) {
    std::uint32_t t = dec.target(detail::kLatentTotal);
    auto it = std::upper_bound(cum.begin(), cum.end(), t);
    int idx = static_cast<int>(it - cum.begin()) - 1;
    dec.update(cum[idx], cum[idx + 1], detail::kLatentTotal);
    if (idx == detail::kEscape) {
      std::uint32_t raw = 0;
      for (int b = 0; b < 16; ++b) {
        std::uint32_t bt = dec.target(2);
        int bit = bt >= 1 ? 1 : 0;
        dec.update(bit ? 1u : 0u, bit ? 2u : 1u, 2);
        raw = (raw << 1) | static_cast<std::uint32_t>(bit);
      }
      qt.q.push_back(static_cast<int>(raw) - 32768);
    } else {
      qt.q.push_back(idx - detail::kLatentRange);
    }
  }
  return qt;
}

}  // namespace ccodec
