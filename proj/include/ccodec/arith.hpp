#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <vector>

#include "ccodec/common.hpp"

namespace ccodec {

class BitWriter {
 public:
  void put(int bit) {
    if (nbits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (nbits_ % 8));
    ++nbits_;
  }
  std::uint32_t bit_count() const { return static_cast<std::uint32_t>(nbits_); }
  const Bytes& bytes() const { return bytes_; }

 private:
  Bytes bytes_;
  std::size_t nbits_ = 0;
};

// Reads exactly `bit_len` real bits, then yields zero padding (the
// arithmetic decoder legitimately looks a few bits past the stream end).
// Truncated buffers are rejected up front with the failing byte offset.
class BitReader {
 public:
  BitReader(const std::uint8_t* data, std::size_t size, std::uint32_t bit_len)
      : data_(data), bit_len_(bit_len) {
    std::size_t need = (bit_len + 7) / 8;
    if (size < need)
      throw DecodeError("coded payload truncated at byte offset " + std::to_string(size) +
                        " (need " + std::to_string(need) + " bytes)");
  }
  int get() {
    if (pos_ >= bit_len_) return 0;
    int bit = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1;
    ++pos_;
    return bit;
  }

 private:
  const std::uint8_t* data_;
  std::uint32_t bit_len_;
  std::uint32_t pos_ = 0;
};

// Integer arithmetic coder, 32-bit state, cumulative-frequency interface.
// Total frequency must not exceed kMaxTotal.
class ArithEncoder {
 public:
  static constexpr std::uint32_t kMaxTotal = 1u << 16;

  explicit ArithEncoder(BitWriter& out) : out_(out) {}

  void encode(std::uint32_t cum_lo, std::uint32_t cum_hi, std::uint32_t tot) {
    std::uint64_t range = high_ - low_ + 1;
    high_ = low_ + range * cum_hi / tot - 1;
    low_ = low_ + range * cum_lo / tot;
    for (;;) {
      if (high_ < kHalf) {
        emit(0);
      } else if (low_ >= kHalf) {
        emit(1);
        low_ -= kHalf;
        high_ -= kHalf;
      } else if (low_ >= kQuarter && high_ < 3 * kQuarter) {
        ++pending_;
        low_ -= kQuarter;
        high_ -= kQuarter;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
    }
  }

  void finish() {
    ++pending_;
    emit(low_ >= kQuarter ? 1 : 0);
  }

 private:
  static constexpr std::uint64_t kHalf = 1ull << 31;
  static constexpr std::uint64_t kQuarter = 1ull << 30;

  void emit(int bit) {
    out_.put(bit);
    for (; pending_ > 0; --pending_) out_.put(!bit);
  }

  BitWriter& out_;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = (1ull << 32) - 1;
  std::uint64_t pending_ = 0;
};

class ArithDecoder {
 public:
  explicit ArithDecoder(BitReader& in) : in_(in) {
    for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | in_.get();
  }

  // Cumulative-frequency slot of the next symbol; caller locates the symbol
  // then confirms with update().
  std::uint32_t target(std::uint32_t tot) const {
    std::uint64_t range = high_ - low_ + 1;
    return static_cast<std::uint32_t>(((value_ - low_ + 1) * tot - 1) / range);
  }

  void update(std::uint32_t cum_lo, std::uint32_t cum_hi, std::uint32_t tot) {
    std::uint64_t range = high_ - low_ + 1;
    high_ = low_ + range * cum_hi / tot - 1;
    low_ = low_ + range * cum_lo / tot;
    for (;;) {
      if (high_ < kHalf) {
        // nothing
      } else if (low_ >= kHalf) {
        low_ -= kHalf;
        high_ -= kHalf;
        value_ -= kHalf;
      } else if (low_ >= kQuarter && high_ < 3 * kQuarter) {
        low_ -= kQuarter;
        high_ -= kQuarter;
        value_ -= kQuarter;
      } else {
        break;
      }
      low_ <<= 1;
      high_ = (high_ << 1) | 1;
      value_ = (value_ << 1) | in_.get();
    }
  }

 private:
  static constexpr std::uint64_t kHalf = 1ull << 31;
  static constexpr std::uint64_t kQuarter = 1ull << 30;

  BitReader& in_;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = (1ull << 32) - 1;
  std::uint64_t value_ = 0;
};

// Adaptive binary model: per-context symbol counts, Laplace (1,1) init.
class AdaptiveBitModel {
 public:
  explicit AdaptiveBitModel(std::size_t num_contexts) : counts_(num_contexts, {1, 1}) {}

  void encode(ArithEncoder& enc, std::size_t ctx, int bit) {
    auto& c = counts_[ctx];
    std::uint32_t tot = c[0] + c[1];
    if (bit)
      enc.encode(c[0], tot, tot);
    else
      enc.encode(0, c[0], tot);
    bump(c, bit);
  }

  int decode(ArithDecoder& dec, std::size_t ctx) {
    auto& c = counts_[ctx];
    std::uint32_t tot = c[0] + c[1];
    int bit = dec.target(tot) >= c[0] ? 1 : 0;
    if (bit)
      dec.update(c[0], tot, tot);
    else
      dec.update(0, c[0], tot);
    bump(c, bit);
    return bit;
  }

 private:
  void bump(std::array<std::uint32_t, 2>& c, int bit) {
    ++c[bit];
    if (c[0] + c[1] >= ArithEncoder::kMaxTotal) {
      c[0] = (c[0] + 1) / 2;
      c[1] = (c[1] + 1) / 2;
    }
  }
  std::vector<std::array<std::uint32_t, 2>> counts_;
};

}  // namespace ccodec
