#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccodec {

// Error taxonomy. CLI maps ConfigError/ArgumentError to exit code 2,
// everything else to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct DecodeError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

using Bytes = std::vector<std::uint8_t>;

// Big-endian field helpers for payload/container headers.
inline void put_u8(Bytes& b, std::uint8_t v) { b.push_back(v); }
inline void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
}
inline void put_u32(Bytes& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const Bytes& b) : ByteReader(b.data(), b.size()) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = (static_cast<std::uint32_t>(data_[pos_]) << 24) |
                      (static_cast<std::uint32_t>(data_[pos_ + 1]) << 16) |
                      (static_cast<std::uint32_t>(data_[pos_ + 2]) << 8) |
                      static_cast<std::uint32_t>(data_[pos_ + 3]);
    pos_ += 4;
    return v;
  }
  const std::uint8_t* bytes(std::size_t n) {
    need(n);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_)
      throw DecodeError("truncated stream at byte offset " + std::to_string(pos_) +
                        " (need " + std::to_string(n) + ", have " +
                        std::to_string(size_ - pos_) + ")");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace ccodec
