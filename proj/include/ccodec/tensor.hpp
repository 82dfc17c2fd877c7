#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ccodec/common.hpp"

namespace ccodec::nn {

// Dense double tensor; 4-D activations use NCHW.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    v.assign(numel_of(shape), fill);
  }

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t numel() const { return v.size(); }

  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

// Deterministic RNG: splitmix-seeded xoshiro-style generator plus explicit
// Box-Muller, so streams are identical across platforms/libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& s : state_) {
      z += 0x9e3779b97f4a7c15ull;
      std::uint64_t x = z;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
      s = x ^ (x >> 31);
    }
  }

  std::uint64_t next_u64() {
    std::uint64_t s0 = state_[0], s1 = state_[1];
    std::uint64_t r = s0 + s1;
    s1 ^= s0;
    state_[0] = ((s0 << 55) | (s0 >> 9)) ^ s1 ^ (s1 << 14);
    state_[1] = (s1 << 36) | (s1 >> 28);
    return r;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_[2];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ccodec::nn
