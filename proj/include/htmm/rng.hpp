#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace htmm {

std::uint64_t mix64(std::uint64_t z);

// Counter-based generator: output k of a stream is mix64(key + k * golden),
// i.e. SplitMix64 with a per-stream key. Streams are derived by hashing a
// path of identifiers (seed, replicate, fluorophore, ...), so any unit of
// work can construct its own generator without shared state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) : key_(key) {}

  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    counter_ += 1;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace htmm
