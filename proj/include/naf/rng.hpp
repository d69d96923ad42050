#pragma once

#include <cstdint>
#include <string_view>

namespace naf {

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream key from a parent key and a tag.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag) {
  return mix64(key ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

std::uint64_t hash_string(std::string_view s);

// Counter-based generator: draw i of stream `key` is mix64(key + i * gamma),
// so any draw can be recomputed without replaying the stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next() { return at(counter_++); }
  std::uint64_t at(std::uint64_t i) const {
    return mix64(key_ + i * 0xd1b54a32d192ed03ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform in (0, 1]; safe as a logarithm argument.
  double uniform_open0() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }
  std::uint64_t below(std::uint64_t bound);

  // Standard normal pair from one Box-Muller transform.
  void normal_pair(double& z0, double& z1);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace naf
