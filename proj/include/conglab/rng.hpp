#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace conglab {

// Counter-based splittable generator (SplitMix64): the state is a plain
// counter advanced by a fixed odd increment and each output is a bijective
// mix of it, so streams derived from (master_seed, index) are reproducible
// and independent of evaluation order across workers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : state_(state) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_exponential(double rate) { return -std::log1p(-next_uniform()) / rate; }

  bool next_bernoulli(double prob) { return next_uniform() < prob; }

  // Uniform integer in [0, n); multiply-shift bound (bias < n / 2^64).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

 private:
  std::uint64_t state_;
};

// Seed of stream r under a master seed; derivations compose (replicate
// seed, then per-purpose substreams inside a replicate).
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  return RngStream::mix(master_seed + (index + 1) * RngStream::kGamma);
}

inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t index) {
  return RngStream(derive_seed(master_seed, index));
}

}  // namespace conglab
