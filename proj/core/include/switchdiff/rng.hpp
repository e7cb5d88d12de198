#ifndef SWITCHDIFF_RNG_HPP
#define SWITCHDIFF_RNG_HPP

#include <cmath>
#include <cstdint>

namespace switchdiff {

/// Counter-based random stream: draw k of stream s under seed is a pure
/// function of (seed, s, k).  Ensembles indexed by stream are therefore
/// reproducible under any execution schedule.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), key_(derive_key(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return mix(key_ + counter_++ * kGamma); }

  /// Uniform on [0,1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; the pair member is cached so the
  /// draw sequence is a fixed function of the counter.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0,1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  double exponential(double rate) {
    return -std::log(1.0 - uniform()) / rate;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed + kGamma) ^ mix(stream * kGamma + 0x6A09E667F3BCC909ULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace switchdiff

#endif
