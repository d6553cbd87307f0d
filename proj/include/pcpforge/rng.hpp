#pragma once

#include <cstdint>
#include <limits>

#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace pcpforge {

// Counter-based generator: output i of stream (seed, id) is a keyed mix of i.
// Independent streams are derived from (seed, stream id), so a trial's draws
// never depend on which worker runs it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + stream * 0x9e3779b97f4a7c15ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  // Child stream, deterministic in (this key, id); does not advance this generator.
  Rng derive(std::uint64_t id) const {
    Rng r(0);
    r.key_ = mix(key_ ^ mix(id + 0xbb67ae8584caa73bULL));
    return r;
  }

  std::uint64_t uniform(std::uint64_t n) {
    boost::random::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
    return dist(*this);
  }

  double uniform01() {
    boost::random::uniform_01<double> dist;
    return dist(*this);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stable 64-bit hash of a byte string (keyed per-query randomness for table oracles).
inline std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL ^ Rng::mix(seed);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return Rng::mix(h);
}

}  // namespace pcpforge
