#pragma once

// Reproducible random number streams.
//
// Every path in every estimator draws from its own generator, keyed purely by
// (seed, stream id, path index). Results are therefore independent of thread
// count and scheduling. Normals come from a 128-strip ziggurat.

#include <cmath>
#include <cstdint>

namespace benchtrack {

inline constexpr std::uint64_t kDefaultSeed = 20240424ULL;

// SplitMix64 finalizer (Stafford mix 13). Good avalanche, cheap.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Key for the generator of path `path` inside stream `stream`.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream,
                                std::uint64_t path) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ mix64(stream + 0x517CC1B727220A95ULL));
  k = mix64(k ^ mix64(path + 0x631E2E351C572D36ULL));
  return k;
}

// xoshiro256++ (Blackman/Vigna), seeded through SplitMix64.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t key) {
    std::uint64_t z = key;
    for (auto& w : s_) {
      z += 0x9E3779B97F4A7C15ULL;
      std::uint64_t t = z;
      t = (t ^ (t >> 30)) * 0xBF58476D1CE4E5B9ULL;
      t = (t ^ (t >> 27)) * 0x94D049BB133111EBULL;
      w = t ^ (t >> 31);
    }
    if (!(s_[0] | s_[1] | s_[2] | s_[3])) s_[0] = 1;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

namespace detail {
struct ZigguratTables {
  std::uint64_t kn[128];
  double wn[128];
  double fn[128];
  ZigguratTables();
};
const ZigguratTables& ziggurat_tables();
}  // namespace detail

/// Per-path generator: uniforms in [0,1) and standard normals.
/// `antithetic` flips the sign of every normal (pairing is done by the
/// caller, which runs path 2k and its mirror 2k+1 off the same key).
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path,
          bool antithetic = false)
      : gen_(stream_key(seed, stream, path)), sign_(antithetic ? -1.0 : 1.0) {}

  double u01() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }

  double normal() {
    const auto& z = detail::ziggurat_tables();
    for (;;) {
      const std::uint64_t u = gen_.next();
      const int iz = static_cast<int>(u & 127);
      const std::int64_t hz =
          static_cast<std::int64_t>(u >> 12) - (std::int64_t{1} << 51);
      const std::uint64_t ahz =
          static_cast<std::uint64_t>(hz < 0 ? -hz : hz);
      if (ahz < z.kn[iz]) return sign_ * static_cast<double>(hz) * z.wn[iz];
      const double v = slow_normal(hz, iz);
      if (!std::isnan(v)) return sign_ * v;
    }
  }

 private:
  double slow_normal(std::int64_t hz, int iz);
  Xoshiro256pp gen_;
  double sign_;
};

}  // namespace benchtrack
