#pragma once

// Seeded, bit-reproducible sampling.
//
// The generator is xoshiro256** (Blackman & Vigna) seeded through
// splitmix64. Gaussians use the Box-Muller transform; the second variate
// of each pair is cached.

#include <so3kit/rotation.hpp>
#include <so3kit/types.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace so3kit {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a base seed with stream coordinates (e.g. sigma index, trial
/// index) into an independent seed. Order of coordinates matters.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t state = seed;
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t c : coords) {
    state = out ^ (c + 0x632be59bd9b4e019ULL);
    out = splitmix64(state);
  }
  return out;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) : Rng(derive_seed(seed, stream)) {}

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Lemire's multiply-shift; bias is below 2^-64 * n, irrelevant here.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double cached_ = 0.0;
  bool has_cached_ = false;
};

inline Mat3d random_gaussian_mat3(Rng& rng) {
  Mat3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = rng.gaussian();
  }
  return m;
}

inline Vec3d random_gaussian_vec3(Rng& rng) {
  const double x = rng.gaussian();
  const double y = rng.gaussian();
  const double z = rng.gaussian();
  return Vec3d(x, y, z);
}

/// Haar-uniform rotation: a normalized Gaussian 4-vector read as a unit quaternion.
inline Rot3 random_rotation(Rng& rng) {
  for (;;) {
    const double w = rng.gaussian();
    const double x = rng.gaussian();
    const double y = rng.gaussian();
    const double z = rng.gaussian();
    if (w * w + x * x + y * y + z * z > 1e-20) return Rot3::from_quaternion(w, x, y, z);
  }
}

}  // namespace so3kit
