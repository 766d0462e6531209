#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sslmatch {

/// Base error for every failed precondition or runtime failure in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a) {
  return mix_seed(mix_seed(base) ^ (a + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

/// Uniform real in [lo, hi) built from raw generator bits so streams are
/// identical across standard library implementations.
inline double uniform(Rng& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Uniform integer in [lo, hi] (inclusive).
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(rng() % span);
}

inline bool coin(Rng& rng) { return (rng() >> 63) != 0; }

}  // namespace sslmatch
