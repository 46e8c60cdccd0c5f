#pragma once

#include <cstdint>
#include <optional>

namespace dfa {

/// Seeded, portable random stream.
///
/// The generator is SplitMix64: a 64-bit counter advanced by the golden-ratio
/// increment 0x9E3779B97F4A7C15 and passed through the finalizer
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z =  z ^ (z >> 31)
/// Uniform doubles take the top 53 bits: u = ((x >> 11) + 1) * 2^-53, so
/// u lies in (0, 1]. Normals use Box-Muller on a pair (u1, u2):
///   r = sqrt(-2 ln u1), z0 = r cos(2 pi u2), z1 = r sin(2 pi u2),
/// returning z0 first and z1 on the following call.
///
/// Integer operations are exact everywhere; normal draws are reproducible
/// bit-for-bit wherever libm's log/cos/sin are correctly rounded (glibc).
class Prng {
 public:
  explicit Prng(std::uint64_t seed) noexcept : seed_(seed), state_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform on (0, 1].
  double uniform() noexcept;

  /// Uniform integer in [0, n) without modulo bias. n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal.
  double normal() noexcept;

  /// Independent stream keyed by (seed, stream); does not advance this one.
  Prng fork(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  std::optional<double> spare_;
};

/// SplitMix64 finalizer; also used to derive seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// 64-bit FNV-1a over raw bytes, chainable through `basis`.
std::uint64_t fnv1a(const void* data, std::size_t bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

}  // namespace dfa
