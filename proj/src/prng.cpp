#include "dfa/prng.hpp"

#include <cmath>
#include <numbers>

namespace dfa {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Prng::next_u64() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

double Prng::uniform() noexcept {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t Prng::below(std::uint64_t n) noexcept {
  // Rejection on the largest multiple of n that fits in 64 bits.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Prng::normal() noexcept {
  if (spare_) {
    double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

Prng Prng::fork(std::uint64_t stream) const noexcept {
  return Prng(mix64(seed_ ^ mix64(stream + kGolden)));
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t basis) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dfa
