#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace gdcpd {

// Stafford mix 13. Bijective on 64 bits with strong avalanche, which is what
// lets us treat (seed, stream) pairs as independent generators.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Counter-based generator: draw k of stream s depends only on (seed, s, k).
// Simulations key one stream per time step, so a path prefix is unchanged by
// anything that happens to later steps, and sub-streams never alias.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : state_(mix64(seed ^ mix64(stream + 0x9e3779b97f4a7c15ULL))) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform on (0, 1); the half-ulp offset keeps both endpoints out.
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Box-Muller. Always consumes exactly two uniforms, no caching, so the
  // draw count per call is fixed.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept {
    return mean + stddev * normal();
  }

  // Knuth's product method; fine for the small per-step means used here.
  int poisson(double mean) noexcept {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_;
};

// Derives a child seed from a root seed and a stage label, so every stage of
// a run draws from its own reproducible stream.
inline std::uint64_t substream_seed(std::uint64_t root,
                                    std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label bytes
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(root ^ h);
}

}  // namespace gdcpd
