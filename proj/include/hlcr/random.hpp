#pragma once

// Deterministic random numbers. All draws go through xoshiro256** and
// hand-written samplers so that identical seeds give identical bytes on every
// platform (std:: distributions are implementation-defined).

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace hlcr {

inline constexpr std::string_view kRngAlgorithm = "xoshiro256**/splitmix64-v1";

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view text);

/// Sub-seed derivation by labeled hashing: the same (seed, label, a, b) always
/// yields the same stream seed, distinct labels yield unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t a = 0,
                          std::uint64_t b = 0);

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1].
  double uniform_pos();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();
  /// log of a Gamma(shape, 1) draw; -inf for shape == 0. Stays finite for tiny
  /// shapes where the draw itself would underflow.
  double log_gamma_draw(double shape);
  double gamma(double shape);
  std::uint64_t poisson(double mean);
  std::vector<double> dirichlet(std::span<const double> concentration);
  /// Draws an index with probability proportional to weights (non-negative,
  /// positive sum).
  std::size_t categorical(std::span<const double> weights);

  const std::array<std::uint64_t, 4>& state() const { return s_; }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }
  std::uint64_t operator()() { return next(); }

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace hlcr
