#include "hlcr/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hlcr {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t st = seed ^ fnv1a64(label);
  std::uint64_t h = splitmix64(st);
  st ^= a * 0xD1B54A32D192ED03ULL;
  h ^= splitmix64(st);
  st ^= b * 0x8CB92BA72F3D8DD7ULL;
  h ^= splitmix64(st);
  return h;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

std::uint64_t Rng::next() {
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

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform_pos() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::log_gamma_draw(double shape) {
  if (shape < 0.0 || !std::isfinite(shape)) throw std::invalid_argument("gamma: bad shape");
  if (shape == 0.0) return -std::numeric_limits<double>::infinity();
  if (shape < 1.0) {
    // G(a) = G(a + 1) * U^(1/a), kept in log space.
    return log_gamma_draw(shape + 1.0) + std::log(uniform_pos()) / shape;
  }
  // Marsaglia & Tsang.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v);
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

double Rng::gamma(double shape) { return std::exp(log_gamma_draw(shape)); }

std::uint64_t Rng::poisson(double mean) {
  if (mean < 0.0 || !std::isfinite(mean)) throw std::invalid_argument("poisson: bad mean");
  // Knuth's product method on chunks of mean <= 10; a Poisson sum is Poisson.
  std::uint64_t total = 0;
  double remaining = mean;
  while (remaining > 0.0) {
    const double chunk = remaining > 10.0 ? 10.0 : remaining;
    remaining -= chunk;
    const double limit = std::exp(-chunk);
    double p = uniform_pos();
    while (p > limit) {
      ++total;
      p *= uniform_pos();
    }
  }
  return total;
}

std::vector<double> Rng::dirichlet(std::span<const double> concentration) {
  std::vector<double> logs(concentration.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < concentration.size(); ++k) {
    logs[k] = log_gamma_draw(concentration[k]);
    mx = std::max(mx, logs[k]);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("dirichlet: all concentrations zero");
  double sum = 0.0;
  for (auto& v : logs) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logs) v /= sum;
  return logs;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last_positive = k;
    if (u < acc) return k;
  }
  return last_positive;
}

}  // namespace hlcr
