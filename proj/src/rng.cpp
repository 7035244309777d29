#include <cmath>
#include <numbers>

#include "censreg/sim.hpp"

namespace censreg::sim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double Variates::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Variates::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Variates::normal(double mean, double variance) {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std::sqrt(variance) * z;
}

bool Variates::bernoulli(double p) { return uniform() < p; }

double Variates::weibull(double shape, double scale) {
  const double e = -std::log1p(-uniform());
  return scale * std::pow(e, 1.0 / shape);
}

}  // namespace censreg::sim
