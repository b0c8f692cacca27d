#include "scenconf/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scenconf {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t root_seed, uint64_t index) {
  uint64_t s = root_seed;
  uint64_t a = splitmix64(s);
  s = a ^ (index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  uint64_t b = splitmix64(s);
  return b ? b : 0x1ULL;  // mt19937_64 accepts 0, but keep seeds nonzero anyway
}

double Rng::normal(double mean, double sd) {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double z = std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * std::numbers::pi * u2);
  return mean + sd * z;
}

double ScoreDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return rng.uniform(p0, p1);
    case Kind::gaussian:
      return rng.normal(p0, p1);
  }
  throw std::logic_error("unreachable distribution kind");
}

double ScoreDistribution::cdf(double x) const {
  switch (kind) {
    case Kind::uniform:
      if (x <= p0) return 0.0;
      if (x >= p1) return 1.0;
      return (x - p0) / (p1 - p0);
    case Kind::gaussian:
      return 0.5 * std::erfc(-(x - p0) / (p1 * std::numbers::sqrt2));
  }
  throw std::logic_error("unreachable distribution kind");
}

ScoreDistribution ScoreDistribution::parse(const std::string& name) {
  if (name == "uniform") return uniform01();
  if (name == "gaussian") return gaussian(0.0, 1.0);
  throw std::invalid_argument("unknown distribution: " + name);
}

}  // namespace scenconf
