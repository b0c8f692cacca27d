#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace scenconf {

// Stream-splitting helper: seeds for trial k are derived from the root seed
// so that a run partitioned over any number of threads draws the same numbers.
uint64_t splitmix64(uint64_t& state);
uint64_t derive_seed(uint64_t root_seed, uint64_t index);

// Thin engine wrapper. Uniform and normal variates are generated from raw
// 64-bit draws (not std::*_distribution) so sequences are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, no spare caching: draw count per variate is fixed at two.
  double normal(double mean = 0.0, double sd = 1.0);

 private:
  std::mt19937_64 eng_;
};

// One-dimensional sampling distribution with a closed-form CDF, used both to
// draw scenario samples and as the exact violation oracle.
struct ScoreDistribution {
  enum class Kind { uniform, gaussian };

  Kind kind = Kind::uniform;
  double p0 = 0.0;  // uniform: lower bound; gaussian: mean
  double p1 = 1.0;  // uniform: upper bound; gaussian: standard deviation

  double sample(Rng& rng) const;
  double cdf(double x) const;

  static ScoreDistribution uniform01() { return {Kind::uniform, 0.0, 1.0}; }
  static ScoreDistribution uniform(double lo, double hi) {
    return {Kind::uniform, lo, hi};
  }
  static ScoreDistribution gaussian(double mean, double sd) {
    return {Kind::gaussian, mean, sd};
  }
  static ScoreDistribution parse(const std::string& name);
};

}  // namespace scenconf
