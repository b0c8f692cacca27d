#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scenconf/rng.hpp"
#include "scenconf/scenario.hpp"

// Randomized scenario-program families. A family knows how to draw samples,
// turn any sample multiset into a program, evaluate the constraint a fresh
// sample induces at a candidate point, and (where the sampling distribution
// has a closed-form CDF) compute the exact violation probability of a
// solution.

namespace scenconf {

using SamplePoint = std::vector<double>;

class ProblemFamily {
 public:
  virtual ~ProblemFamily() = default;
  virtual const std::string& name() const = 0;
  virtual int dimension() const = 0;
  virtual SamplePoint draw(Rng& rng) const = 0;
  virtual LinearScenarioProgram make_program(
      const std::vector<SamplePoint>& samples) const = 0;
  // g(x, omega) for a sample that need not be part of any program
  virtual double constraint_value(const std::vector<double>& x,
                                  const SamplePoint& omega) const = 0;
  virtual bool has_analytic_violation() const = 0;
  // P{g(x*, omega) > 0} under the sampling distribution; throws
  // std::logic_error when no closed form exists (use monte_carlo instead)
  virtual double analytic_violation(const ScenarioSolution& solution) const;
};

// min xbar with every score below it: d = 1, optimum is the sample maximum.
std::unique_ptr<ProblemFamily> make_order_family(ScoreDistribution dist);

// Shortest interval covering all points: x = (center, radius), d = 2.
std::unique_ptr<ProblemFamily> make_interval_cover_family(
    ScoreDistribution dist);

// Random half-spaces a.x <= 1 with standard Gaussian a; fixed unit cost.
// No closed-form violation; Monte Carlo only.
std::unique_ptr<ProblemFamily> make_random_lp_family(int d);

// names: "order", "interval", "random-lp"
std::unique_ptr<ProblemFamily> make_family(const std::string& name, int d = 0);

struct GeneratedInstance {
  std::vector<SamplePoint> samples;
  LinearScenarioProgram program;
};

GeneratedInstance generate_instance(const ProblemFamily& family, int m,
                                    Rng& rng);

// Seeded convenience wrappers; identical seeds reproduce identical instances.
GeneratedInstance gen_order_problem(ScoreDistribution dist, int m,
                                    uint64_t seed);
GeneratedInstance gen_interval_cover(ScoreDistribution dist, int m,
                                     uint64_t seed);
GeneratedInstance gen_random_lp(int d, int m, uint64_t seed);

enum class ViolationMode { analytic, monte_carlo };

struct ViolationEstimate {
  double value = 0.0;
  double std_error = 0.0;  // zero in analytic mode
  long n_test = 0;
};

ViolationEstimate violation_probability(const ScenarioSolution& solution,
                                        const ProblemFamily& family,
                                        ViolationMode mode, long n_test,
                                        Rng& rng);

}  // namespace scenconf
