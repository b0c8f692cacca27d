#include "scenconf/families.hpp"

#include <cmath>
#include <stdexcept>

namespace scenconf {

namespace {

constexpr double kScoreBoxHalfWidth = 1e4;
constexpr double kRandomLpBoxHalfWidth = 1e3;

class OrderFamily final : public ProblemFamily {
 public:
  explicit OrderFamily(ScoreDistribution dist) : dist_(dist) {}

  const std::string& name() const override { return name_; }
  int dimension() const override { return 1; }

  SamplePoint draw(Rng& rng) const override { return {dist_.sample(rng)}; }

  LinearScenarioProgram make_program(
      const std::vector<SamplePoint>& samples) const override {
    LinearScenarioProgram p;
    p.dimension = 1;
    p.cost = {1.0};
    p.box = {{-kScoreBoxHalfWidth, kScoreBoxHalfWidth}};
    for (const auto& s : samples) p.constraints.push_back({{-1.0}, -s[0]});
    return p;
  }

  double constraint_value(const std::vector<double>& x,
                          const SamplePoint& omega) const override {
    return omega[0] - x[0];
  }

  bool has_analytic_violation() const override { return true; }

  double analytic_violation(const ScenarioSolution& solution) const override {
    return 1.0 - dist_.cdf(solution.x_star[0]);
  }

 private:
  ScoreDistribution dist_;
  std::string name_ = "order";
};

class IntervalCoverFamily final : public ProblemFamily {
 public:
  explicit IntervalCoverFamily(ScoreDistribution dist) : dist_(dist) {}

  const std::string& name() const override { return name_; }
  int dimension() const override { return 2; }

  SamplePoint draw(Rng& rng) const override { return {dist_.sample(rng)}; }

  LinearScenarioProgram make_program(
      const std::vector<SamplePoint>& samples) const override {
    LinearScenarioProgram p;
    p.dimension = 2;
    p.cost = {0.0, 1.0};  // minimize the radius
    p.box = {{-kScoreBoxHalfWidth, kScoreBoxHalfWidth},
             {0.0, kScoreBoxHalfWidth}};
    for (int i = 0; i < int(samples.size()); ++i) {
      double w = samples[size_t(i)][0];
      p.constraints.push_back({{-1.0, -1.0}, -w});  // center + radius >= w
      p.constraints.push_back({{1.0, -1.0}, w});    // center - radius <= w
      p.row_sample.push_back(i);
      p.row_sample.push_back(i);
    }
    return p;
  }

  double constraint_value(const std::vector<double>& x,
                          const SamplePoint& omega) const override {
    return std::abs(omega[0] - x[0]) - x[1];
  }

  bool has_analytic_violation() const override { return true; }

  double analytic_violation(const ScenarioSolution& solution) const override {
    double lo = solution.x_star[0] - solution.x_star[1];
    double hi = solution.x_star[0] + solution.x_star[1];
    return dist_.cdf(lo) + (1.0 - dist_.cdf(hi));
  }

 private:
  ScoreDistribution dist_;
  std::string name_ = "interval";
};

class RandomLpFamily final : public ProblemFamily {
 public:
  explicit RandomLpFamily(int d) : d_(d) {
    if (d < 1) throw std::invalid_argument("random-lp: dimension must be >= 1");
  }

  const std::string& name() const override { return name_; }
  int dimension() const override { return d_; }

  SamplePoint draw(Rng& rng) const override {
    SamplePoint a(static_cast<size_t>(d_));
    for (double& v : a) v = rng.normal();
    return a;
  }

  LinearScenarioProgram make_program(
      const std::vector<SamplePoint>& samples) const override {
    LinearScenarioProgram p;
    p.dimension = d_;
    p.cost.assign(size_t(d_), -1.0 / std::sqrt(double(d_)));
    p.box.assign(size_t(d_), {-kRandomLpBoxHalfWidth, kRandomLpBoxHalfWidth});
    for (const auto& a : samples) p.constraints.push_back({a, 1.0});
    return p;
  }

  double constraint_value(const std::vector<double>& x,
                          const SamplePoint& omega) const override {
    double v = -1.0;
    for (int j = 0; j < d_; ++j) v += omega[size_t(j)] * x[size_t(j)];
    return v;
  }

  bool has_analytic_violation() const override { return false; }

 private:
  int d_;
  std::string name_ = "random-lp";
};

}  // namespace

double ProblemFamily::analytic_violation(const ScenarioSolution&) const {
  throw std::logic_error("family '" + name() +
                         "' has no closed-form violation probability; "
                         "use monte_carlo mode");
}

std::unique_ptr<ProblemFamily> make_order_family(ScoreDistribution dist) {
  return std::make_unique<OrderFamily>(dist);
}

std::unique_ptr<ProblemFamily> make_interval_cover_family(
    ScoreDistribution dist) {
  return std::make_unique<IntervalCoverFamily>(dist);
}

std::unique_ptr<ProblemFamily> make_random_lp_family(int d) {
  return std::make_unique<RandomLpFamily>(d);
}

std::unique_ptr<ProblemFamily> make_family(const std::string& name, int d) {
  if (name == "order") return make_order_family(ScoreDistribution::uniform01());
  if (name == "interval")
    return make_interval_cover_family(ScoreDistribution::uniform01());
  if (name == "random-lp") return make_random_lp_family(d > 0 ? d : 3);
  throw std::invalid_argument("unknown family: " + name);
}

GeneratedInstance generate_instance(const ProblemFamily& family, int m,
                                    Rng& rng) {
  if (m < 1) throw std::invalid_argument("generate_instance: m must be >= 1");
  GeneratedInstance inst;
  inst.samples.reserve(size_t(m));
  for (int i = 0; i < m; ++i) inst.samples.push_back(family.draw(rng));
  inst.program = family.make_program(inst.samples);
  return inst;
}

GeneratedInstance gen_order_problem(ScoreDistribution dist, int m,
                                    uint64_t seed) {
  Rng rng(seed);
  auto fam = make_order_family(dist);
  return generate_instance(*fam, m, rng);
}

GeneratedInstance gen_interval_cover(ScoreDistribution dist, int m,
                                     uint64_t seed) {
  Rng rng(seed);
  auto fam = make_interval_cover_family(dist);
  return generate_instance(*fam, m, rng);
}

GeneratedInstance gen_random_lp(int d, int m, uint64_t seed) {
  Rng rng(seed);
  auto fam = make_random_lp_family(d);
  return generate_instance(*fam, m, rng);
}

ViolationEstimate violation_probability(const ScenarioSolution& solution,
                                        const ProblemFamily& family,
                                        ViolationMode mode, long n_test,
                                        Rng& rng) {
  ViolationEstimate est;
  if (mode == ViolationMode::analytic) {
    if (!family.has_analytic_violation())
      family.analytic_violation(solution);  // throws with guidance
    est.value = family.analytic_violation(solution);
    return est;
  }
  if (n_test < 1)
    throw std::invalid_argument("violation_probability: n_test must be >= 1");
  long hits = 0;
  for (long i = 0; i < n_test; ++i) {
    SamplePoint omega = family.draw(rng);
    if (family.constraint_value(solution.x_star, omega) > 0.0) ++hits;
  }
  est.value = double(hits) / double(n_test);
  est.n_test = n_test;
  est.std_error =
      std::sqrt(std::max(est.value * (1.0 - est.value), 0.0) / double(n_test));
  return est;
}

}  // namespace scenconf
