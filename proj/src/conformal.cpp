#include "scenconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "scenconf/prob_bounds.hpp"

namespace scenconf {

namespace {

constexpr double kLevelGuard = 1e-12;

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

ScoreVector::ScoreVector(std::vector<double> raw) : raw_(std::move(raw)) {
  order_.resize(raw_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(), [&](int l, int r) {
    return raw_[size_t(l)] < raw_[size_t(r)];
  });
  sorted_.reserve(raw_.size());
  for (int i : order_) sorted_.push_back(raw_[size_t(i)]);
  for (size_t i = 1; i < sorted_.size(); ++i)
    if (sorted_[i] == sorted_[i - 1]) ++ties_;
}

Fraction f_value(const ScoreVector& calibration, double test_score) {
  const long m = calibration.size();
  long count = 1;  // the test score itself
  for (double v : calibration.raw())
    if (v >= test_score) ++count;
  return Fraction{count, m + 1};
}

namespace {

class IdentityMeasure final : public NonconformityMeasure {
 public:
  ScoreVector scores(const std::vector<SamplePoint>& samples) const override {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) {
      check(s.size() == 1, "identity measure needs one-dimensional samples");
      v.push_back(s[0]);
    }
    return ScoreVector(std::move(v));
  }
};

class ScenarioMeasure final : public NonconformityMeasure {
 public:
  explicit ScenarioMeasure(const ProblemFamily& family) : family_(family) {}

  ScoreVector scores(const std::vector<SamplePoint>& samples) const override {
    LinearScenarioProgram program = family_.make_program(samples);
    ScenarioSolution sol = solve(program);
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) {
      double g = family_.constraint_value(sol.x_star, s);
      // Rows active at the optimum evaluate to rounding noise, not exact
      // zero; snap them so rank counts over the scores are exact.
      if (std::abs(g) <= kFeasibilityTol) g = 0.0;
      v.push_back(g);
    }
    return ScoreVector(std::move(v));
  }

 private:
  const ProblemFamily& family_;
};

// f > delta with the guarded comparison: count > delta*(m+1), treating
// near-integer products as exact.
bool exceeds_double_level(long count, long m_plus_1, double delta) {
  double t = delta * double(m_plus_1);
  double n = std::nearbyint(t);
  if (std::abs(t - n) <= kLevelGuard * std::max(1.0, std::abs(t)))
    return double(count) > n;
  return double(count) > t;
}

}  // namespace

std::unique_ptr<NonconformityMeasure> identity_measure() {
  return std::make_unique<IdentityMeasure>();
}

std::unique_ptr<NonconformityMeasure> scenario_nonconformity(
    const ProblemFamily& family) {
  return std::make_unique<ScenarioMeasure>(family);
}

bool predictor_contains(const std::vector<SamplePoint>& calibration,
                        const SamplePoint& omega, Fraction delta,
                        const NonconformityMeasure& measure) {
  check(delta.den > 0 && delta.num > 0 && delta.num < delta.den,
        "predictor_contains: delta fraction must lie strictly inside (0,1)");
  std::vector<SamplePoint> all = calibration;
  all.push_back(omega);
  ScoreVector sv = measure.scores(all);
  double test = sv.raw().back();
  long count = 0;
  for (double v : sv.raw())
    if (v >= test) ++count;
  const long long m_plus_1 = sv.size();
  // count/(m+1) > num/den, cross-multiplied in integers
  return (long long)count * delta.den > delta.num * m_plus_1;
}

bool predictor_contains(const std::vector<SamplePoint>& calibration,
                        const SamplePoint& omega, double delta,
                        const NonconformityMeasure& measure) {
  check(delta > 0.0 && delta < 1.0,
        "predictor_contains: delta must lie strictly inside (0,1)");
  std::vector<SamplePoint> all = calibration;
  all.push_back(omega);
  ScoreVector sv = measure.scores(all);
  double test = sv.raw().back();
  long count = 0;
  for (double v : sv.raw())
    if (v >= test) ++count;
  return exceeds_double_level(count, sv.size(), delta);
}

namespace {

QuantileResult quantile_from_index(const ScoreVector& scores,
                                   const QuantileIndex& qi) {
  QuantileResult out;
  out.p = qi.p;
  out.r = qi.r;
  if (qi.infinite) {
    out.status = QuantileResult::Status::infinite;
    out.r_p = std::numeric_limits<double>::infinity();
    return out;
  }
  out.status = QuantileResult::Status::finite;
  out.r_p = scores.sorted()[size_t(qi.p - 1)];
  return out;
}

}  // namespace

QuantileResult conformal_quantile(const ScoreVector& scores, double delta) {
  check(scores.size() >= 1, "conformal_quantile: need at least one score");
  return quantile_from_index(scores, quantile_index(scores.size(), delta));
}

QuantileResult conformal_quantile(const ScoreVector& scores, Fraction delta) {
  check(scores.size() >= 1, "conformal_quantile: need at least one score");
  return quantile_from_index(
      scores, quantile_index_exact(scores.size(), delta.num, delta.den));
}

QuantileResult ccc_quantile(const ScoreVector& scores, double eps,
                            bool corrected, std::optional<double> delta) {
  check(scores.size() >= 1, "ccc_quantile: need at least one score");
  if (!corrected) return conformal_quantile(scores, eps);
  check(delta.has_value(), "ccc_quantile: corrected level requires delta");
  CorrectedDiscard cd = lindemann_r(scores.size(), eps, *delta);
  QuantileResult out;
  switch (cd.status) {
    case CorrectedDiscard::Status::no_valid_r:
      out.status = QuantileResult::Status::infeasible;
      out.r_p = std::numeric_limits<double>::quiet_NaN();
      out.p = 0;
      out.r = 0;
      return out;
    case CorrectedDiscard::Status::appended_infinity:
      out.status = QuantileResult::Status::infinite;
      out.r_p = std::numeric_limits<double>::infinity();
      out.p = cd.p;
      out.r = cd.r;
      return out;
    case CorrectedDiscard::Status::ok:
      out.status = QuantileResult::Status::finite;
      out.p = cd.p;
      out.r = cd.r;
      out.r_p = scores.sorted()[size_t(cd.p - 1)];
      return out;
  }
  throw std::logic_error("unreachable ccc_quantile status");
}

FeasibilityCheck feasibility_set_contains(const ProblemFamily& family,
                                          const ScenarioSolution& solution,
                                          const SamplePoint& omega) {
  double g = family.constraint_value(solution.x_star, omega);
  FeasibilityCheck out;
  out.contained = g <= kFeasibilityTol;
  out.boundary = std::abs(g) <= kFeasibilityTol;
  return out;
}

}  // namespace scenconf
