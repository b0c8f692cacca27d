#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "scenconf/families.hpp"

// Score-based set prediction. The p-value of a candidate against m
// calibration scores is the rank fraction |{i : R_i >= R}| / (m+1) with the
// candidate included in the count; the predicted set keeps candidates whose
// p-value exceeds delta. Quantile lookups share their index arithmetic with
// prob_bounds::quantile_index.

namespace scenconf {

// Exact rational, used wherever a knife-edge comparison against a level of
// the form k/(m+1) must not pass through floating point.
struct Fraction {
  long long num = 0;
  long long den = 1;
  double value() const { return double(num) / double(den); }
};

class ScoreVector {
 public:
  ScoreVector() = default;
  explicit ScoreVector(std::vector<double> raw);

  long size() const { return long(raw_.size()); }
  const std::vector<double>& raw() const { return raw_; }
  const std::vector<double>& sorted() const { return sorted_; }
  // original position of the k-th smallest score
  const std::vector<int>& sorted_indices() const { return order_; }
  int tie_count() const { return ties_; }

 private:
  std::vector<double> raw_;
  std::vector<double> sorted_;
  std::vector<int> order_;
  int ties_ = 0;
};

// Rank fraction of test_score among calibration + itself, in (0, 1].
// Exact integer count over m+1.
Fraction f_value(const ScoreVector& calibration, double test_score);

class NonconformityMeasure {
 public:
  virtual ~NonconformityMeasure() = default;
  // One score per sample, in input order. Must be permutation-equivariant:
  // shuffling the samples yields the same score multiset.
  virtual ScoreVector scores(const std::vector<SamplePoint>& samples) const = 0;
};

// Scores one-dimensional samples by their own value.
std::unique_ptr<NonconformityMeasure> identity_measure();

// Solves the family's program on the sample multiset and scores each sample
// by its constraint value at the optimum; the family must outlive the
// returned measure.
std::unique_ptr<NonconformityMeasure> scenario_nonconformity(
    const ProblemFamily& family);

// Candidate membership in the predicted set: evaluates the measure on
// calibration + {omega} (omega last) and tests f > delta. The Fraction
// overload compares in exact integer arithmetic.
bool predictor_contains(const std::vector<SamplePoint>& calibration,
                        const SamplePoint& omega, Fraction delta,
                        const NonconformityMeasure& measure);
bool predictor_contains(const std::vector<SamplePoint>& calibration,
                        const SamplePoint& omega, double delta,
                        const NonconformityMeasure& measure);

struct QuantileResult {
  enum class Status { finite, infinite, infeasible };
  Status status = Status::finite;
  double r_p = 0.0;  // +infinity when status == infinite
  long p = 0;        // 1-based rank
  long r = 0;        // implied discard count, p + r == m
};

// Level-(1-delta) quantile of the scores with an appended upper sentinel.
QuantileResult conformal_quantile(const ScoreVector& scores, double delta);
QuantileResult conformal_quantile(const ScoreVector& scores, Fraction delta);

// Quantile for coverage target 1-eps. With corrected set, the level is
// raised by sqrt(ln(1/delta)/(2m)) (delta required); status infeasible means
// no rank exists at the corrected level.
QuantileResult ccc_quantile(const ScoreVector& scores, double eps,
                            bool corrected = false,
                            std::optional<double> delta = std::nullopt);

struct FeasibilityCheck {
  bool contained = false;
  bool boundary = false;  // |g| within the feasibility tolerance
};

// Membership of omega in {omega : g(x*(S), omega) <= 0}.
FeasibilityCheck feasibility_set_contains(const ProblemFamily& family,
                                          const ScenarioSolution& solution,
                                          const SamplePoint& omega);

}  // namespace scenconf
