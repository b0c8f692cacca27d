#pragma once

#include <optional>

// Exact finite-sample probability formulas shared by the quantile and
// scenario machinery. All results of probability kind are plain doubles in
// [0, 1]; to_probability() removes floating-point residue at the endpoints
// (anything within 1e-9 outside the interval is clamped, typical residue is
// below 2^-40) and rejects values further out as computation bugs.

namespace scenconf {

struct BoundSpec {
  int m = 0;  // sample count
  int d = 1;  // decision dimension
  int r = 0;  // discarded sample count
  std::optional<double> epsilon;
  std::optional<double> delta;

  void validate() const;  // throws std::domain_error on violated ranges
};

double to_probability(double v);

// ceil with a 1e-12 relative guard: values that sit within rounding error of
// an integer are taken as that integer instead of being bumped up.
long guarded_ceil(double v);
long guarded_floor(double v);

// P{Bin(m, eps) > k} = 1 - sum_{i=0}^{k} C(m,i) eps^i (1-eps)^(m-i).
// Incremental term recurrences, switching to log-space sums when the
// starting term underflows; stable up to m around 1e6.
double binomial_tail(long m, long k, double eps);

// Beta(a, b) density and CDF for integer shapes a, b >= 1. The CDF uses the
// regularized incomplete beta continued fraction, an independent route from
// binomial_tail; the two are tied by
//   beta_cdf(a, b, x) == binomial_tail(a+b-1, a-1, x).
double beta_pdf(int a, int b, double x);
double beta_cdf(int a, int b, double x);

// E{V} bound for a fully-supported program after discarding: (r+d)/(m+1).
double expected_violation_bound(const BoundSpec& spec);

// Distribution-free discarding bound for general removal rules. The CDF
// variant 1 - C(r+d-1,r) * P{Bin(m,eps) <= r+d-1} is clamped into [0,1];
// the expectation variant C(r+d-1,r)*(r+d)/(m+1) is reported as computed
// and flagged vacuous when it exceeds 1.
struct GenericDiscardingBound {
  double value = 0.0;
  bool vacuous = false;
};
GenericDiscardingBound generic_discarding_bound(const BoundSpec& spec,
                                                bool expectation_variant = false);

// Rank of the level-(1-delta) quantile among m scores plus an appended
// upper sentinel: p = ceil((1-delta)(m+1)), r = m - p. p == m+1 means the
// quantile is the sentinel itself (delta below 1/(m+1)); then r == -1 and
// infinite is set. p + r == m holds in every case.
struct QuantileIndex {
  long p = 0;
  long r = 0;
  bool infinite = false;
};
QuantileIndex quantile_index(long m, double delta);
// Exact path for delta given as a fraction num/den; no floating rounding.
QuantileIndex quantile_index_exact(long m, long delta_num, long delta_den);

// Smallest m with (r+1)/(m+1) <= delta.
long sample_size_vanilla(long r, double delta);

// m = ceil((2/eps) * (r + ln(1/delta))), sufficient for coverage-conditional
// calibration at miscoverage eps with confidence 1-delta.
long sample_size_ccc(long r, double eps, double delta);

// Exact confidence defect of discarding r = m - ceil((1-eps)(m+1)) scores:
// delta = sum_{i=0}^{r} C(m,i) eps^i (1-eps)^(m-i). Returns 0 when eps is so
// small that the quantile is the appended sentinel (empty sum).
double ccc_delta(int m, double eps);
double ccc_delta(const BoundSpec& spec);

// Discard count for the corrected quantile level 1-eps+sqrt(ln(1/delta)/(2m)).
// appended_infinity: p == m+1, the quantile is the upper sentinel.
// no_valid_r: the corrected level pushes p past m+1, no rank exists.
struct CorrectedDiscard {
  enum class Status { ok, appended_infinity, no_valid_r };
  Status status = Status::ok;
  long r = 0;     // valid when status == ok
  long p = 0;     // valid unless status == no_valid_r
  double level = 0.0;
};
CorrectedDiscard lindemann_r(long m, double eps, double delta);

}  // namespace scenconf
