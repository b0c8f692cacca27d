#include "scenconf/prob_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenconf {

namespace {

constexpr double kIntGuard = 1e-12;    // relative slack around integers
constexpr double kClampLimit = 1e-9;   // residue beyond this is a bug

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::domain_error(msg);
}

double log_binom(long m, long i) {
  return std::lgamma(double(m) + 1.0) - std::lgamma(double(i) + 1.0) -
         std::lgamma(double(m - i) + 1.0);
}

// log(sum exp(v)) without overflow
double log_sum_exp(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

// sum_{i=0}^{k} C(m,i) eps^i (1-eps)^(m-i), 0 <= k < m
double binomial_lower_sum(long m, long k, double eps) {
  double log_q = std::log1p(-eps);
  if (double(m) * log_q > std::log(std::numeric_limits<double>::min() * 4)) {
    double term = std::exp(double(m) * log_q);  // (1-eps)^m, no underflow
    double sum = term;
    double ratio = eps / (1.0 - eps);
    for (long i = 0; i < k; ++i) {
      term *= ratio * double(m - i) / double(i + 1);
      sum += term;
    }
    return sum;
  }
  std::vector<double> lt;
  lt.reserve(size_t(k) + 1);
  double log_p = std::log(eps);
  for (long i = 0; i <= k; ++i)
    lt.push_back(log_binom(m, i) + double(i) * log_p + double(m - i) * log_q);
  return std::exp(log_sum_exp(lt));
}

// sum_{i=k+1}^{m} C(m,i) eps^i (1-eps)^(m-i), computed top-down so the tail
// keeps relative accuracy when it is small
double binomial_upper_sum(long m, long k, double eps) {
  double log_p = std::log(eps);
  if (double(m) * log_p > std::log(std::numeric_limits<double>::min() * 4)) {
    double term = std::exp(double(m) * log_p);  // eps^m
    double sum = term;
    double ratio = (1.0 - eps) / eps;
    for (long i = m; i > k + 1; --i) {
      term *= ratio * double(i) / double(m - i + 1);
      sum += term;
    }
    return sum;
  }
  std::vector<double> lt;
  lt.reserve(size_t(m - k));
  double log_q = std::log1p(-eps);
  for (long i = k + 1; i <= m; ++i)
    lt.push_back(log_binom(m, i) + double(i) * log_p + double(m - i) * log_q);
  return std::exp(log_sum_exp(lt));
}

// C(n, k) as a double; exact while the value fits the 53-bit mantissa
double binom_coeff(long n, long k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (long i = 1; i <= k; ++i) c = c * double(n - k + i) / double(i);
  return c;
}

}  // namespace

void BoundSpec::validate() const {
  require(m >= 1, "BoundSpec: m must be >= 1");
  require(d >= 1, "BoundSpec: d must be >= 1");
  require(r >= 0, "BoundSpec: r must be >= 0");
  require(r <= m - d, "BoundSpec: r must be <= m - d");
  if (epsilon) require(*epsilon > 0.0 && *epsilon < 1.0,
                       "BoundSpec: epsilon must lie strictly inside (0,1)");
  if (delta) require(*delta > 0.0 && *delta < 1.0,
                     "BoundSpec: delta must lie strictly inside (0,1)");
}

double to_probability(double v) {
  if (v >= 0.0 && v <= 1.0) return v;
  if (v < 0.0 && v >= -kClampLimit) return 0.0;
  if (v > 1.0 && v <= 1.0 + kClampLimit) return 1.0;
  throw std::logic_error("probability residue out of range: " +
                         std::to_string(v));
}

long guarded_ceil(double v) {
  double n = std::nearbyint(v);
  if (std::abs(v - n) <= kIntGuard * std::max(1.0, std::abs(v)))
    return long(n);
  return long(std::ceil(v));
}

long guarded_floor(double v) {
  double n = std::nearbyint(v);
  if (std::abs(v - n) <= kIntGuard * std::max(1.0, std::abs(v)))
    return long(n);
  return long(std::floor(v));
}

double binomial_tail(long m, long k, double eps) {
  require(m >= 1, "binomial_tail: m must be >= 1");
  require(k >= 0 && k <= m, "binomial_tail: k must be in [0, m]");
  require(eps > 0.0 && eps < 1.0,
          "binomial_tail: eps must lie strictly inside (0,1)");
  if (k == m) return 0.0;
  // Evaluate whichever of the two sums is the minority mass.
  if (double(k) + 0.5 >= double(m) * eps)
    return to_probability(binomial_upper_sum(m, k, eps));
  return to_probability(1.0 - binomial_lower_sum(m, k, eps));
}

double beta_pdf(int a, int b, double x) {
  require(a >= 1 && b >= 1, "beta_pdf: shapes must be integers >= 1");
  require(x >= 0.0 && x <= 1.0, "beta_pdf: x must lie in [0,1]");
  if (x == 0.0) return a == 1 ? double(b) : 0.0;
  if (x == 1.0) return b == 1 ? double(a) : 0.0;
  double log_norm = std::lgamma(double(a + b)) - std::lgamma(double(a)) -
                    std::lgamma(double(b));
  return std::exp(log_norm + double(a - 1) * std::log(x) +
                  double(b - 1) * std::log1p(-x));
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int it = 1; it <= kMaxIter; ++it) {
    double m = it;
    double aa = m * (b - m) * x / ((qam + 2.0 * m) * (a + 2.0 * m));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + 2.0 * m) * (qap + 2.0 * m));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double beta_cdf(int a, int b, double x) {
  require(a >= 1 && b >= 1, "beta_cdf: shapes must be integers >= 1");
  require(x >= 0.0 && x <= 1.0, "beta_cdf: x must lie in [0,1]");
  return to_probability(reg_inc_beta(double(a), double(b), x));
}

double expected_violation_bound(const BoundSpec& spec) {
  spec.validate();
  return to_probability(double(spec.r + spec.d) / double(spec.m + 1));
}

GenericDiscardingBound generic_discarding_bound(const BoundSpec& spec,
                                                bool expectation_variant) {
  spec.validate();
  require(spec.epsilon.has_value() || expectation_variant,
          "generic_discarding_bound: epsilon required for the CDF variant");
  double factor = binom_coeff(spec.r + spec.d - 1, spec.r);
  if (expectation_variant) {
    double v = factor * double(spec.r + spec.d) / double(spec.m + 1);
    return {v, v > 1.0};
  }
  double eps = *spec.epsilon;
  double lower = binomial_lower_sum(spec.m, spec.r + spec.d - 1, eps);
  double v = 1.0 - factor * lower;
  return {std::clamp(v, 0.0, 1.0), false};
}

QuantileIndex quantile_index(long m, double delta) {
  require(m >= 1, "quantile_index: m must be >= 1");
  require(delta > 0.0 && delta < 1.0,
          "quantile_index: delta must lie strictly inside (0,1)");
  long p = guarded_ceil((1.0 - delta) * double(m + 1));
  QuantileIndex q;
  q.p = p;
  q.r = m - p;
  q.infinite = (p == m + 1);
  return q;
}

QuantileIndex quantile_index_exact(long m, long delta_num, long delta_den) {
  require(m >= 1, "quantile_index: m must be >= 1");
  require(delta_den > 0 && delta_num > 0 && delta_num < delta_den,
          "quantile_index: fraction must lie strictly inside (0,1)");
  // ceil((den-num)(m+1)/den) in integer arithmetic
  long num = (delta_den - delta_num) * (m + 1);
  long p = (num + delta_den - 1) / delta_den;
  QuantileIndex q;
  q.p = p;
  q.r = m - p;
  q.infinite = (p == m + 1);
  return q;
}

long sample_size_vanilla(long r, double delta) {
  require(r >= 0, "sample_size_vanilla: r must be >= 0");
  require(delta > 0.0 && delta < 1.0,
          "sample_size_vanilla: delta must lie strictly inside (0,1)");
  long m = std::max(r + 1, guarded_ceil(double(r + 1) / delta - 1.0));
  auto ok = [&](long mm) { return double(r + 1) <= delta * double(mm + 1); };
  while (!ok(m)) ++m;
  while (m > r + 1 && ok(m - 1)) --m;
  return m;
}

long sample_size_ccc(long r, double eps, double delta) {
  require(r >= 0, "sample_size_ccc: r must be >= 0");
  require(eps > 0.0 && eps < 1.0,
          "sample_size_ccc: eps must lie strictly inside (0,1)");
  require(delta > 0.0 && delta < 1.0,
          "sample_size_ccc: delta must lie strictly inside (0,1)");
  double v = (2.0 / eps) * (double(r) + std::log(1.0 / delta));
  return std::max<long>(1, guarded_ceil(v));
}

double ccc_delta(int m, double eps) {
  require(m >= 1, "ccc_delta: m must be >= 1");
  require(eps > 0.0 && eps < 1.0,
          "ccc_delta: eps must lie strictly inside (0,1)");
  QuantileIndex q = quantile_index(m, eps);
  if (q.infinite) return 0.0;  // quantile is the sentinel, empty sum
  return to_probability(1.0 - binomial_tail(m, q.r, eps));
}

double ccc_delta(const BoundSpec& spec) {
  require(spec.epsilon.has_value(), "ccc_delta: epsilon required");
  return ccc_delta(spec.m, *spec.epsilon);
}

CorrectedDiscard lindemann_r(long m, double eps, double delta) {
  require(m >= 1, "lindemann_r: m must be >= 1");
  require(eps > 0.0 && eps < 1.0,
          "lindemann_r: eps must lie strictly inside (0,1)");
  require(delta > 0.0 && delta < 1.0,
          "lindemann_r: delta must lie strictly inside (0,1)");
  CorrectedDiscard out;
  out.level = 1.0 - eps + std::sqrt(std::log(1.0 / delta) / (2.0 * double(m)));
  long p = guarded_ceil(out.level * double(m + 1));
  if (p > m + 1) {
    out.status = CorrectedDiscard::Status::no_valid_r;
    return out;
  }
  out.p = p;
  if (p == m + 1) {
    out.status = CorrectedDiscard::Status::appended_infinity;
    out.r = -1;
    return out;
  }
  out.status = CorrectedDiscard::Status::ok;
  out.r = m - p;
  return out;
}

}  // namespace scenconf
