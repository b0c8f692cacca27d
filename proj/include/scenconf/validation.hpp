#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenconf/conformal.hpp"

// Monte Carlo experiment harness. Each experiment draws independent trials,
// evaluates an exact finite-sample prediction against the observed
// statistic, and emits a per-trial CSV plus a JSON summary. Per-trial seeds
// are derived from the root seed by trial index, so results are identical
// for any thread count. Every pass/fail threshold is derived from the
// prob_bounds formulas, never hard-coded per run.

namespace scenconf {

enum class Experiment {
  vanilla_coverage,      // miscoverage rate of the level-(1-delta) quantile
  violation_cdf,         // V(S) distribution vs Beta(r+d, m+1-r-d)
  violation_mean,        // mean V(S) vs (r+d)/(m+1), plus stage tightness
  set_equivalence,       // predicted set == feasibility set at delta=d/(m+1)
  predictor_miscoverage, // fresh-sample violation of x*(S) vs d/(m+1)
  ccc_coverage,          // P{V <= eps} vs its exact (or corrected) level
};

const char* experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(const std::string& name);

struct TrialConfig {
  Experiment experiment = Experiment::vanilla_coverage;
  std::string family = "order";  // order | interval | random-lp
  int m = 0;
  int d = 0;  // 0: take the family's dimension
  int r = 0;
  std::optional<double> delta;
  std::optional<Fraction> delta_fraction;  // exact-rational alternative
  std::optional<double> eps;
  bool corrected = false;
  long trials = 0;
  long n_test = 0;  // 0 = analytic violation oracle
  int test_points = 20;
  uint64_t root_seed = 1;
  int threads = 1;
  std::optional<double> override_exact;  // test hook: forces the prediction

  void validate() const;  // throws std::invalid_argument naming the field
};

// flag bits on a trial record
inline constexpr unsigned kFlagDegenerate = 1u;         // support size != d
inline constexpr unsigned kFlagTie = 2u;                // tied scores
inline constexpr unsigned kFlagBoundary = 4u;           // |g| within tolerance
inline constexpr unsigned kFlagInfeasibleProgram = 8u;  // solver gave up
inline constexpr unsigned kFlagInfeasibleQuantile = 16u;  // no corrected rank

struct TrialRecord {
  long trial_index = 0;
  uint64_t seed = 0;
  double V = 0.0;
  double r_p = 0.0;
  bool miscovered = false;
  unsigned flags = 0;
};

struct Report {
  TrialConfig config;
  double exact_prediction = 0.0;
  double observed = 0.0;
  double sigma = 0.0;
  bool pass = false;
  bool retried = false;
  long recorded = 0;  // trials entering the statistics
  std::map<std::string, long> exclusions;
  std::vector<std::pair<std::string, double>> extras;
  std::vector<std::string> failures;  // names of the checks that failed
  std::string note;
  std::string mismatch_replay;  // serialized instance for the first mismatch
  std::vector<TrialRecord> records;
  int derived_r = 0;

  std::string csv() const;
  std::string summary_json() const;
  std::string file_stem() const;  // <experiment>_<m>_<r>_<seed>
};

Report run_vanilla_coverage(const TrialConfig& config);
Report run_violation_cdf(const TrialConfig& config);
Report run_violation_mean(const TrialConfig& config);
Report run_set_equivalence(const TrialConfig& config);
Report run_predictor_miscoverage(const TrialConfig& config);
Report run_ccc_coverage(const TrialConfig& config);

Report run_experiment(const TrialConfig& config);
// On a statistical miss, reruns once with a rederived seed; the second
// result is final.
Report run_experiment_with_retry(const TrialConfig& config);

// max_i of max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)
double ks_statistic(std::vector<double> samples,
                    const std::function<double(double)>& cdf);

// Writes <stem>.csv and <stem>.json into out_dir (created if absent);
// returns the stem path without extension.
std::string write_report(const Report& report, const std::string& out_dir);

}  // namespace scenconf
