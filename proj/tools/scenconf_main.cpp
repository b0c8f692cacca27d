// Command-line front end: runs calibration experiments from JSON configs,
// evaluates the closed-form bound formulas, and generates or solves single
// program instances.
//
// Exit codes: 0 success/pass, 1 statistical fail, 2 bad configuration or
// arguments, 3 infeasible program.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "scenconf/conformal.hpp"
#include "scenconf/families.hpp"
#include "scenconf/format.hpp"
#include "scenconf/prob_bounds.hpp"
#include "scenconf/program_json.hpp"
#include "scenconf/validation.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
using namespace scenconf;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot read file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void reject_unknown(const json& j,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument("config field '" + it.key() +
                                  "': unknown field");
  }
}

TrialConfig config_from_json(const json& j, Experiment experiment) {
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be an object");
  reject_unknown(j, {"family", "m", "d", "r", "delta", "eps", "corrected",
                     "trials", "n_test", "test_points", "seed", "threads",
                     "override_exact"});
  TrialConfig cfg;
  cfg.experiment = experiment;
  auto want_int = [&](const char* key, auto& slot) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer())
      throw std::invalid_argument(std::string("config field '") + key +
                                  "': must be an integer");
    slot = j.at(key).template get<long>();
  };
  auto want_real = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_number())
      throw std::invalid_argument(std::string("config field '") + key +
                                  "': must be a number");
    return j.at(key).get<double>();
  };
  if (j.contains("family")) {
    if (!j.at("family").is_string())
      throw std::invalid_argument("config field 'family': must be a string");
    cfg.family = j.at("family").get<std::string>();
  }
  long m = 0, d = 0, r = 0, trials = 1, n_test = 0, test_points = 20,
       threads = 1;
  want_int("m", m);
  want_int("d", d);
  want_int("r", r);
  want_int("trials", trials);
  want_int("n_test", n_test);
  want_int("test_points", test_points);
  want_int("threads", threads);
  cfg.m = int(m);
  cfg.d = int(d);
  cfg.r = int(r);
  cfg.trials = trials;
  cfg.n_test = n_test;
  cfg.test_points = int(test_points);
  cfg.threads = int(threads);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer())
      throw std::invalid_argument("config field 'seed': must be an integer");
    cfg.root_seed = j.at("seed").get<uint64_t>();
  }
  if (j.contains("delta")) {
    const json& dj = j.at("delta");
    if (dj.is_array()) {
      if (dj.size() != 2 || !dj[0].is_number_integer() ||
          !dj[1].is_number_integer())
        throw std::invalid_argument(
            "config field 'delta': fraction form is [numerator, denominator]");
      cfg.delta_fraction =
          Fraction{dj[0].get<long long>(), dj[1].get<long long>()};
    } else if (dj.is_number()) {
      cfg.delta = dj.get<double>();
    } else {
      throw std::invalid_argument(
          "config field 'delta': must be a number or [num, den]");
    }
  }
  cfg.eps = want_real("eps");
  if (j.contains("corrected")) {
    if (!j.at("corrected").is_boolean())
      throw std::invalid_argument("config field 'corrected': must be a bool");
    cfg.corrected = j.at("corrected").get<bool>();
  }
  cfg.override_exact = want_real("override_exact");
  return cfg;
}

int cmd_validate(const std::string& experiment_name_arg,
                 const std::string& config_path, const std::string& out_dir,
                 std::optional<uint64_t> seed, std::optional<int> threads,
                 std::optional<long> trials, bool no_retry) {
  auto exp = parse_experiment(experiment_name_arg);
  if (!exp) {
    std::cerr << "unknown experiment: " << experiment_name_arg << "\n";
    return 2;
  }
  TrialConfig cfg = config_from_json(json::parse(read_file(config_path)), *exp);
  if (seed) cfg.root_seed = *seed;
  if (threads) cfg.threads = *threads;
  if (trials) cfg.trials = *trials;
  cfg.validate();
  Report rep = no_retry ? run_experiment(cfg) : run_experiment_with_retry(cfg);
  std::string stem = write_report(rep, out_dir);
  std::cerr << "wrote " << stem << ".csv and " << stem << ".json\n";
  std::cout << rep.summary_json();
  return rep.pass ? 0 : 1;
}

// Exact rational value of the discard-confidence sum when eps has a short
// binary expansion and every term fits in 128 bits; empty when it does not.
std::string ccc_delta_fraction(long m, double eps) {
  int k = -1;
  for (int t = 0; t <= 40; ++t) {
    double scaled = std::ldexp(eps, t);
    if (scaled == std::floor(scaled)) {
      k = t;
      break;
    }
  }
  if (k < 0 || k * m > 120 || m > 120) return {};
  QuantileIndex qi = quantile_index(m, eps);
  if (qi.infinite) return "0/1";
  unsigned __int128 a = (unsigned __int128)std::llround(std::ldexp(eps, k));
  unsigned __int128 b = ((unsigned __int128)1 << k) - a;
  unsigned __int128 num = 0;
  for (long i = 0; i <= qi.r; ++i) {
    unsigned __int128 term = 1;
    for (long t = 0; t < i; ++t) term = term * (unsigned __int128)(m - t) / (t + 1);
    for (long t = 0; t < i; ++t) term *= a;
    for (long t = 0; t < m - i; ++t) term *= b;
    num += term;
  }
  unsigned __int128 den = (unsigned __int128)1 << 0;
  for (long t = 0; t < m; ++t) den <<= k;
  auto u128_str = [](unsigned __int128 v) {
    if (v == 0) return std::string("0");
    std::string s;
    while (v > 0) {
      s.insert(s.begin(), char('0' + int(v % 10)));
      v /= 10;
    }
    return s;
  };
  return u128_str(num) + "/" + u128_str(den);
}

long long gcd_ll(long long x, long long y) {
  while (y != 0) {
    long long t = x % y;
    x = y;
    y = t;
  }
  return x;
}

int cmd_calc(const std::string& formula, long m, long k, long r, long d,
             std::optional<double> eps, std::optional<double> delta) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("calc ") + formula +
                                         ": missing or invalid " + what);
  };
  if (formula == "sample-size-vanilla") {
    need(delta.has_value(), "--delta");
    need(r >= 0, "--r");
    std::cout << "m = " << sample_size_vanilla(r, *delta) << "\n";
    std::cout << "formula: smallest m with (r+1)/(m+1) <= delta\n";
    return 0;
  }
  if (formula == "sample-size-ccc") {
    need(eps.has_value() && delta.has_value(), "--eps/--delta");
    need(r >= 0, "--r");
    std::cout << "m = " << sample_size_ccc(r, *eps, *delta) << "\n";
    std::cout << "formula: ceil((2/eps)*(r + ln(1/delta)))\n";
    return 0;
  }
  if (formula == "expected-violation") {
    need(m >= 1, "--m");
    need(d >= 1, "--d");
    BoundSpec spec;
    spec.m = int(m);
    spec.d = int(d);
    spec.r = int(r);
    double v = expected_violation_bound(spec);
    long long num = r + d, den = m + 1;
    long long g = gcd_ll(num, den);
    std::cout << "value = " << format_sig(v) << "\n";
    std::cout << "fraction = " << num / g << "/" << den / g << "\n";
    std::cout << "formula: (r+d)/(m+1)\n";
    return 0;
  }
  if (formula == "generic-bound") {
    need(m >= 1, "--m");
    need(d >= 1, "--d");
    need(eps.has_value(), "--eps");
    BoundSpec spec;
    spec.m = int(m);
    spec.d = int(d);
    spec.r = int(r);
    spec.epsilon = eps;
    auto gb = generic_discarding_bound(spec);
    std::cout << "value = " << format_sig(gb.value) << "\n";
    std::cout << "vacuous = " << (gb.vacuous ? "true" : "false") << "\n";
    std::cout << "formula: 1 - C(r+d-1,r) * P{Bin(m,eps) <= r+d-1}\n";
    return 0;
  }
  if (formula == "binomial-tail") {
    need(m >= 1, "--m");
    need(k >= 0, "--k");
    need(eps.has_value(), "--eps");
    std::cout << "value = " << format_sig(binomial_tail(m, k, *eps)) << "\n";
    std::cout << "formula: P{Bin(m,eps) > k}\n";
    return 0;
  }
  if (formula == "ccc-delta") {
    need(m >= 1, "--m");
    need(eps.has_value(), "--eps");
    QuantileIndex qi = quantile_index(m, *eps);
    std::cout << "value = " << format_sig(ccc_delta(int(m), *eps)) << "\n";
    std::string frac = ccc_delta_fraction(m, *eps);
    if (!frac.empty()) std::cout << "fraction = " << frac << "\n";
    std::cout << "r = " << qi.r << "\n";
    std::cout << "formula: sum_{i<=r} C(m,i) eps^i (1-eps)^(m-i), "
                 "r = m - ceil((1-eps)(m+1))\n";
    return 0;
  }
  if (formula == "quantile-index") {
    need(m >= 1, "--m");
    need(delta.has_value(), "--delta");
    QuantileIndex qi = quantile_index(m, *delta);
    std::cout << "p = " << qi.p << "\n";
    std::cout << "r = " << qi.r << "\n";
    std::cout << "infinite = " << (qi.infinite ? "true" : "false") << "\n";
    std::cout << "formula: p = ceil((1-delta)*(m+1)), r = m - p\n";
    return 0;
  }
  if (formula == "lindemann-r") {
    need(m >= 1, "--m");
    need(eps.has_value() && delta.has_value(), "--eps/--delta");
    CorrectedDiscard cd = lindemann_r(m, *eps, *delta);
    const char* status =
        cd.status == CorrectedDiscard::Status::ok
            ? "ok"
            : (cd.status == CorrectedDiscard::Status::appended_infinity
                   ? "appended_infinity"
                   : "no_valid_r");
    std::cout << "status = " << status << "\n";
    if (cd.status != CorrectedDiscard::Status::no_valid_r) {
      std::cout << "r = " << cd.r << "\n";
      std::cout << "p = " << cd.p << "\n";
    }
    std::cout << "level = " << format_sig(cd.level) << "\n";
    std::cout << "formula: quantile at level 1 - eps + sqrt(ln(1/delta)/(2m))\n";
    return 0;
  }
  throw std::invalid_argument("unknown formula: " + formula);
}

ordered_json solution_to_json(const ScenarioSolution& sol) {
  ordered_json j;
  j["x_star"] = sol.x_star;
  j["objective"] = sol.objective;
  j["active"] = sol.active_indices;
  j["support"] = sol.support_indices;
  j["discarded"] = sol.discarded_indices;
  j["degenerate"] = sol.degenerate;
  j["stage_objectives"] = sol.stage_objectives;
  return j;
}

int cmd_instance(const std::string& action, const std::string& family_name,
                 int d, int m, uint64_t seed, const std::string& in_path,
                 const std::string& out_path, int r) {
  if (action == "generate") {
    auto family = make_family(family_name, d);
    Rng rng(seed);
    GeneratedInstance inst = generate_instance(*family, m, rng);
    std::string text = program_to_json(inst.program);
    if (out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(out_path, std::ios::binary);
      if (!f) throw std::invalid_argument("cannot write file: " + out_path);
      f << text;
      std::cerr << "wrote " << out_path << "\n";
    }
    return 0;
  }
  std::string text;
  if (in_path.empty()) {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    text = ss.str();
  } else {
    text = read_file(in_path);
  }
  LinearScenarioProgram program = program_from_json(text);
  if (action == "solve") {
    ScenarioSolution sol =
        r > 0 ? cascade_discard(program, r) : solve(program);
    std::cout << solution_to_json(sol).dump(2) << "\n";
    return 0;
  }
  if (action == "support") {
    ScenarioSolution sol = solve(program);
    auto fast = support_set_fast(program, sol);
    std::vector<int> sup = fast ? *fast : support_set(program, sol);
    ordered_json j;
    j["support"] = sup;
    j["method"] = fast ? "tight-rows" : "removal-test";
    j["x_star"] = sol.x_star;
    j["objective"] = sol.objective;
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  throw std::invalid_argument("unknown instance action: " + action);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario program calibration workbench"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand(
      "validate", "run a Monte Carlo experiment from a JSON config");
  std::string experiment, config_path, out_dir = "reports";
  uint64_t seed_flag = 0;
  int threads_flag = 0;
  long trials_flag = 0;
  bool no_retry = false;
  validate->add_option("experiment", experiment,
                       "vanilla_coverage | violation_cdf | violation_mean | "
                       "set_equivalence | predictor_miscoverage | ccc_coverage")
      ->required();
  validate->add_option("--config", config_path, "JSON config file")->required();
  validate->add_option("--out-dir", out_dir, "report directory");
  validate->add_option("--seed", seed_flag, "override the config root seed");
  validate->add_option("--threads", threads_flag, "override config threads");
  validate->add_option("--trials", trials_flag, "override config trials");
  validate->add_flag("--no-retry", no_retry, "fail on the first miss");

  auto* calc = app.add_subcommand("calc", "evaluate a closed-form quantity");
  std::string formula;
  long c_m = 0, c_k = -1, c_r = 0, c_d = 1;
  double c_eps = -1.0, c_delta = -1.0;
  calc->add_option("formula", formula,
                   "sample-size-vanilla | sample-size-ccc | expected-violation "
                   "| generic-bound | binomial-tail | ccc-delta | "
                   "quantile-index | lindemann-r")
      ->required();
  calc->add_option("--m", c_m, "sample count");
  calc->add_option("--k", c_k, "tail cut");
  calc->add_option("--r", c_r, "discard count");
  calc->add_option("--d", c_d, "decision dimension");
  calc->add_option("--eps", c_eps, "violation level");
  calc->add_option("--delta", c_delta, "confidence level");

  auto* instance =
      app.add_subcommand("instance", "generate, solve, or audit one program");
  std::string action, family_name = "order", in_path, out_path;
  int i_d = 0, i_m = 20, i_r = 0;
  uint64_t i_seed = 1;
  instance->add_option("action", action, "generate | solve | support")
      ->required();
  instance->add_option("--family", family_name, "order | interval | random-lp");
  instance->add_option("--d", i_d, "dimension (random-lp)");
  instance->add_option("--m", i_m, "sample count");
  instance->add_option("--seed", i_seed, "instance seed");
  instance->add_option("--in", in_path, "program JSON file (default stdin)");
  instance->add_option("--out", out_path, "output file (default stdout)");
  instance->add_option("--r", i_r, "discard count for solve");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed())
      return cmd_validate(
          experiment, config_path, out_dir,
          seed_flag ? std::optional<uint64_t>(seed_flag) : std::nullopt,
          threads_flag ? std::optional<int>(threads_flag) : std::nullopt,
          trials_flag ? std::optional<long>(trials_flag) : std::nullopt,
          no_retry);
    if (calc->parsed())
      return cmd_calc(formula, c_m, c_k, c_r, c_d,
                      c_eps >= 0.0 ? std::optional<double>(c_eps) : std::nullopt,
                      c_delta >= 0.0 ? std::optional<double>(c_delta)
                                     : std::nullopt);
    if (instance->parsed())
      return cmd_instance(action, family_name, i_d, i_m, i_seed, in_path,
                          out_path, i_r);
  } catch (const InfeasibleProgram& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
