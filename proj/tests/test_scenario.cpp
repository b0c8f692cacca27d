#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "scenconf/families.hpp"
#include "scenconf/rng.hpp"
#include "scenconf/scenario.hpp"

using namespace scenconf;

namespace {

LinearScenarioProgram order_program(const std::vector<double>& scores,
                                    double half_width = 10.0) {
  LinearScenarioProgram p;
  p.dimension = 1;
  p.cost = {1.0};
  p.box = {{-half_width, half_width}};
  for (double s : scores) p.constraints.push_back({{-1.0}, -s});
  return p;
}

bool solve_square_ref(std::vector<std::vector<double>> M,
                      std::vector<double> rhs, std::vector<double>& x) {
  const int n = int(M.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(M[size_t(i)][size_t(col)]) >
          std::abs(M[size_t(piv)][size_t(col)]))
        piv = i;
    if (std::abs(M[size_t(piv)][size_t(col)]) < 1e-10) return false;
    std::swap(M[size_t(piv)], M[size_t(col)]);
    std::swap(rhs[size_t(piv)], rhs[size_t(col)]);
    for (int i = col + 1; i < n; ++i) {
      double f = M[size_t(i)][size_t(col)] / M[size_t(col)][size_t(col)];
      for (int j = col; j < n; ++j)
        M[size_t(i)][size_t(j)] -= f * M[size_t(col)][size_t(j)];
      rhs[size_t(i)] -= f * rhs[size_t(col)];
    }
  }
  x.assign(size_t(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[size_t(i)];
    for (int j = i + 1; j < n; ++j) s -= M[size_t(i)][size_t(j)] * x[size_t(j)];
    x[size_t(i)] = s / M[size_t(i)][size_t(i)];
  }
  return true;
}

// Brute-force optimum: enumerate every d-subset of facets (rows plus box
// walls), solve the square system, keep the best feasible vertex. Ties go
// to the lexicographically smallest vertex, mirroring the solver contract.
struct OracleResult {
  bool feasible = false;
  std::vector<double> x;
  double objective = 0.0;
};

OracleResult enumerate_optimum(const LinearScenarioProgram& p) {
  const int d = p.dimension;
  struct Wall {
    std::vector<double> a;
    double b;
  };
  std::vector<Wall> walls;
  for (const auto& cr : p.constraints) walls.push_back({cr.a, cr.b});
  for (int j = 0; j < d; ++j) {
    std::vector<double> lo(size_t(d), 0.0), hi(size_t(d), 0.0);
    lo[size_t(j)] = -1.0;
    hi[size_t(j)] = 1.0;
    walls.push_back({lo, -p.box[size_t(j)][0]});  // -x_j <= -lo
    walls.push_back({hi, p.box[size_t(j)][1]});
  }
  const int n = int(walls.size());
  std::vector<int> pick(static_cast<size_t>(d));
  OracleResult best;
  auto consider = [&](const std::vector<double>& x) {
    for (const auto& cr : p.constraints) {
      double v = -cr.b;
      for (int j = 0; j < d; ++j) v += cr.a[size_t(j)] * x[size_t(j)];
      if (v > 1e-7) return;
    }
    for (int j = 0; j < d; ++j) {
      if (x[size_t(j)] < p.box[size_t(j)][0] - 1e-7) return;
      if (x[size_t(j)] > p.box[size_t(j)][1] + 1e-7) return;
    }
    double obj = 0.0;
    for (int j = 0; j < d; ++j) obj += p.cost[size_t(j)] * x[size_t(j)];
    if (!best.feasible || obj < best.objective - 1e-9) {
      best = {true, x, obj};
    } else if (obj < best.objective + 1e-9) {
      for (int j = 0; j < d; ++j) {
        if (x[size_t(j)] < best.x[size_t(j)] - 1e-9) {
          best.x = x;
          best.objective = std::min(best.objective, obj);
          break;
        }
        if (x[size_t(j)] > best.x[size_t(j)] + 1e-9) break;
      }
    }
  };
  auto recurse = [&](auto&& self, int start, int depth) -> void {
    if (depth == d) {
      std::vector<std::vector<double>> M;
      std::vector<double> rhs;
      for (int id : pick) {
        M.push_back(walls[size_t(id)].a);
        rhs.push_back(walls[size_t(id)].b);
      }
      std::vector<double> x;
      if (solve_square_ref(M, rhs, x)) consider(x);
      return;
    }
    for (int i = start; i <= n - (d - depth); ++i) {
      pick[size_t(depth)] = i;
      self(self, i + 1, depth + 1);
    }
  };
  recurse(recurse, 0, 0);
  return best;
}

}  // namespace

TEST_CASE("one-dimensional worked example") {
  auto p = order_program({0.1, 0.5, 0.3});
  auto sol = solve(p);
  CHECK(sol.x_star[0] == 0.5);
  CHECK(sol.objective == 0.5);
  REQUIRE(sol.active_indices.size() == 1);
  CHECK(sol.active_indices[0] == 1);
  auto sup = support_set(p, sol);
  REQUIRE(sup.size() == 1);
  CHECK(sup[0] == 1);
  auto fast = support_set_fast(p, sol);
  REQUIRE(fast.has_value());
  CHECK(*fast == sup);
}

TEST_CASE("one-dimensional program clamps to the box") {
  LinearScenarioProgram p;
  p.dimension = 1;
  p.cost = {1.0};
  p.box = {{-2.0, 2.0}};
  auto sol = solve(p);  // nothing binds: box lower wins
  CHECK(sol.x_star[0] == -2.0);

  p.cost = {-1.0};
  CHECK(solve(p).x_star[0] == 2.0);

  p.cost = {0.0};  // flat cost: smaller endpoint by the lexicographic rule
  CHECK(solve(p).x_star[0] == -2.0);
}

TEST_CASE("one-dimensional infeasibility") {
  LinearScenarioProgram p;
  p.dimension = 1;
  p.cost = {1.0};
  p.box = {{-10.0, 10.0}};
  p.constraints.push_back({{1.0}, 0.0});    // x <= 0
  p.constraints.push_back({{-1.0}, -1.0});  // x >= 1
  CHECK_THROWS_AS(solve(p), InfeasibleProgram);

  LinearScenarioProgram q;
  q.dimension = 1;
  q.cost = {1.0};
  q.box = {{-1.0, 1.0}};
  q.constraints.push_back({{0.0}, -0.5});  // 0 <= -0.5, never satisfiable
  CHECK_THROWS_AS(solve(q), InfeasibleProgram);
}

TEST_CASE("one-dimensional path agrees with the tableau via lifting") {
  // Embed min c x over the same constraints into two dimensions with a
  // slack coordinate pinned at zero; the tableau then handles it.
  Rng rng(404);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<double> scores;
    int m = 3 + int(rng.uniform() * 8);
    for (int i = 0; i < m; ++i) scores.push_back(rng.uniform(-3.0, 3.0));
    auto p1 = order_program(scores);
    auto s1 = solve(p1);

    LinearScenarioProgram p2;
    p2.dimension = 2;
    p2.cost = {1.0, 1.0};
    p2.box = {{-10.0, 10.0}, {0.0, 1.0}};
    for (double s : scores) p2.constraints.push_back({{-1.0, 0.0}, -s});
    auto s2 = solve(p2);
    CHECK(s2.x_star[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(s1.x_star[0] == doctest::Approx(s2.x_star[0]).epsilon(1e-9));
  }
}

TEST_CASE("interval cover worked examples") {
  auto fam = make_interval_cover_family(ScoreDistribution::uniform01());
  {
    auto p = fam->make_program({{0.0}, {1.0}});
    auto sol = solve(p);
    CHECK(sol.x_star[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.x_star[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    auto p = fam->make_program({{0.2}, {0.9}, {0.4}});
    auto sol = solve(p);
    CHECK(sol.x_star[0] == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(sol.x_star[1] == doctest::Approx(0.35).epsilon(1e-12));
    auto sup = support_set(p, sol);
    CHECK(sup == std::vector<int>{0, 1});  // the two endpoints
    auto fast = support_set_fast(p, sol);
    REQUIRE(fast.has_value());
    CHECK(*fast == sup);
    // the interior point is not active
    CHECK(sol.active_indices == std::vector<int>{0, 1});
  }
}

TEST_CASE("duplicate extremes make the support degenerate") {
  auto fam = make_interval_cover_family(ScoreDistribution::uniform01());
  auto p = fam->make_program({{0.0}, {0.0}, {1.0}});
  auto sol = solve(p);
  auto fast = support_set_fast(p, sol);
  CHECK_FALSE(fast.has_value());  // tied rows: the cheap path must decline
  auto sup = support_set(p, sol);
  CHECK(sup == std::vector<int>{2});  // removing either zero moves nothing
}

TEST_CASE("solver matches exhaustive vertex enumeration") {
  for (uint64_t seed = 1; seed <= 30; ++seed) {
    auto inst = gen_random_lp(2, 7, seed);
    auto sol = solve(inst.program);
    auto oracle = enumerate_optimum(inst.program);
    REQUIRE(oracle.feasible);
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-7));
    for (int j = 0; j < 2; ++j)
      CHECK(sol.x_star[size_t(j)] ==
            doctest::Approx(oracle.x[size_t(j)]).epsilon(1e-6).scale(1.0));
  }
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    auto inst = gen_random_lp(3, 8, seed);
    auto sol = solve(inst.program);
    auto oracle = enumerate_optimum(inst.program);
    REQUIRE(oracle.feasible);
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-7));
    for (int j = 0; j < 3; ++j)
      CHECK(sol.x_star[size_t(j)] ==
            doctest::Approx(oracle.x[size_t(j)]).epsilon(1e-6).scale(1.0));
  }
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    auto inst = gen_interval_cover(ScoreDistribution::uniform01(), 6, seed);
    auto sol = solve(inst.program);
    auto oracle = enumerate_optimum(inst.program);
    REQUIRE(oracle.feasible);
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-7));
  }
}

TEST_CASE("flat-cost faces resolve to the lexicographic minimum") {
  LinearScenarioProgram p;
  p.dimension = 2;
  p.cost = {1.0, 1.0};
  p.box = {{0.0, 5.0}, {0.0, 5.0}};
  p.constraints.push_back({{-1.0, -1.0}, -1.0});  // x1 + x2 >= 1
  auto sol = solve(p);
  CHECK(sol.x_star[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(sol.x_star[1] == doctest::Approx(1.0).epsilon(1e-9));

  LinearScenarioProgram q;
  q.dimension = 2;
  q.cost = {1.0, 0.0};  // x2 unconstrained on the optimal face
  q.box = {{-5.0, 5.0}, {-5.0, 5.0}};
  auto sol2 = solve(q);
  CHECK(sol2.x_star[0] == doctest::Approx(-5.0).epsilon(1e-9));
  CHECK(sol2.x_star[1] == doctest::Approx(-5.0).epsilon(1e-9));
}

TEST_CASE("solution is invariant under sample permutation") {
  for (uint64_t seed : {3u, 17u, 92u}) {
    auto inst = gen_random_lp(3, 24, seed);
    auto base = solve(inst.program);

    std::vector<SamplePoint> shuffled = inst.samples;
    Rng rng(seed + 1000);
    for (size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[size_t(rng.next_u64() % i)]);
    auto fam = make_random_lp_family(3);
    auto other = solve(fam->make_program(shuffled));

    REQUIRE(base.x_star.size() == other.x_star.size());
    for (size_t j = 0; j < base.x_star.size(); ++j)
      CHECK(std::memcmp(&base.x_star[j], &other.x_star[j], sizeof(double)) ==
            0);
  }
  // grouped rows: the interval family must behave the same way
  auto inst = gen_interval_cover(ScoreDistribution::uniform01(), 15, 5);
  auto base = solve(inst.program);
  std::vector<SamplePoint> shuffled = inst.samples;
  std::reverse(shuffled.begin(), shuffled.end());
  auto fam = make_interval_cover_family(ScoreDistribution::uniform01());
  auto other = solve(fam->make_program(shuffled));
  for (size_t j = 0; j < base.x_star.size(); ++j)
    CHECK(std::memcmp(&base.x_star[j], &other.x_star[j], sizeof(double)) == 0);
}

TEST_CASE("two-dimensional infeasibility") {
  LinearScenarioProgram p;
  p.dimension = 2;
  p.cost = {1.0, 1.0};
  p.box = {{0.0, 5.0}, {0.0, 5.0}};
  p.constraints.push_back({{1.0, 1.0}, -1.0});  // x1 + x2 <= -1 with x >= 0
  CHECK_THROWS_AS(solve(p), InfeasibleProgram);
}

TEST_CASE("order program shortcut") {
  std::vector<double> scores{0.3, 0.9, 0.1, 0.6, 0.5};
  auto sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  for (long r = 0; r <= 5; ++r) {
    auto res = solve_order_program(scores, r);
    if (r == 5) {
      CHECK(std::isinf(res.r_p));
      CHECK(res.p_index == 0);
    } else {
      CHECK(res.r_p == sorted[size_t(5 - r - 1)]);
      CHECK(res.p_index == 5 - r);
    }
    REQUIRE(long(res.discarded_scores.size()) == r);
    for (long k = 0; k < r; ++k)
      CHECK(res.discarded_scores[size_t(k)] == sorted[size_t(5 - 1 - k)]);
    CHECK(res.tie_count == 0);
  }
  auto tied = solve_order_program({0.5, 0.2, 0.5}, 0);
  CHECK(tied.tie_count == 1);
}

TEST_CASE("discard cascade matches the order shortcut") {
  Rng rng(777);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> scores;
    for (int i = 0; i < 12; ++i) scores.push_back(rng.uniform());
    auto p = order_program(scores, 1e4);
    for (int r : {0, 3, 6}) {
      auto cas = cascade_discard(p, r);
      auto ord = solve_order_program(scores, r);
      CHECK(cas.objective == ord.r_p);
      CHECK_FALSE(cas.degenerate);
      std::vector<double> removed;
      for (int id : cas.discarded_indices)
        removed.push_back(scores[size_t(id)]);
      CHECK(removed == ord.discarded_scores);
      for (bool t : cas.stage_tightness) CHECK(t);
      if (r > 0) {
        // one pre-removal objective per stage plus the final optimum
        REQUIRE(long(cas.stage_objectives.size()) == r + 1);
        for (size_t s = 1; s < cas.stage_objectives.size(); ++s)
          CHECK(cas.stage_objectives[s] < cas.stage_objectives[s - 1]);
      }
    }
  }
}

TEST_CASE("discard cascade on the interval family") {
  auto inst = gen_interval_cover(ScoreDistribution::uniform01(), 19, 99);
  auto sol = cascade_discard(inst.program, 6);
  CHECK(sol.discarded_indices.size() == 6);
  CHECK_FALSE(sol.degenerate);
  CHECK(sol.support_indices.size() == 2);
  REQUIRE(sol.stage_objectives.size() == 4);
  for (size_t s = 1; s < sol.stage_objectives.size(); ++s)
    CHECK(sol.stage_objectives[s] <= sol.stage_objectives[s - 1] + 1e-12);
  for (bool t : sol.stage_tightness) CHECK(t);
  CHECK_THROWS_AS(cascade_discard(inst.program, 5), std::invalid_argument);
  CHECK_THROWS_AS(cascade_discard(inst.program, 18), std::invalid_argument);
}

TEST_CASE("support removal test at scale") {
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    auto inst = gen_random_lp(3, 20, seed);
    auto sol = solve(inst.program);
    auto fast = support_set_fast(inst.program, sol);
    auto slow = support_set(inst.program, sol);
    if (fast) CHECK(*fast == slow);
    CHECK(slow.size() <= 3);
  }
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    auto inst = gen_interval_cover(ScoreDistribution::uniform01(), 12, seed);
    auto sol = solve(inst.program);
    auto fast = support_set_fast(inst.program, sol);
    auto slow = support_set(inst.program, sol);
    if (fast) CHECK(*fast == slow);
  }
}

TEST_CASE("generated instances are reproducible") {
  auto a = gen_random_lp(3, 11, 42);
  auto b = gen_random_lp(3, 11, 42);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i)
    CHECK(a.samples[i] == b.samples[i]);
  auto sa = solve(a.program);
  auto sb = solve(b.program);
  CHECK(sa.x_star == sb.x_star);
}

TEST_CASE("violation probability oracles") {
  auto order = make_order_family(ScoreDistribution::uniform01());
  ScenarioSolution s;
  s.x_star = {0.3};
  CHECK(order->analytic_violation(s) == doctest::Approx(0.7).epsilon(1e-12));

  auto interval = make_interval_cover_family(ScoreDistribution::uniform01());
  ScenarioSolution t;
  t.x_star = {0.5, 0.2};
  CHECK(interval->analytic_violation(t) ==
        doctest::Approx(0.6).epsilon(1e-12));

  Rng rng(8);
  auto est = violation_probability(t, *interval, ViolationMode::monte_carlo,
                                   100000, rng);
  CHECK(est.n_test == 100000);
  CHECK(std::abs(est.value - 0.6) < 4.0 * est.std_error + 1e-9);

  auto rlp = make_random_lp_family(2);
  CHECK_FALSE(rlp->has_analytic_violation());
  ScenarioSolution u;
  u.x_star = {0.0, 0.0};
  CHECK_THROWS_AS(rlp->analytic_violation(u), std::logic_error);
  Rng rng2(9);
  CHECK_THROWS_AS(
      violation_probability(u, *rlp, ViolationMode::analytic, 0, rng2),
      std::logic_error);
}

TEST_CASE("program validation") {
  LinearScenarioProgram p;
  p.dimension = 2;
  p.cost = {1.0};
  p.box = {{0.0, 1.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.cost = {1.0, 1.0};
  CHECK_NOTHROW(p.validate());
  p.box[1] = {1.0, 0.0};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.box[1] = {0.0, 1.0};
  p.constraints.push_back({{1.0}, 0.0});  // wrong arity
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
