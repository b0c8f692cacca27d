#include "scenconf/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "simplex.hpp"

namespace scenconf {

namespace {

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Solve M x = rhs by Gaussian elimination with partial pivoting.
// Returns false when the matrix is numerically singular.
bool solve_square(std::vector<std::vector<double>> M, std::vector<double> rhs,
                  std::vector<double>& x) {
  const int n = int(M.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int i = col + 1; i < n; ++i)
      if (std::abs(M[size_t(i)][size_t(col)]) >
          std::abs(M[size_t(piv)][size_t(col)]))
        piv = i;
    if (std::abs(M[size_t(piv)][size_t(col)]) < 1e-12) return false;
    std::swap(M[size_t(piv)], M[size_t(col)]);
    std::swap(rhs[size_t(piv)], rhs[size_t(col)]);
    for (int i = col + 1; i < n; ++i) {
      double f = M[size_t(i)][size_t(col)] / M[size_t(col)][size_t(col)];
      if (f == 0.0) continue;
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

struct Facet {
  // kind 0: box lower, kind 1: box upper (key = coordinate);
  // kind 2: program row (key = row index, ordering by content).
  int kind = 0;
  int key = 0;
};

struct LpLayout {
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<int> lp_row_to_program_row;
  std::vector<double> shift;  // x = y + shift
};

LpLayout build_lp(const LinearScenarioProgram& program,
                  const std::vector<char>& retained) {
  const int d = program.dimension;
  LpLayout lp;
  lp.shift.resize(size_t(d));
  for (int j = 0; j < d; ++j) lp.shift[size_t(j)] = program.box[size_t(j)][0];
  for (int row = 0; row < int(program.constraints.size()); ++row) {
    if (!retained[size_t(program.sample_of_row(row))]) continue;
    const auto& cr = program.constraints[size_t(row)];
    double rhs = cr.b;
    for (int j = 0; j < d; ++j) rhs -= cr.a[size_t(j)] * lp.shift[size_t(j)];
    lp.A.push_back(cr.a);
    lp.b.push_back(rhs);
    lp.lp_row_to_program_row.push_back(row);
  }
  for (int j = 0; j < d; ++j) {
    std::vector<double> a(size_t(d), 0.0);
    a[size_t(j)] = 1.0;
    lp.A.push_back(std::move(a));
    lp.b.push_back(program.box[size_t(j)][1] - program.box[size_t(j)][0]);
    lp.lp_row_to_program_row.push_back(-1 - j);  // box upper marker
  }
  lp.c = program.cost;
  return lp;
}

// Canonical content ordering so the polished vertex does not depend on the
// order the rows arrived in.
bool facet_less(const LinearScenarioProgram& program, const Facet& lhs,
                const Facet& rhs) {
  if (lhs.kind != rhs.kind) return lhs.kind < rhs.kind;
  if (lhs.kind != 2) return lhs.key < rhs.key;
  const auto& x = program.constraints[size_t(lhs.key)];
  const auto& y = program.constraints[size_t(rhs.key)];
  if (x.b != y.b) return x.b < y.b;
  for (size_t j = 0; j < x.a.size(); ++j)
    if (x.a[j] != y.a[j]) return x.a[j] < y.a[j];
  return lhs.key < rhs.key;
}

bool feasible_at(const LinearScenarioProgram& program,
                 const std::vector<char>& retained,
                 const std::vector<double>& x) {
  for (int row = 0; row < int(program.constraints.size()); ++row) {
    if (!retained[size_t(program.sample_of_row(row))]) continue;
    if (program.row_value(x, row) > kFeasibilityTol) return false;
  }
  for (int j = 0; j < program.dimension; ++j) {
    if (x[size_t(j)] < program.box[size_t(j)][0] - kFeasibilityTol) return false;
    if (x[size_t(j)] > program.box[size_t(j)][1] + kFeasibilityTol) return false;
  }
  return true;
}

// One-dimensional programs reduce to interval intersection: each row is a
// half-line, so the optimum is an endpoint. Bit-for-bit it matches the
// general path (both compute tight-row solutions as b/a), while skipping
// the tableau entirely; the discard cascade leans on this.
ScenarioSolution solve_1d(const LinearScenarioProgram& program,
                          const std::vector<char>& retained) {
  double lo = program.box[0][0];
  double hi = program.box[0][1];
  for (int row = 0; row < int(program.constraints.size()); ++row) {
    if (!retained[size_t(program.sample_of_row(row))]) continue;
    const auto& cr = program.constraints[size_t(row)];
    if (cr.a[0] > 0.0)
      hi = std::min(hi, cr.b / cr.a[0]);
    else if (cr.a[0] < 0.0)
      lo = std::max(lo, cr.b / cr.a[0]);
    else if (cr.b < -kFeasibilityTol)
      throw InfeasibleProgram("scenario program has no feasible point");
  }
  if (lo > hi + kFeasibilityTol)
    throw InfeasibleProgram("scenario program has no feasible point");
  const double c = program.cost[0];
  double x0 = c < 0.0 ? hi : lo;  // cost zero lands on the smaller endpoint
  x0 = std::min(x0, hi);
  ScenarioSolution sol;
  sol.x_star = {x0};
  sol.objective = c * x0;
  for (int s = 0; s < program.sample_count(); ++s) {
    if (!retained[size_t(s)]) continue;
    if (std::abs(program.sample_value(sol.x_star, s)) <= kActivityTol)
      sol.active_indices.push_back(s);
  }
  return sol;
}

}  // namespace

int LinearScenarioProgram::sample_count() const {
  if (row_sample.empty()) return int(constraints.size());
  int mx = -1;
  for (int s : row_sample) mx = std::max(mx, s);
  return mx + 1;
}

int LinearScenarioProgram::sample_of_row(int row) const {
  return row_sample.empty() ? row : row_sample[size_t(row)];
}

double LinearScenarioProgram::row_value(const std::vector<double>& x,
                                        int row) const {
  const auto& cr = constraints[size_t(row)];
  double v = -cr.b;
  for (size_t j = 0; j < cr.a.size(); ++j) v += cr.a[j] * x[j];
  return v;
}

double LinearScenarioProgram::sample_value(const std::vector<double>& x,
                                           int sample) const {
  if (row_sample.empty()) return row_value(x, sample);
  double v = -std::numeric_limits<double>::infinity();
  for (int row = 0; row < int(constraints.size()); ++row)
    if (row_sample[size_t(row)] == sample) v = std::max(v, row_value(x, row));
  return v;
}

void LinearScenarioProgram::validate() const {
  check(dimension >= 1, "program: dimension must be >= 1");
  check(int(cost.size()) == dimension, "program: cost length != dimension");
  check(int(box.size()) == dimension, "program: box length != dimension");
  for (const auto& bx : box) {
    check(std::isfinite(bx[0]) && std::isfinite(bx[1]),
          "program: box bounds must be finite");
    check(bx[0] < bx[1], "program: box lower must be below upper");
  }
  for (double v : cost) check(std::isfinite(v), "program: cost must be finite");
  for (const auto& cr : constraints) {
    check(int(cr.a.size()) == dimension,
          "program: constraint coefficient length != dimension");
    for (double v : cr.a)
      check(std::isfinite(v), "program: constraint coefficients must be finite");
    check(std::isfinite(cr.b), "program: constraint offset must be finite");
  }
  if (!row_sample.empty()) {
    check(row_sample.size() == constraints.size(),
          "program: row_sample length != constraint count");
    int m = sample_count();
    std::vector<char> seen(size_t(std::max(m, 1)), 0);
    for (int s : row_sample) {
      check(s >= 0, "program: row_sample entries must be >= 0");
      seen[size_t(s)] = 1;
    }
    for (int s = 0; s < m; ++s)
      check(seen[size_t(s)], "program: sample without any constraint row");
  }
}

ScenarioSolution solve_masked(const LinearScenarioProgram& program,
                              const std::vector<char>& retained) {
  const int d = program.dimension;
  if (d == 1) return solve_1d(program, retained);
  LpLayout lp = build_lp(program, retained);
  auto base = detail::simplex_solve(lp.A, lp.b, lp.c);
  if (base.status == detail::SimplexResult::Status::infeasible)
    throw InfeasibleProgram("scenario program has no feasible point");
  if (base.status == detail::SimplexResult::Status::unbounded)
    throw std::logic_error("box-bounded program reported unbounded");

  const int nrows = int(lp.A.size());
  std::vector<double> x(static_cast<size_t>(d));
  auto from_y = [&](const std::vector<double>& y) {
    for (int j = 0; j < d; ++j)
      x[size_t(j)] = y[size_t(j)] + lp.shift[size_t(j)];
  };
  from_y(base.y);

  if (base.unique_vertex && int(base.active_facets.size()) == d) {
    // Re-derive the vertex from its defining equations in a content-sorted
    // order: the result is then identical for any permutation of the input.
    std::vector<Facet> facets;
    for (int f : base.active_facets) {
      if (f >= nrows) {
        facets.push_back({0, f - nrows});  // y_j = 0, box lower
      } else {
        int pr = lp.lp_row_to_program_row[size_t(f)];
        if (pr < 0)
          facets.push_back({1, -1 - pr});  // box upper
        else
          facets.push_back({2, pr});
      }
    }
    std::sort(facets.begin(), facets.end(),
              [&](const Facet& l, const Facet& r) {
                return facet_less(program, l, r);
              });
    std::vector<std::vector<double>> M;
    std::vector<double> rhs;
    for (const auto& f : facets) {
      std::vector<double> row(size_t(d), 0.0);
      if (f.kind == 0) {
        row[size_t(f.key)] = 1.0;
        M.push_back(std::move(row));
        rhs.push_back(program.box[size_t(f.key)][0]);
      } else if (f.kind == 1) {
        row[size_t(f.key)] = 1.0;
        M.push_back(std::move(row));
        rhs.push_back(program.box[size_t(f.key)][1]);
      } else {
        M.push_back(program.constraints[size_t(f.key)].a);
        rhs.push_back(program.constraints[size_t(f.key)].b);
      }
    }
    std::vector<double> polished;
    if (solve_square(M, rhs, polished) &&
        feasible_at(program, retained, polished)) {
      x = polished;
    }
  } else if (!base.unique_vertex) {
    // Tie-break: walk the optimal face down to its lexicographically
    // smallest point, one coordinate at a time.
    double zy = 0.0;
    for (int j = 0; j < d; ++j) zy += lp.c[size_t(j)] * base.y[size_t(j)];
    auto A2 = lp.A;
    auto b2 = lp.b;
    A2.push_back(lp.c);
    b2.push_back(zy);
    std::vector<double> y = base.y;
    for (int j = 0; j < d; ++j) {
      std::vector<double> ej(size_t(d), 0.0);
      ej[size_t(j)] = 1.0;
      auto stage = detail::simplex_solve(A2, b2, ej);
      if (stage.status != detail::SimplexResult::Status::optimal)
        throw std::logic_error("tie-break stage did not solve");
      y = stage.y;
      A2.push_back(ej);
      b2.push_back(stage.objective);
    }
    from_y(y);
  }

  ScenarioSolution sol;
  sol.x_star = x;
  sol.objective = 0.0;
  for (int j = 0; j < d; ++j)
    sol.objective += program.cost[size_t(j)] * x[size_t(j)];
  for (int s = 0; s < program.sample_count(); ++s) {
    if (!retained[size_t(s)]) continue;
    if (std::abs(program.sample_value(x, s)) <= kActivityTol)
      sol.active_indices.push_back(s);
  }
  return sol;
}

ScenarioSolution solve(const LinearScenarioProgram& program) {
  program.validate();
  std::vector<char> retained(size_t(std::max(program.sample_count(), 1)), 1);
  return solve_masked(program, retained);
}

std::vector<int> support_set_masked(const LinearScenarioProgram& program,
                                    const std::vector<char>& retained,
                                    const ScenarioSolution& solution) {
  std::vector<int> support;
  std::vector<char> mask = retained;
  for (int s = 0; s < program.sample_count(); ++s) {
    if (!retained[size_t(s)]) continue;
    mask[size_t(s)] = 0;
    ScenarioSolution without = solve_masked(program, mask);
    mask[size_t(s)] = 1;
    double move = 0.0;
    for (int j = 0; j < program.dimension; ++j)
      move = std::max(move, std::abs(without.x_star[size_t(j)] -
                                     solution.x_star[size_t(j)]));
    if (move > kSupportMoveTol) support.push_back(s);
  }
  return support;
}

std::vector<int> support_set(const LinearScenarioProgram& program,
                             const ScenarioSolution& solution) {
  std::vector<char> retained(size_t(std::max(program.sample_count(), 1)), 1);
  return support_set_masked(program, retained, solution);
}

std::optional<std::vector<int>> support_set_fast_masked(
    const LinearScenarioProgram& program, const std::vector<char>& retained,
    const ScenarioSolution& solution) {
  const int d = program.dimension;
  const auto& x = solution.x_star;
  for (int j = 0; j < d; ++j) {
    if (std::abs(x[size_t(j)] - program.box[size_t(j)][0]) <= kActivityTol)
      return std::nullopt;
    if (std::abs(x[size_t(j)] - program.box[size_t(j)][1]) <= kActivityTol)
      return std::nullopt;
  }
  std::vector<int> tight_rows;
  for (int row = 0; row < int(program.constraints.size()); ++row) {
    if (!retained[size_t(program.sample_of_row(row))]) continue;
    if (std::abs(program.row_value(x, row)) <= kActivityTol)
      tight_rows.push_back(row);
  }
  if (int(tight_rows.size()) != d) return std::nullopt;
  std::vector<int> samples;
  for (int row : tight_rows) samples.push_back(program.sample_of_row(row));
  std::sort(samples.begin(), samples.end());
  if (std::adjacent_find(samples.begin(), samples.end()) != samples.end())
    return std::nullopt;
  // Rank check on the tight gradients.
  std::vector<std::vector<double>> M;
  for (int row : tight_rows) M.push_back(program.constraints[size_t(row)].a);
  std::vector<double> rhs(size_t(d), 0.0), dummy;
  if (!solve_square(M, rhs, dummy)) return std::nullopt;
  return samples;
}

std::optional<std::vector<int>> support_set_fast(
    const LinearScenarioProgram& program, const ScenarioSolution& solution) {
  std::vector<char> retained(size_t(std::max(program.sample_count(), 1)), 1);
  return support_set_fast_masked(program, retained, solution);
}

ScenarioSolution cascade_discard(const LinearScenarioProgram& program, int r) {
  program.validate();
  const int d = program.dimension;
  const int m = program.sample_count();
  if (r == 0) return solve(program);
  check(r > 0 && r % d == 0, "cascade_discard: r must be a multiple of d");
  check(r <= m - d, "cascade_discard: r must leave at least d samples");

  std::vector<char> mask(size_t(m), 1);
  std::vector<std::vector<int>> removed_by_stage;
  std::vector<double> stage_objectives;
  std::vector<int> removal_order;
  bool degenerate = false;

  const int stages = r / d;
  for (int s = 0; s < stages; ++s) {
    ScenarioSolution sol = solve_masked(program, mask);
    stage_objectives.push_back(sol.objective);
    auto fast = support_set_fast_masked(program, mask, sol);
    std::vector<int> sup =
        fast ? *fast : support_set_masked(program, mask, sol);
    if (int(sup.size()) != d) degenerate = true;
    if (sup.empty()) break;  // nothing movable; stop rather than loop
    for (int id : sup) {
      mask[size_t(id)] = 0;
      removal_order.push_back(id);
    }
    removed_by_stage.push_back(std::move(sup));
  }

  ScenarioSolution final_sol = solve_masked(program, mask);
  stage_objectives.push_back(final_sol.objective);
  auto fast = support_set_fast_masked(program, mask, final_sol);
  final_sol.support_indices =
      fast ? *fast : support_set_masked(program, mask, final_sol);
  final_sol.discarded_indices = removal_order;
  final_sol.degenerate = degenerate || int(removal_order.size()) != r;
  final_sol.stage_objectives = std::move(stage_objectives);
  for (const auto& stage : removed_by_stage) {
    bool all_violated = true;
    for (int id : stage)
      if (program.sample_value(final_sol.x_star, id) <= kFeasibilityTol)
        all_violated = false;
    final_sol.stage_tightness.push_back(all_violated);
  }
  return final_sol;
}

OrderProgramResult solve_order_program(const std::vector<double>& scores,
                                       long r) {
  const long m = long(scores.size());
  check(m >= 1, "order program: need at least one score");
  check(r >= 0 && r <= m, "order program: r must lie in [0, m]");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  OrderProgramResult out;
  for (size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] == sorted[i - 1]) ++out.tie_count;
  for (long k = 0; k < r; ++k)
    out.discarded_scores.push_back(sorted[size_t(m - 1 - k)]);
  if (r == m) {
    out.r_p = std::numeric_limits<double>::infinity();
    out.p_index = 0;
    return out;
  }
  out.r_p = sorted[size_t(m - r - 1)];
  out.p_index = m - r;
  return out;
}

}  // namespace scenconf
