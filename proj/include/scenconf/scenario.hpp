#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Linear scenario programs over a box domain and the operations the
// calibration experiments need: deterministic solves, support sets via the
// remove-and-resolve test, staged discarding, and the one-dimensional
// order-program shortcut.

namespace scenconf {

inline constexpr double kFeasibilityTol = 1e-9;
inline constexpr double kActivityTol = 1e-7;
inline constexpr double kSupportMoveTol = 1e-7;  // infinity norm on x*

struct AffineRow {
  std::vector<double> a;
  double b = 0.0;
};

// One sample may contribute several affine rows (row_sample maps row index
// to sample index); its constraint value is the max over its rows, so
// g(x, sample) <= 0 iff every row holds. An empty row_sample means row i
// belongs to sample i.
struct LinearScenarioProgram {
  int dimension = 0;
  std::vector<double> cost;
  std::vector<AffineRow> constraints;
  std::vector<std::array<double, 2>> box;  // {lo, hi} per coordinate
  std::vector<int> row_sample;

  int sample_count() const;
  int sample_of_row(int row) const;
  double row_value(const std::vector<double>& x, int row) const;     // a.x - b
  double sample_value(const std::vector<double>& x, int sample) const;
  void validate() const;  // throws std::invalid_argument
};

class InfeasibleProgram : public std::runtime_error {
 public:
  explicit InfeasibleProgram(const std::string& what)
      : std::runtime_error(what) {}
};

struct ScenarioSolution {
  std::vector<double> x_star;
  double objective = 0.0;
  std::vector<int> active_indices;     // samples with |g| <= kActivityTol
  std::vector<int> support_indices;    // filled by support_set / cascade_discard
  std::vector<int> discarded_indices;  // in removal order
  bool degenerate = false;
  std::vector<bool> stage_tightness;   // per stage: removals violate final x*
  std::vector<double> stage_objectives;
};

// Minimize cost.x subject to every sample constraint and the box. The
// returned vertex is unique: when the optimal face is not a point, the
// lexicographically smallest point on it is selected. Throws
// InfeasibleProgram when the constraint set is empty.
ScenarioSolution solve(const LinearScenarioProgram& program);

// Subset solve used by the removal test and the discarding cascade;
// retained.size() == sample_count(), zero entries drop the whole sample.
ScenarioSolution solve_masked(const LinearScenarioProgram& program,
                              const std::vector<char>& retained);

// Ground-truth support set: sample i is support iff removing it moves x* by
// more than kSupportMoveTol in infinity norm.
std::vector<int> support_set(const LinearScenarioProgram& program,
                             const ScenarioSolution& solution);
std::vector<int> support_set_masked(const LinearScenarioProgram& program,
                                    const std::vector<char>& retained,
                                    const ScenarioSolution& solution);

// Cheap path for the nondegenerate case: exactly `dimension` tight rows,
// linearly independent, each from a distinct sample, box facets untouched.
// Returns nullopt when those conditions fail; callers then fall back to the
// removal test. Agreement between the two is asserted by the audit suites.
std::optional<std::vector<int>> support_set_fast(
    const LinearScenarioProgram& program, const ScenarioSolution& solution);
std::optional<std::vector<int>> support_set_fast_masked(
    const LinearScenarioProgram& program, const std::vector<char>& retained,
    const ScenarioSolution& solution);

// Remove r samples in r/d stages; each stage drops the current support set.
// Requires r % d == 0 and r <= m - d. The result records removal order,
// per-stage objectives, and per-stage tightness (every sample removed in the
// stage is violated by the final solution). Stages whose support size is not
// exactly d set the degenerate flag but still remove what was found.
ScenarioSolution cascade_discard(const LinearScenarioProgram& program, int r);

// min xbar s.t. score_i <= xbar over the non-discarded scores, discarding
// the current maximum r times; optimum is the (m-r)-th smallest score.
struct OrderProgramResult {
  double r_p = 0.0;  // +infinity sentinel when r == m
  long p_index = 0;  // m - r, the rank of the optimum among the inputs
  std::vector<double> discarded_scores;  // in removal order (decreasing)
  int tie_count = 0;
};
OrderProgramResult solve_order_program(const std::vector<double>& scores,
                                       long r);

}  // namespace scenconf
