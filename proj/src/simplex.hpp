#pragma once

#include <vector>

// Dense two-phase tableau simplex for small scenario programs:
//   minimize c.y  subject to  A y <= b, y >= 0.
// Bland's rule throughout (smallest-index entering column, smallest basic
// index on ratio ties), which makes the pivot sequence deterministic and
// cycle-free. Facet ids in the result: 0..R-1 are tight rows, R+j is the
// active lower bound y_j = 0.

namespace scenconf::detail {

struct SimplexResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::optimal;
  std::vector<double> y;
  double objective = 0.0;
  std::vector<int> active_facets;  // nonbasic structural/slack columns
  bool unique_vertex = false;      // all nonbasic reduced costs strictly positive
};

SimplexResult simplex_solve(const std::vector<std::vector<double>>& A,
                            const std::vector<double>& b,
                            const std::vector<double>& c);

}  // namespace scenconf::detail
