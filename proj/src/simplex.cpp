#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scenconf::detail {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kRatioTieTol = 1e-9;

struct Tableau {
  int rows = 0;        // constraint rows
  int ny = 0;          // structural variables
  int nslack = 0;      // == rows
  int nart = 0;
  int cols = 0;        // total variable columns (structural + slack + art)
  std::vector<std::vector<double>> t;  // rows x (cols + 1), last entry rhs
  std::vector<double> obj;             // reduced costs, cols entries
  std::vector<int> basis;              // basic variable per row
  std::vector<char> banned;            // columns barred from entering

  double& rhs(int i) { return t[size_t(i)][size_t(cols)]; }

  void pivot(int pr, int pc) {
    auto& prow = t[size_t(pr)];
    double inv = 1.0 / prow[size_t(pc)];
    for (double& v : prow) v *= inv;
    prow[size_t(pc)] = 1.0;  // kill residue
    for (int i = 0; i < rows; ++i) {
      if (i == pr) continue;
      auto& row = t[size_t(i)];
      double f = row[size_t(pc)];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols; ++j) row[size_t(j)] -= f * prow[size_t(j)];
      row[size_t(pc)] = 0.0;
    }
    double f = obj[size_t(pc)];
    if (f != 0.0) {
      for (int j = 0; j < cols; ++j) obj[size_t(j)] -= f * prow[size_t(j)];
      obj[size_t(pc)] = 0.0;
    }
    basis[size_t(pr)] = pc;
  }

  // Bland: entering = smallest-index column with negative reduced cost.
  int entering() const {
    for (int j = 0; j < cols; ++j) {
      if (banned[size_t(j)]) continue;
      if (obj[size_t(j)] < -kPivotTol) return j;
    }
    return -1;
  }

  // Bland: among minimum-ratio rows pick the smallest basic variable index.
  int leaving(int pc) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows; ++i) {
      double a = t[size_t(i)][size_t(pc)];
      if (a <= kPivotTol) continue;
      best = std::min(best, rhs(i) / a);
    }
    if (!std::isfinite(best)) return -1;
    int pick = -1;
    for (int i = 0; i < rows; ++i) {
      double a = t[size_t(i)][size_t(pc)];
      if (a <= kPivotTol) continue;
      double ratio = rhs(i) / a;
      if (ratio <= best + kRatioTieTol * std::max(1.0, std::abs(best))) {
        if (pick < 0 || basis[size_t(i)] < basis[size_t(pick)]) pick = i;
      }
    }
    return pick;
  }

  // Returns false on unboundedness.
  bool iterate() {
    for (;;) {
      int pc = entering();
      if (pc < 0) return true;
      int pr = leaving(pc);
      if (pr < 0) return false;
      pivot(pr, pc);
    }
  }
};

}  // namespace

SimplexResult simplex_solve(const std::vector<std::vector<double>>& A,
                            const std::vector<double>& b,
                            const std::vector<double>& c) {
  const int rows = int(A.size());
  const int ny = int(c.size());
  Tableau tb;
  tb.rows = rows;
  tb.ny = ny;
  tb.nslack = rows;

  double bscale = 1.0;
  std::vector<int> art_of_row(size_t(rows), -1);
  int nart = 0;
  for (int i = 0; i < rows; ++i) {
    bscale = std::max(bscale, std::abs(b[size_t(i)]));
    if (b[size_t(i)] < 0.0) art_of_row[size_t(i)] = nart++;
  }
  tb.nart = nart;
  tb.cols = ny + rows + nart;
  tb.t.assign(size_t(rows), std::vector<double>(size_t(tb.cols) + 1, 0.0));
  tb.basis.assign(size_t(rows), -1);
  tb.banned.assign(size_t(tb.cols), 0);

  for (int i = 0; i < rows; ++i) {
    auto& row = tb.t[size_t(i)];
    double sgn = b[size_t(i)] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < ny; ++j) row[size_t(j)] = sgn * A[size_t(i)][size_t(j)];
    row[size_t(ny + i)] = sgn;  // slack
    row[size_t(tb.cols)] = sgn * b[size_t(i)];
    if (art_of_row[size_t(i)] >= 0) {
      int ac = ny + rows + art_of_row[size_t(i)];
      row[size_t(ac)] = 1.0;
      tb.basis[size_t(i)] = ac;
    } else {
      tb.basis[size_t(i)] = ny + i;
    }
  }

  SimplexResult out;

  if (nart > 0) {
    // Phase 1: minimize the artificial sum.
    tb.obj.assign(size_t(tb.cols), 0.0);
    for (int k = 0; k < nart; ++k) tb.obj[size_t(ny + rows + k)] = 1.0;
    for (int i = 0; i < rows; ++i) {
      if (art_of_row[size_t(i)] < 0) continue;
      for (int j = 0; j < tb.cols; ++j)
        tb.obj[size_t(j)] -= tb.t[size_t(i)][size_t(j)];
    }
    if (!tb.iterate())
      throw std::logic_error("phase-1 objective unbounded below");
    double z1 = 0.0;
    for (int i = 0; i < rows; ++i)
      if (tb.basis[size_t(i)] >= ny + rows) z1 += tb.rhs(i);
    if (z1 > 1e-8 * std::max(1.0, bscale)) {
      out.status = SimplexResult::Status::infeasible;
      return out;
    }
    // Drive artificials out of the basis where possible.
    for (int i = 0; i < rows; ++i) {
      if (tb.basis[size_t(i)] < ny + rows) continue;
      int pc = -1;
      for (int j = 0; j < ny + rows; ++j) {
        if (std::abs(tb.t[size_t(i)][size_t(j)]) > kPivotTol) {
          pc = j;
          break;
        }
      }
      if (pc >= 0) tb.pivot(i, pc);
      // else: redundant row, artificial stays basic at zero
    }
    for (int k = 0; k < nart; ++k) tb.banned[size_t(ny + rows + k)] = 1;
  }

  // Phase 2.
  tb.obj.assign(size_t(tb.cols), 0.0);
  for (int j = 0; j < ny; ++j) tb.obj[size_t(j)] = c[size_t(j)];
  for (int i = 0; i < rows; ++i) {
    int bj = tb.basis[size_t(i)];
    if (bj < ny && c[size_t(bj)] != 0.0) {
      double f = c[size_t(bj)];
      for (int j = 0; j < tb.cols; ++j)
        tb.obj[size_t(j)] -= f * tb.t[size_t(i)][size_t(j)];
      tb.obj[size_t(bj)] = 0.0;
    }
  }
  if (!tb.iterate()) {
    out.status = SimplexResult::Status::unbounded;
    return out;
  }

  out.status = SimplexResult::Status::optimal;
  out.y.assign(size_t(ny), 0.0);
  for (int i = 0; i < rows; ++i) {
    int bj = tb.basis[size_t(i)];
    if (bj < ny) out.y[size_t(bj)] = tb.rhs(i);
  }
  out.objective = 0.0;
  for (int j = 0; j < ny; ++j) out.objective += c[size_t(j)] * out.y[size_t(j)];

  std::vector<char> in_basis(size_t(tb.cols), 0);
  for (int i = 0; i < rows; ++i) in_basis[size_t(tb.basis[size_t(i)])] = 1;
  out.unique_vertex = true;
  for (int j = 0; j < ny + rows; ++j) {
    if (in_basis[size_t(j)]) continue;
    if (j < ny)
      out.active_facets.push_back(rows + j);  // y_j = 0
    else
      out.active_facets.push_back(j - ny);  // row j-ny tight
    if (tb.obj[size_t(j)] <= kPivotTol) out.unique_vertex = false;
  }
  return out;
}

}  // namespace scenconf::detail
