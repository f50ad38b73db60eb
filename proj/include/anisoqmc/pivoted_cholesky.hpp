#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace anisoqmc {

struct PivotedCholeskyResult {
  int n = 0;
  int rank = 0;
  std::vector<std::vector<double>> cols;  // rank columns of length n
  std::vector<int> pivots;                // pivot index chosen at each step
  std::vector<double> trace_history;      // relative remaining trace after each step
  std::vector<double> removed_trace;      // trace removed by each column
  bool tol_reached = true;
};

/// Greedy low-rank factorization of a symmetric PSD matrix given entrywise:
/// at each step the largest remaining diagonal entry is pivoted (ties break to
/// the lowest index) and its residual column appended, until the remaining
/// trace falls below rel_tol * initial trace. Only the diagonal and the pivot
/// rows are ever evaluated. A pivot below -1e-12 * initial trace aborts: the
/// input is not PSD. If the tolerance is still unmet at full rank (or when the
/// residual diagonal hits zero early), tol_reached is false.
template <class Kernel>  // double(int row, int col)
PivotedCholeskyResult pivoted_cholesky(int n, Kernel&& k, double rel_tol) {
  if (n < 1) throw std::invalid_argument("pivoted_cholesky: empty matrix");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("pivoted_cholesky: tolerance must be positive");
  PivotedCholeskyResult res;
  res.n = n;
  std::vector<double> d(n);
  double trace0 = 0;
  for (int i = 0; i < n; ++i) {
    d[i] = k(i, i);
    trace0 += d[i];
  }
  if (!(trace0 > 0.0)) return res;  // zero operator, rank 0

  while (res.rank < n) {
    int p = 0;
    for (int i = 1; i < n; ++i)
      if (d[i] > d[p]) p = i;
    if (d[p] < -1e-12 * trace0)
      throw std::runtime_error("pivoted_cholesky: negative pivot, matrix not PSD");
    if (d[p] <= 0.0) {
      res.tol_reached = false;  // residual exhausted before the tolerance was met
      break;
    }
    const double root = std::sqrt(d[p]);
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) {
      double s = k(i, p);
      for (const auto& prev : res.cols) s -= prev[i] * prev[p];
      col[i] = s / root;
    }
    col[p] = root;
    double removed = 0, remaining = 0;
    for (int i = 0; i < n; ++i) {
      d[i] -= col[i] * col[i];
      removed += col[i] * col[i];
    }
    d[p] = 0.0;
    for (int i = 0; i < n; ++i)
      if (d[i] < -1e-12 * trace0)
        throw std::runtime_error("pivoted_cholesky: negative residual diagonal, matrix not PSD");
    for (int i = 0; i < n; ++i) remaining += std::max(d[i], 0.0);
    res.cols.push_back(std::move(col));
    res.pivots.push_back(p);
    res.removed_trace.push_back(removed);
    res.trace_history.push_back(remaining / trace0);
    ++res.rank;
    if (remaining / trace0 < rel_tol) return res;
  }
  res.tol_reached = false;
  return res;
}

}  // namespace anisoqmc
