#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace anisoqmc {

struct SparseMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n+1
  std::vector<int> cols;     // sorted within each row
  std::vector<double> vals;

  void matvec(const double* x, double* y) const {
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += vals[k] * x[cols[k]];
      y[i] = s;
    }
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        if (cols[k] == i) d[i] = vals[k];
    return d;
  }
};

struct PcgResult {
  bool converged = false;
  bool indefinite = false;  // nonpositive curvature encountered
  long iterations = 0;
  double rel_residual = 0;
  double min_curvature = 0;  // min of p'Kp / p'p over iterations
};

/// Conjugate gradients with Jacobi preconditioning, x0 = 0. Convergence is
/// ||b - Kx||_2 <= rel_tol * ||b||_2; iteration cap is max_iter. A zero rhs
/// returns the zero solution immediately.
inline PcgResult pcg_jacobi(const SparseMatrix& K, const std::vector<double>& b,
                            std::vector<double>& x, double rel_tol, long max_iter) {
  const int n = K.n;
  if (static_cast<int>(b.size()) != n) throw std::invalid_argument("pcg_jacobi: size mismatch");
  x.assign(n, 0.0);
  PcgResult res;
  double bnorm2 = 0;
  for (double v : b) bnorm2 += v * v;
  if (bnorm2 == 0.0) {
    res.converged = true;
    return res;
  }
  const std::vector<double> diag = K.diagonal();
  std::vector<double> inv_diag(n);
  for (int i = 0; i < n; ++i) {
    if (!(diag[i] > 0.0)) throw std::runtime_error("pcg_jacobi: nonpositive diagonal");
    inv_diag[i] = 1.0 / diag[i];
  }

  std::vector<double> r(b), z(n), p(n), Kp(n);
  for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = 0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];
  const double stop2 = rel_tol * rel_tol * bnorm2;
  double rnorm2 = bnorm2;
  res.min_curvature = std::numeric_limits<double>::infinity();

  while (res.iterations < max_iter) {
    ++res.iterations;
    K.matvec(p.data(), Kp.data());
    double pKp = 0, pp = 0;
    for (int i = 0; i < n; ++i) {
      pKp += p[i] * Kp[i];
      pp += p[i] * p[i];
    }
    if (pp > 0) res.min_curvature = std::min(res.min_curvature, pKp / pp);
    if (!(pKp > 0.0)) {
      res.indefinite = true;
      break;
    }
    const double alpha = rz / pKp;
    rnorm2 = 0;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Kp[i];
      rnorm2 += r[i] * r[i];
    }
    if (rnorm2 <= stop2) {
      res.converged = true;
      break;
    }
    double rz_next = 0;
    for (int i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
      rz_next += r[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.rel_residual = std::sqrt(rnorm2 / bnorm2);
  return res;
}

}  // namespace anisoqmc
