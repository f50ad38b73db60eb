#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "coefficient.hpp"
#include "field.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace anisoqmc {

struct SolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssembledSystem {
  int level = 0;
  int n_free = 0;
  SparseMatrix K;
  std::vector<double> rhs;
  std::vector<int> free_to_vertex;
  std::vector<int> vertex_to_free;  // -1 for eliminated vertices
};

/// Builds the P1 Galerkin system for -div(A grad u) = 1 with zero Dirichlet
/// data. The sparsity pattern, vertex maps and unit load vector depend only on
/// the mesh, so one Assembler serves all samples on its level. The tensor A is
/// evaluated once per element at the barycenter of the direction field.
class Assembler {
 public:
  explicit Assembler(const TetMesh& mesh, bool eliminate_boundary = true)
      : mesh_(&mesh), eliminate_(eliminate_boundary) {
    const std::size_t n = mesh.n_vertices();
    vertex_to_free_.assign(n, -1);
    for (std::size_t v = 0; v < n; ++v)
      if (!eliminate_ || !mesh.on_boundary[v]) {
        vertex_to_free_[v] = static_cast<int>(free_to_vertex_.size());
        free_to_vertex_.push_back(static_cast<int>(v));
      }
    const int nf = static_cast<int>(free_to_vertex_.size());

    std::vector<std::vector<int>> adj(nf);
    for (const auto& t : mesh.tets)
      for (int i = 0; i < 4; ++i) {
        const int fi = vertex_to_free_[t[i]];
        if (fi < 0) continue;
        for (int j = 0; j < 4; ++j) {
          const int fj = vertex_to_free_[t[j]];
          if (fj >= 0) adj[fi].push_back(fj);
        }
      }
    pattern_.n = nf;
    pattern_.row_ptr.assign(nf + 1, 0);
    for (int i = 0; i < nf; ++i) {
      auto& row = adj[i];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      pattern_.row_ptr[i + 1] = pattern_.row_ptr[i] + static_cast<int>(row.size());
    }
    pattern_.cols.reserve(pattern_.row_ptr[nf]);
    for (auto& row : adj) pattern_.cols.insert(pattern_.cols.end(), row.begin(), row.end());
    pattern_.vals.assign(pattern_.cols.size(), 0.0);

    rhs_unit_.assign(nf, 0.0);
    for (std::size_t t = 0; t < mesh.n_tets(); ++t) {
      const double vol = tet_geometry(mesh, t).vol;
      for (int i = 0; i < 4; ++i) {
        const int fi = vertex_to_free_[mesh.tets[t][i]];
        if (fi >= 0) rhs_unit_[fi] += vol / 4.0;
      }
    }
  }

  AssembledSystem assemble(const NodalField& direction, const CoefficientParams& params,
                           EllipticityCounter* counter = nullptr) const {
    if (direction.components != 3 || direction.n_vertices() != mesh_->n_vertices() ||
        direction.level != mesh_->level)
      throw std::invalid_argument("assemble: direction field does not match mesh");
    params.validate();
    AssembledSystem sys;
    sys.level = mesh_->level;
    sys.n_free = pattern_.n;
    sys.K = pattern_;  // pattern copy, values zero
    sys.rhs = rhs_unit_;
    sys.free_to_vertex = free_to_vertex_;
    sys.vertex_to_free = vertex_to_free_;

    for (std::size_t t = 0; t < mesh_->n_tets(); ++t) {
      const auto& vt = mesh_->tets[t];
      const TetGeometry g = tet_geometry(*mesh_, t);
      Vec3 vbar{0, 0, 0};
      for (int i = 0; i < 4; ++i) {
        vbar.x += direction.at(vt[i], 0);
        vbar.y += direction.at(vt[i], 1);
        vbar.z += direction.at(vt[i], 2);
      }
      vbar = vbar * 0.25;
      const Mat3 A = diffusion_tensor(vbar, params, counter);
      Vec3 Ag[4];
      for (int i = 0; i < 4; ++i) Ag[i] = A * g.grad[i];
      for (int i = 0; i < 4; ++i) {
        const int fi = vertex_to_free_[vt[i]];
        if (fi < 0) continue;
        for (int j = 0; j < 4; ++j) {
          const int fj = vertex_to_free_[vt[j]];
          if (fj < 0) continue;
          add_entry(sys.K, fi, fj, g.vol * dot(g.grad[i], Ag[j]));
        }
      }
    }
    return sys;
  }

  const TetMesh& mesh() const { return *mesh_; }

 private:
  static void add_entry(SparseMatrix& K, int i, int j, double v) {
    const auto begin = K.cols.begin() + K.row_ptr[i];
    const auto end = K.cols.begin() + K.row_ptr[i + 1];
    const auto it = std::lower_bound(begin, end, j);
    K.vals[static_cast<std::size_t>(it - K.cols.begin())] += v;
  }

  const TetMesh* mesh_;
  bool eliminate_;
  std::vector<int> vertex_to_free_, free_to_vertex_;
  SparseMatrix pattern_;
  std::vector<double> rhs_unit_;
};

inline AssembledSystem assemble(const TetMesh& mesh, const NodalField& direction,
                                const CoefficientParams& params, bool eliminate_boundary = true,
                                EllipticityCounter* counter = nullptr) {
  return Assembler(mesh, eliminate_boundary).assemble(direction, params, counter);
}

struct SolveInfo {
  long iterations = 0;
  double rel_residual = 0;
  double min_curvature = 0;
};

/// Jacobi-PCG solve of an assembled system; the result is a full-mesh nodal
/// field with zeros on the boundary. Iteration cap is 10 * n_free.
inline NodalField solve(const AssembledSystem& sys, const TetMesh& mesh, double rel_tol = 1e-10,
                        SolveInfo* info = nullptr) {
  std::vector<double> x;
  const PcgResult r = pcg_jacobi(sys.K, sys.rhs, x, rel_tol, 10L * std::max(sys.n_free, 1));
  if (info) {
    info->iterations = r.iterations;
    info->rel_residual = r.rel_residual;
    info->min_curvature = r.min_curvature;
  }
  if (r.indefinite) throw SolveFailure("solve: matrix not positive definite along CG directions");
  if (!r.converged) throw SolveFailure("solve: CG iteration cap reached");
  NodalField u(sys.level, 1, mesh.n_vertices());
  for (int i = 0; i < sys.n_free; ++i) u.at(sys.free_to_vertex[i]) = x[i];
  return u;
}

namespace detail {

template <class PerTet>
void over_tets(const NodalField& u, const TetMesh& mesh, PerTet&& f) {
  if (u.components != 1 || u.n_vertices() != mesh.n_vertices())
    throw std::invalid_argument("norm: field does not match mesh");
  for (std::size_t t = 0; t < mesh.n_tets(); ++t) {
    const auto& vt = mesh.tets[t];
    const TetGeometry g = tet_geometry(mesh, t);
    double vals[4];
    Vec3 grad{0, 0, 0};
    for (int i = 0; i < 4; ++i) {
      vals[i] = u.at(vt[i]);
      grad += g.grad[i] * vals[i];
    }
    f(g.vol, vals, grad);
  }
}

}  // namespace detail

/// Exact L2 norm of the piecewise-linear function (consistent mass matrix).
inline double l2_norm(const NodalField& u, const TetMesh& mesh) {
  double s = 0;
  detail::over_tets(u, mesh, [&](double vol, const double* v, const Vec3&) {
    const double sum = v[0] + v[1] + v[2] + v[3];
    const double sq = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3];
    s += vol / 20.0 * (sq + sum * sum);
  });
  return std::sqrt(s);
}

inline double h1_seminorm(const NodalField& u, const TetMesh& mesh) {
  double s = 0;
  detail::over_tets(u, mesh,
                    [&](double vol, const double*, const Vec3& g) { s += vol * norm_sq(g); });
  return std::sqrt(s);
}

inline double h1_norm(const NodalField& u, const TetMesh& mesh) {
  const double l2 = l2_norm(u, mesh);
  const double h1 = h1_seminorm(u, mesh);
  return std::sqrt(l2 * l2 + h1 * h1);
}

/// W^{1,1} norm: the |u| part integrated by the 4-point vertex rule (exact on
/// elements where u keeps one sign), the gradient part as the elementwise
/// Euclidean norm.
inline double w11_norm(const NodalField& u, const TetMesh& mesh) {
  double s = 0;
  detail::over_tets(u, mesh, [&](double vol, const double* v, const Vec3& g) {
    s += vol / 4.0 * (std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]) + std::abs(v[3]));
    s += vol * norm(g);
  });
  return s;
}

}  // namespace anisoqmc
