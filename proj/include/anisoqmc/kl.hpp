#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "covariance.hpp"
#include "field.hpp"
#include "mesh.hpp"
#include "pivoted_cholesky.hpp"

namespace anisoqmc {

/// Truncated expansion of the direction field over a mesh:
///   V(y) = mean + sum_k y_k * mode_k,   y in [-1,1]^modes.
/// Modes are nodal 3-vector fields; each factor column is scaled by sqrt(3) so
/// that with Var(y_k) = 1/3 the expansion reproduces the model covariance.
struct KLExpansion {
  int level = 0;
  int modes = 0;
  double trace_tol = 0;
  NodalField mean;                     // 3 components
  std::vector<double> mode_matrix;     // modes rows x (3 * n_vertices) columns
  std::vector<int> mode_component;     // source component of each mode
  std::vector<double> mode_removed_trace;
  std::array<int, 3> component_rank = {0, 0, 0};
  std::array<std::vector<double>, 3> trace_history;

  std::size_t n_vertices() const { return mean.n_vertices(); }

  double mode_value(int k, std::size_t vertex, int comp) const {
    return mode_matrix[static_cast<std::size_t>(k) * (3 * n_vertices()) + 3 * vertex + comp];
  }
};

/// Factors each component kernel on the mesh vertices with relative trace
/// tolerance tol_base * 4^-level, scales columns by sqrt(3), and merges the
/// three column sets into modes ordered by decreasing removed trace
/// (ties: component, then pivot step).
inline KLExpansion build_expansion(const CovarianceModel& model, const TetMesh& mesh,
                                   double tol_base = 1e-4) {
  KLExpansion kl;
  kl.level = mesh.level;
  kl.trace_tol = tol_base * std::pow(4.0, -mesh.level);
  const std::size_t n = mesh.n_vertices();
  kl.mean = NodalField(mesh.level, 3, n);
  for (std::size_t v = 0; v < n; ++v) {
    const Vec3 m = model.mean(mesh.vertices[v]);
    kl.mean.at(v, 0) = m.x;
    kl.mean.at(v, 1) = m.y;
    kl.mean.at(v, 2) = m.z;
  }

  struct Entry {
    double removed;
    int comp;
    int step;
    const std::vector<double>* col;
  };
  std::vector<Entry> entries;
  std::array<PivotedCholeskyResult, 3> fac;
  for (int c = 0; c < 3; ++c) {
    fac[c] = pivoted_cholesky(
        static_cast<int>(n),
        [&](int i, int j) { return model.kernel(c, mesh.vertices[i], mesh.vertices[j]); },
        kl.trace_tol);
    kl.component_rank[c] = fac[c].rank;
    kl.trace_history[c] = fac[c].trace_history;
    for (int s = 0; s < fac[c].rank; ++s)
      entries.push_back({fac[c].removed_trace[s], c, s, &fac[c].cols[s]});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::make_tuple(-a.removed, a.comp, a.step) < std::make_tuple(-b.removed, b.comp, b.step);
  });

  kl.modes = static_cast<int>(entries.size());
  kl.mode_matrix.assign(static_cast<std::size_t>(kl.modes) * 3 * n, 0.0);
  const double root3 = std::sqrt(3.0);
  for (int k = 0; k < kl.modes; ++k) {
    const Entry& e = entries[k];
    kl.mode_component.push_back(e.comp);
    kl.mode_removed_trace.push_back(e.removed);
    double* row = kl.mode_matrix.data() + static_cast<std::size_t>(k) * 3 * n;
    for (std::size_t v = 0; v < n; ++v) row[3 * v + e.comp] = root3 * (*e.col)[v];
  }
  return kl;
}

/// Evaluates the expansion at parameter y (length must equal modes).
inline NodalField sample_field(const KLExpansion& kl, std::span<const double> y) {
  if (static_cast<int>(y.size()) != kl.modes)
    throw std::invalid_argument("sample_field: parameter dimension mismatch");
  NodalField out = kl.mean;
  const std::size_t len = out.values.size();
  for (int k = 0; k < kl.modes; ++k) {
    const double yk = y[k];
    const double* row = kl.mode_matrix.data() + static_cast<std::size_t>(k) * len;
    for (std::size_t i = 0; i < len; ++i) out.values[i] += yk * row[i];
  }
  return out;
}

/// Text serialization, versioned. Header carries level, mode count, vertex
/// count and the trace tolerance; the table is vertex-major (one row per
/// vertex), mode-minor (mean triple first, then one triple per mode).
inline void export_expansion(const KLExpansion& kl, std::ostream& os) {
  os << "klx v1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", kl.trace_tol);
  os << "level " << kl.level << "\nmodes " << kl.modes << "\nvertices " << kl.n_vertices()
     << "\ntrace_tol " << buf << "\ncomponents";
  for (int c : kl.mode_component) os << ' ' << c;
  os << '\n';
  const std::size_t n = kl.n_vertices();
  for (std::size_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) {
      std::snprintf(buf, sizeof buf, c == 0 ? "%.17g" : " %.17g", kl.mean.at(v, c));
      os << buf;
    }
    for (int k = 0; k < kl.modes; ++k)
      for (int c = 0; c < 3; ++c) {
        std::snprintf(buf, sizeof buf, " %.17g", kl.mode_value(k, v, c));
        os << buf;
      }
    os << '\n';
  }
}

inline KLExpansion import_expansion(std::istream& is) {
  auto fail = [](const std::string& why) -> KLExpansion {
    throw std::runtime_error("import_expansion: " + why);
  };
  std::string magic, version;
  is >> magic >> version;
  if (magic != "klx" || version != "v1") return fail("unrecognized header");
  KLExpansion kl;
  std::string key;
  std::size_t n = 0;
  is >> key >> kl.level;
  if (key != "level") return fail("missing level");
  is >> key >> kl.modes;
  if (key != "modes") return fail("missing modes");
  is >> key >> n;
  if (key != "vertices") return fail("missing vertices");
  is >> key >> kl.trace_tol;
  if (key != "trace_tol") return fail("missing trace_tol");
  is >> key;
  if (key != "components") return fail("missing components");
  kl.mode_component.resize(kl.modes);
  for (int k = 0; k < kl.modes; ++k) is >> kl.mode_component[k];
  kl.mean = NodalField(kl.level, 3, n);
  kl.mode_matrix.assign(static_cast<std::size_t>(kl.modes) * 3 * n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) is >> kl.mean.at(v, c);
    for (int k = 0; k < kl.modes; ++k)
      for (int c = 0; c < 3; ++c)
        is >> kl.mode_matrix[static_cast<std::size_t>(k) * 3 * n + 3 * v + c];
  }
  if (!is) return fail("truncated table");
  return kl;
}

}  // namespace anisoqmc
