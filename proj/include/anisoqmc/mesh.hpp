#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "field.hpp"
#include "linalg.hpp"

namespace anisoqmc {

/// Conforming tetrahedral mesh of the unit cube. Level l has (2^(l+1)+1)^3
/// vertices (indexed lexicographically by coordinates) and 48*8^l tets, each
/// stored with positive orientation. Meshes produced by refine() keep, per
/// vertex, the pair of parent-level vertices it interpolates (a == b for
/// vertices inherited from the parent).
struct TetMesh {
  int level = 0;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<std::uint8_t> on_boundary;
  std::vector<std::array<int, 2>> edge_parents;  // empty for directly built meshes

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_tets() const { return tets.size(); }
};

namespace detail {

inline double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return dot(b - a, cross(c - a, d - a)) / 6.0;
}

inline void canonicalize_tet(std::array<int, 4>& t, const std::vector<Vec3>& verts) {
  std::sort(t.begin(), t.end());
  if (signed_volume(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]) < 0.0)
    std::swap(t[2], t[3]);
}

inline std::uint8_t boundary_flag(const Vec3& p) {
  auto on = [](double c) { return std::abs(c) < 1e-14 || std::abs(c - 1.0) < 1e-14; };
  return (on(p.x) || on(p.y) || on(p.z)) ? 1 : 0;
}

}  // namespace detail

/// Kuhn (Freudenthal) triangulation at the given level, built directly:
/// each lattice cube is cut into 6 tets sharing its (0,0,0)->(1,1,1) diagonal.
inline TetMesh kuhn_mesh(int level) {
  if (level < 0) throw std::invalid_argument("kuhn_mesh: negative level");
  if (level > 7) throw std::invalid_argument("kuhn_mesh: level too large");
  const int n = 1 << (level + 1);  // cubes per axis
  const double h = 1.0 / n;
  TetMesh m;
  m.level = level;
  const int s = n + 1;
  m.vertices.resize(static_cast<std::size_t>(s) * s * s);
  m.on_boundary.resize(m.vertices.size());
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        const std::size_t idx = (static_cast<std::size_t>(i) * s + j) * s + k;
        m.vertices[idx] = {i * h, j * h, k * h};
        m.on_boundary[idx] = detail::boundary_flag(m.vertices[idx]);
      }
  auto vid = [s](int i, int j, int k) { return (i * s + j) * s + k; };
  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  m.tets.reserve(static_cast<std::size_t>(n) * n * n * 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (const auto& p : perms) {
          int c[3] = {i, j, k};
          std::array<int, 4> t;
          t[0] = vid(c[0], c[1], c[2]);
          for (int step = 0; step < 3; ++step) {
            c[p[step]] += 1;
            t[step + 1] = vid(c[0], c[1], c[2]);
          }
          detail::canonicalize_tet(t, m.vertices);
          m.tets.push_back(t);
        }
  return m;
}

inline TetMesh build_base_mesh() { return kuhn_mesh(0); }

/// Red refinement: each tet is split into 8 via its edge midpoints. The
/// interior octahedron is cut along its shortest diagonal; exact ties are
/// broken lexicographically on the diagonal endpoint coordinates, which on
/// this mesh family reproduces the Kuhn triangulation of the finer lattice.
inline TetMesh refine(const TetMesh& parent) {
  const std::size_t np = parent.n_vertices();
  std::map<std::pair<int, int>, int> edge_mid;
  std::vector<Vec3> pos(parent.vertices);
  std::vector<std::array<int, 2>> parent_of(np);
  for (std::size_t i = 0; i < np; ++i) parent_of[i] = {static_cast<int>(i), static_cast<int>(i)};

  auto midpoint = [&](int a, int b) {
    if (a > b) std::swap(a, b);
    auto it = edge_mid.find({a, b});
    if (it != edge_mid.end()) return it->second;
    const int id = static_cast<int>(pos.size());
    pos.push_back((parent.vertices[a] + parent.vertices[b]) * 0.5);
    parent_of.push_back({a, b});
    edge_mid.emplace(std::make_pair(a, b), id);
    return id;
  };

  std::vector<std::array<int, 4>> children;
  children.reserve(parent.n_tets() * 8);
  for (const auto& t : parent.tets) {
    int mid[4][4];
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) mid[i][j] = mid[j][i] = midpoint(t[i], t[j]);
    for (int i = 0; i < 4; ++i) {
      std::array<int, 4> c = {t[i], 0, 0, 0};
      int w = 1;
      for (int j = 0; j < 4; ++j)
        if (j != i) c[w++] = mid[i][j];
      children.push_back(c);
    }
    // three ways to pair opposite midpoints; the chosen pair is the diagonal
    const std::array<std::array<int, 2>, 3> cand = {{{mid[0][1], mid[2][3]},
                                                     {mid[0][2], mid[1][3]},
                                                     {mid[0][3], mid[1][2]}}};
    int best = 0;
    auto key_less = [&](const std::array<int, 2>& a, const std::array<int, 2>& b) {
      const double la = norm_sq(pos[a[0]] - pos[a[1]]);
      const double lb = norm_sq(pos[b[0]] - pos[b[1]]);
      if (la != lb) return la < lb;
      const Vec3& alo = lex_less(pos[a[0]], pos[a[1]]) ? pos[a[0]] : pos[a[1]];
      const Vec3& ahi = lex_less(pos[a[0]], pos[a[1]]) ? pos[a[1]] : pos[a[0]];
      const Vec3& blo = lex_less(pos[b[0]], pos[b[1]]) ? pos[b[0]] : pos[b[1]];
      const Vec3& bhi = lex_less(pos[b[0]], pos[b[1]]) ? pos[b[1]] : pos[b[0]];
      if (lex_less(alo, blo)) return true;
      if (lex_less(blo, alo)) return false;
      return lex_less(ahi, bhi);
    };
    for (int c = 1; c < 3; ++c)
      if (key_less(cand[c], cand[best])) best = c;
    const int p = cand[best][0], q = cand[best][1];
    const auto& o1 = cand[(best + 1) % 3];
    const auto& o2 = cand[(best + 2) % 3];
    // o1 and o2 are the remaining opposite pairs; walking r1,r2,s1,s2 circles the equator
    const int r1 = o1[0], s1 = o1[1], r2 = o2[0], s2 = o2[1];
    children.push_back({p, q, r1, r2});
    children.push_back({p, q, r2, s1});
    children.push_back({p, q, s1, s2});
    children.push_back({p, q, s2, r1});
  }

  // re-index vertices lexicographically by coordinates
  std::vector<int> order(pos.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lex_less(pos[a], pos[b]); });
  std::vector<int> rank(pos.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<int>(r);

  TetMesh child;
  child.level = parent.level + 1;
  child.vertices.resize(pos.size());
  child.edge_parents.resize(pos.size());
  child.on_boundary.resize(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    child.vertices[rank[i]] = pos[i];
    child.edge_parents[rank[i]] = parent_of[i];
    child.on_boundary[rank[i]] = detail::boundary_flag(pos[i]);
  }
  child.tets.reserve(children.size());
  for (auto t : children) {
    for (int& v : t) v = rank[v];
    detail::canonicalize_tet(t, child.vertices);
    child.tets.push_back(t);
  }
  return child;
}

struct TetGeometry {
  double vol = 0;
  Vec3 grad[4];  // gradients of the four vertex basis functions
};

inline TetGeometry tet_geometry(const TetMesh& m, std::size_t t) {
  const auto& v = m.tets[t];
  const Vec3& a = m.vertices[v[0]];
  const Vec3 e1 = m.vertices[v[1]] - a;
  const Vec3 e2 = m.vertices[v[2]] - a;
  const Vec3 e3 = m.vertices[v[3]] - a;
  const double det = dot(e1, cross(e2, e3));
  TetGeometry g;
  g.vol = det / 6.0;
  g.grad[1] = cross(e2, e3) * (1.0 / det);
  g.grad[2] = cross(e3, e1) * (1.0 / det);
  g.grad[3] = cross(e1, e2) * (1.0 / det);
  g.grad[0] = (g.grad[1] + g.grad[2] + g.grad[3]) * -1.0;
  return g;
}

inline double total_volume(const TetMesh& m) {
  // Kahan summation: at level 4 there are ~2e5 terms and plain accumulation
  // drifts past the 1e-12 budget the partition-of-unity checks rely on.
  double s = 0, carry = 0;
  for (std::size_t t = 0; t < m.n_tets(); ++t) {
    const auto& v = m.tets[t];
    const double term = detail::signed_volume(m.vertices[v[0]], m.vertices[v[1]],
                                              m.vertices[v[2]], m.vertices[v[3]]) -
                        carry;
    const double next = s + term;
    carry = (next - s) - term;
    s = next;
  }
  return s;
}

namespace detail {

inline NodalField prolongate_step(const NodalField& u, const TetMesh& fine) {
  if (fine.edge_parents.empty())
    throw std::invalid_argument("prolongate: fine mesh has no refinement record");
  if (u.level + 1 != fine.level) throw std::invalid_argument("prolongate: level mismatch");
  NodalField out(fine.level, u.components, fine.n_vertices());
  const int nu = static_cast<int>(u.n_vertices());
  for (std::size_t v = 0; v < fine.n_vertices(); ++v) {
    const auto [a, b] = fine.edge_parents[v];
    if (a < 0 || b < 0 || a >= nu || b >= nu)
      throw std::invalid_argument("prolongate: refinement record does not match coarse mesh");
    for (int c = 0; c < u.components; ++c)
      out.at(v, c) = (a == b) ? u.at(a, c) : 0.5 * (u.at(a, c) + u.at(b, c));
  }
  return out;
}

}  // namespace detail

/// Exact P1 interpolation from coarse to fine. The chain overload expects the
/// contiguous refinement hierarchy covering u.level .. target level.
inline NodalField prolongate_chain(const NodalField& u, std::span<const TetMesh> chain) {
  if (chain.empty()) throw std::invalid_argument("prolongate_chain: empty chain");
  NodalField cur = u;
  for (const TetMesh& m : chain) {
    if (m.level == cur.level) {
      if (m.n_vertices() != cur.n_vertices())
        throw std::invalid_argument("prolongate_chain: vertex count mismatch");
      continue;
    }
    cur = detail::prolongate_step(cur, m);
  }
  return cur;
}

/// Two-mesh form; for gaps larger than one level the intermediate meshes are
/// reconstructed by refinement (construction is deterministic).
inline NodalField prolongate(const NodalField& u, const TetMesh& coarse, const TetMesh& fine) {
  if (u.level != coarse.level || u.n_vertices() != coarse.n_vertices())
    throw std::invalid_argument("prolongate: field does not live on the coarse mesh");
  if (fine.level <= coarse.level) throw std::invalid_argument("prolongate: level mismatch");
  NodalField cur = u;
  TetMesh inter;
  const TetMesh* prev = &coarse;
  while (cur.level + 1 < fine.level) {
    inter = refine(*prev);
    cur = detail::prolongate_step(cur, inter);
    prev = &inter;
  }
  return detail::prolongate_step(cur, fine);
}

/// Plain-text dump: header, then one "v x y z" line per vertex and one
/// "t a b c d" line per tet (vertex indices).
inline void dump_mesh(const TetMesh& m, std::ostream& os) {
  os << "tetmesh v1\n";
  os << "level " << m.level << "\nvertices " << m.n_vertices() << "\ntets " << m.n_tets() << "\n";
  char buf[96];
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    os << buf;
  }
  for (const auto& t : m.tets)
    os << "t " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
}

}  // namespace anisoqmc
