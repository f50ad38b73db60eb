#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace anisoqmc {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm_sq(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(norm_sq(a)); }

/// Lexicographic order on coordinates; exact on the dyadic lattices used here.
inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

struct Mat3 {
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  double& operator()(int i, int j) { return m[i][j]; }
  double operator()(int i, int j) const { return m[i][j]; }

  static Mat3 identity() {
    Mat3 r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  Mat3 operator+(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
    return r;
  }
  Mat3 operator-(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] - o.m[i][j];
    return r;
  }
  Mat3 operator*(double s) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[i][j] * s;
    return r;
  }
  Vec3 operator*(const Vec3& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a[i] * b[j];
  return r;
}

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += a.m[i][k] * b.m[k][j];
      r.m[i][j] = s;
    }
  return r;
}

inline Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = a.m[j][i];
  return r;
}

inline double max_abs_entry(const Mat3& a) {
  double r = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r = std::max(r, std::abs(a.m[i][j]));
  return r;
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending. Cyclic Jacobi; unlike the
/// trigonometric closed form it keeps full precision at repeated eigenvalues,
/// which the anisotropic coefficient produces for every sample.
inline std::array<double, 3> sym3_eigenvalues(const Mat3& a) {
  double w[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) w[i][j] = 0.5 * (a.m[i][j] + a.m[j][i]);

  for (int sweep = 0; sweep < 32; ++sweep) {
    const double off = std::abs(w[0][1]) + std::abs(w[0][2]) + std::abs(w[1][2]);
    const double scale = std::abs(w[0][0]) + std::abs(w[1][1]) + std::abs(w[2][2]) + off;
    if (off <= scale * 1e-17 || off == 0.0) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (w[p][q] == 0.0) continue;
        const double theta = (w[q][q] - w[p][p]) / (2.0 * w[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double h = t * w[p][q];
        w[p][p] -= h;
        w[q][q] += h;
        w[p][q] = w[q][p] = 0.0;
        const int r = 3 - p - q;  // the off-pivot index
        const double wrp = w[r][p], wrq = w[r][q];
        w[r][p] = w[p][r] = wrp - s * (wrq + tau * wrp);
        w[r][q] = w[q][r] = wrq + s * (wrp - tau * wrq);
      }
  }
  std::array<double, 3> d = {w[0][0], w[1][1], w[2][2]};
  std::sort(d.begin(), d.end());
  return d;
}

/// Spectral norm of a symmetric matrix: largest absolute eigenvalue.
inline double sym3_spectral_norm(const Mat3& a) {
  auto e = sym3_eigenvalues(a);
  return std::max(std::abs(e[0]), std::abs(e[2]));
}

}  // namespace anisoqmc
