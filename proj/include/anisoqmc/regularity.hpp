#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coefficient.hpp"
#include "kl.hpp"
#include "mesh.hpp"

namespace anisoqmc {

/// Per-term decay of the expansion, measured in the discrete surrogate of the
/// weighted W^{smoothness,inf} norm: sup of the nodal vector norms plus, for
/// smoothness 1, the sup over elements of each first-derivative column norm.
/// Index 0 is the mean field, index k >= 1 mode k.
struct ModeDecay {
  int smoothness = 0;
  std::vector<double> gamma;
  double c_gamma = 2.0;  // max(sum gamma, 2)
};

namespace detail {

template <class ValueAt>  // double(vertex, comp)
double field_decay_norm(const TetMesh& mesh, int smoothness, ValueAt&& value) {
  double sup = 0;
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
    const double n2 = value(v, 0) * value(v, 0) + value(v, 1) * value(v, 1) +
                      value(v, 2) * value(v, 2);
    sup = std::max(sup, n2);
  }
  double out = std::sqrt(sup);
  if (smoothness == 0) return out;
  double dsup[3] = {0, 0, 0};
  for (std::size_t t = 0; t < mesh.n_tets(); ++t) {
    const TetGeometry g = tet_geometry(mesh, t);
    const auto& vt = mesh.tets[t];
    for (int j = 0; j < 3; ++j) {
      double col2 = 0;
      for (int c = 0; c < 3; ++c) {
        double d = 0;
        for (int i = 0; i < 4; ++i) d += value(vt[i], c) * g.grad[i][j];
        col2 += d * d;
      }
      dsup[j] = std::max(dsup[j], col2);
    }
  }
  for (int j = 0; j < 3; ++j) out += std::sqrt(dsup[j]);
  return out;
}

}  // namespace detail

inline ModeDecay mode_decay(const KLExpansion& kl, const TetMesh& mesh, int smoothness) {
  if (smoothness < 0 || smoothness > 1)
    throw std::invalid_argument("mode_decay: nodal surrogate only supports smoothness 0 and 1");
  if (kl.n_vertices() != mesh.n_vertices() || kl.level != mesh.level)
    throw std::invalid_argument("mode_decay: expansion does not live on the mesh");
  ModeDecay d;
  d.smoothness = smoothness;
  d.gamma.reserve(kl.modes + 1);
  d.gamma.push_back(detail::field_decay_norm(
      mesh, smoothness, [&](std::size_t v, int c) { return kl.mean.at(v, c); }));
  for (int k = 0; k < kl.modes; ++k)
    d.gamma.push_back(detail::field_decay_norm(
        mesh, smoothness, [&](std::size_t v, int c) { return kl.mode_value(k, v, c); }));
  double sum = 0;
  for (double g : d.gamma) sum += g;
  d.c_gamma = std::max(sum, 2.0);
  return d;
}

/// The chain of derivative-bound prefactors admits two published spellings
/// that differ in which of the inverse-gram / length factors carries 1/lo^2
/// and which carries hi. proof is the internally consistent set and the
/// default; statement reproduces the swapped display.
enum class BoundConvention { proof, statement };

struct BoundConstants {
  int smoothness = 0;
  double band_lo = 0, band_hi = 0;
  double c_gamma = 0;
  BoundConvention convention = BoundConvention::proof;
  double k_outer = 0, k_gram = 0, k_gram_inv = 0, k_len = 0;
  double k_proj = 0, k_scaled_proj = 0, k_tensor = 0;
  double c_gram_inv = 0, c_len = 0, c_proj = 0, c_scaled_proj = 0, c_tensor = 0;
  std::vector<double> mu;  // c_tensor * gamma, aligned with ModeDecay::gamma
};

inline BoundConstants bound_constants(const ModeDecay& decay, double band_lo, double band_hi,
                                      BoundConvention conv = BoundConvention::proof) {
  if (!(0 < band_lo && band_lo <= 1.0 && 1.0 <= band_hi))
    throw std::invalid_argument("bound_constants: band must satisfy 0 < lo <= 1 <= hi");
  BoundConstants b;
  b.smoothness = decay.smoothness;
  b.band_lo = band_lo;
  b.band_hi = band_hi;
  b.c_gamma = decay.c_gamma;
  b.convention = conv;
  const double lo2 = band_lo * band_lo;
  b.k_outer = b.k_gram = decay.c_gamma * decay.c_gamma;
  const double base = 2.0 * b.k_gram / lo2;
  const double powk = std::pow(base, decay.smoothness);
  const double kp1 = decay.smoothness + 1;
  if (conv == BoundConvention::proof) {
    b.k_gram_inv = kp1 * (1.0 / lo2) * powk;
    b.k_len = kp1 * band_hi * powk;
  } else {
    b.k_gram_inv = kp1 * band_hi * powk;
    b.k_len = kp1 * (1.0 / lo2) * powk;
  }
  b.c_gram_inv = b.c_len = base / std::log(2.0);
  b.k_proj = 3.0 * b.k_gram_inv * b.k_outer;
  b.c_proj = b.c_gram_inv;
  b.k_scaled_proj = b.k_len * b.k_proj;
  b.c_scaled_proj = 2.0 * std::max(b.c_len, b.c_proj);
  b.k_tensor = b.k_scaled_proj + band_hi * b.k_proj + band_hi;
  b.c_tensor = std::max(b.c_scaled_proj, b.c_proj);
  b.mu.reserve(decay.gamma.size());
  for (double g : decay.gamma) b.mu.push_back(b.c_tensor * g);
  return b;
}

struct DerivativeCheck {
  std::array<int, 3> alpha = {0, 0, 0};  // multi-index over the leading modes
  int order = 0;
  double lhs = 0, rhs = 0;
  bool pass = false;
};

/// Central finite differences of the diffusion tensor in the parameter, at
/// y = 0 and four fixed pseudo-random interior parameter points, maximised
/// over all mesh vertices, against order! * k_tensor * c_tensor^order *
/// prod gamma^alpha with the order-0 decay surrogate and proof constants.
inline std::vector<DerivativeCheck> derivative_bound_checks(
    const KLExpansion& kl, const CoefficientParams& params, const TetMesh& mesh,
    int max_order = 2, int n_modes = 3, double fd_step = 1e-4, double slack = 1.01) {
  if (max_order < 0 || max_order > 2)
    throw std::invalid_argument("derivative_bound_checks: order must be 0, 1 or 2");
  const ModeDecay decay = mode_decay(kl, mesh, 0);
  const BoundConstants bc = bound_constants(decay, params.band_lo, params.band_hi);
  const int m = std::min(n_modes, kl.modes);

  std::vector<std::vector<double>> ys;
  ys.emplace_back(kl.modes, 0.0);
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (int s = 0; s < 4; ++s) {
    std::vector<double> y(kl.modes);
    for (double& v : y) v = uni(rng);
    ys.push_back(std::move(y));
  }

  // tensors at a shifted parameter, all vertices
  auto tensors_at = [&](const std::vector<double>& y0, int k1, double h1, int k2, double h2) {
    std::vector<double> y = y0;
    if (k1 >= 0) y[k1] += h1;
    if (k2 >= 0) y[k2] += h2;
    const NodalField f = sample_field(kl, y);
    std::vector<Mat3> out(f.n_vertices());
    for (std::size_t v = 0; v < f.n_vertices(); ++v)
      out[v] = diffusion_tensor({f.at(v, 0), f.at(v, 1), f.at(v, 2)}, params);
    return out;
  };

  std::vector<DerivativeCheck> checks;
  const double h = fd_step;
  std::vector<std::array<int, 3>> alphas;
  for (int a0 = 0; a0 <= max_order; ++a0)
    for (int a1 = 0; a1 + a0 <= max_order; ++a1)
      for (int a2 = 0; a2 + a1 + a0 <= max_order; ++a2)
        if (a0 + a1 + a2 <= max_order) alphas.push_back({a0, a1, a2});
  std::sort(alphas.begin(), alphas.end(), [](const auto& a, const auto& b) {
    const int sa = a[0] + a[1] + a[2], sb = b[0] + b[1] + b[2];
    if (sa != sb) return sa < sb;
    return a < b;
  });

  for (const auto& alpha : alphas) {
    const int order = alpha[0] + alpha[1] + alpha[2];
    bool in_range = true;
    for (int j = 0; j < 3; ++j)
      if (alpha[j] > 0 && j >= m) in_range = false;
    if (!in_range) continue;

    DerivativeCheck chk;
    chk.alpha = alpha;
    chk.order = order;
    for (const auto& y : ys) {
      std::vector<Mat3> fd;
      if (order == 0) {
        fd = tensors_at(y, -1, 0, -1, 0);
      } else if (order == 1) {
        int k = alpha[0] ? 0 : (alpha[1] ? 1 : 2);
        auto plus = tensors_at(y, k, h, -1, 0);
        auto minus = tensors_at(y, k, -h, -1, 0);
        fd.resize(plus.size());
        for (std::size_t v = 0; v < fd.size(); ++v) fd[v] = (plus[v] - minus[v]) * (0.5 / h);
      } else {
        int k1 = -1, k2 = -1;
        for (int j = 0; j < 3; ++j)
          for (int c = 0; c < alpha[j]; ++c) (k1 < 0 ? k1 : k2) = j;
        if (k1 == k2) {
          auto plus = tensors_at(y, k1, h, -1, 0);
          auto mid = tensors_at(y, -1, 0, -1, 0);
          auto minus = tensors_at(y, k1, -h, -1, 0);
          fd.resize(plus.size());
          for (std::size_t v = 0; v < fd.size(); ++v)
            fd[v] = (plus[v] - mid[v] * 2.0 + minus[v]) * (1.0 / (h * h));
        } else {
          auto pp = tensors_at(y, k1, h, k2, h);
          auto pm = tensors_at(y, k1, h, k2, -h);
          auto mp = tensors_at(y, k1, -h, k2, h);
          auto mm = tensors_at(y, k1, -h, k2, -h);
          fd.resize(pp.size());
          for (std::size_t v = 0; v < fd.size(); ++v)
            fd[v] = (pp[v] - pm[v] - mp[v] + mm[v]) * (1.0 / (4.0 * h * h));
        }
      }
      for (const Mat3& dm : fd) chk.lhs = std::max(chk.lhs, sym3_spectral_norm(dm));
    }
    double fact = 1;
    for (int i = 2; i <= order; ++i) fact *= i;
    double gpow = 1;
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < alpha[j]; ++c) gpow *= decay.gamma[1 + j];
    chk.rhs = fact * bc.k_tensor * std::pow(bc.c_tensor, order) * gpow;
    chk.pass = chk.lhs <= chk.rhs * slack;
    checks.push_back(chk);
  }
  return checks;
}

inline unsigned long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  unsigned long long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

/// For every alpha in three variables with |alpha| <= n_max and every j:
/// sum over beta <= alpha with |beta| = j of prod binomial(alpha_i, beta_i)
/// equals binomial(|alpha|, j), by direct enumeration.
inline bool binomial_slice_identity(int n_max) {
  for (int a0 = 0; a0 <= n_max; ++a0)
    for (int a1 = 0; a0 + a1 <= n_max; ++a1)
      for (int a2 = 0; a0 + a1 + a2 <= n_max; ++a2) {
        const int total = a0 + a1 + a2;
        for (int j = 0; j <= total; ++j) {
          unsigned long long sum = 0;
          for (int b0 = 0; b0 <= a0; ++b0)
            for (int b1 = 0; b1 <= a1; ++b1)
              for (int b2 = 0; b2 <= a2; ++b2)
                if (b0 + b1 + b2 == j)
                  sum += binomial(a0, b0) * binomial(a1, b1) * binomial(a2, b2);
          if (sum != binomial(total, j)) return false;
        }
      }
  return true;
}

/// Number of ordered set partitions of {1..n}, by brute-force enumeration of
/// all block assignments whose image is an initial segment. n <= 8.
inline unsigned long long ordered_bell_brute(int n) {
  if (n < 0 || n > 8) throw std::invalid_argument("ordered_bell_brute: n out of range");
  if (n == 0) return 1;
  unsigned long long count = 0;
  std::vector<int> f(n, 0);
  while (true) {
    int mx = 0;
    for (int v : f) mx = std::max(mx, v);
    bool initial = true;
    for (int target = 0; target <= mx && initial; ++target) {
      bool found = false;
      for (int v : f)
        if (v == target) { found = true; break; }
      initial = found;
    }
    if (initial) ++count;
    int i = 0;
    for (; i < n; ++i) {
      if (++f[i] < n) break;
      f[i] = 0;
    }
    if (i == n) break;
  }
  return count;
}

/// Stirling numbers of the second kind by brute-force surjection counting.
inline unsigned long long stirling2_brute(int n, int r) {
  if (n < 0 || n > 8 || r < 0) throw std::invalid_argument("stirling2_brute: out of range");
  if (r == 0) return n == 0 ? 1 : 0;
  if (r > n) return 0;
  unsigned long long surjections = 0;
  std::vector<int> f(n, 0);
  while (true) {
    bool onto = true;
    for (int target = 0; target < r && onto; ++target) {
      bool found = false;
      for (int v : f)
        if (v == target) { found = true; break; }
      onto = found;
    }
    if (onto) ++surjections;
    int i = 0;
    for (; i < n; ++i) {
      if (++f[i] < r) break;
      f[i] = 0;
    }
    if (i == n) break;
  }
  unsigned long long rfact = 1;
  for (int i = 2; i <= r; ++i) rfact *= i;
  return surjections / rfact;
}

struct CombinatoricsReport {
  int n_max = 0;
  bool slice_ok = false;
  bool bell_matches_stirling = false;
  bool factorial_bound_ok = false;
  std::vector<unsigned long long> ordered_bell;
};

inline CombinatoricsReport combinatorial_checks(int n_max) {
  if (n_max < 0 || n_max > 8) throw std::invalid_argument("combinatorial_checks: n_max out of range");
  CombinatoricsReport rep;
  rep.n_max = n_max;
  rep.slice_ok = binomial_slice_identity(n_max);
  rep.bell_matches_stirling = true;
  rep.factorial_bound_ok = true;
  const double ln2 = std::log(2.0);
  for (int n = 0; n <= n_max; ++n) {
    const unsigned long long bell = ordered_bell_brute(n);
    rep.ordered_bell.push_back(bell);
    unsigned long long via_stirling = 0;
    unsigned long long rfact = 1;
    for (int r = 0; r <= n; ++r) {
      if (r >= 2) rfact *= r;
      via_stirling += rfact * stirling2_brute(n, r);
    }
    if (via_stirling != bell) rep.bell_matches_stirling = false;
    double nfact = 1;
    for (int i = 2; i <= n; ++i) nfact *= i;
    if (static_cast<double>(bell) > nfact / std::pow(ln2, n)) rep.factorial_bound_ok = false;
  }
  return rep;
}

/// Text table for the CLI: constants in both conventions, one row per checked
/// multi-index, then the combinatorial summary.
inline std::string regularity_report(const BoundConstants& proof, const BoundConstants& statement,
                                     std::span<const DerivativeCheck> checks,
                                     const CombinatoricsReport& comb) {
  std::string out;
  char buf[256];
  auto line = [&](const BoundConstants& b, const char* name) {
    std::snprintf(buf, sizeof buf,
                  "%s: k_outer=%.6g k_gram=%.6g k_gram_inv=%.6g k_len=%.6g k_proj=%.6g "
                  "k_scaled_proj=%.6g k_tensor=%.6g c_tensor=%.6g\n",
                  name, b.k_outer, b.k_gram, b.k_gram_inv, b.k_len, b.k_proj, b.k_scaled_proj,
                  b.k_tensor, b.c_tensor);
    out += buf;
  };
  line(proof, "proof convention    ");
  line(statement, "statement convention");
  out += "alpha      lhs            rhs            margin      status\n";
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "(%d,%d,%d)    %-14.6g %-14.6g %-11.4g %s\n", c.alpha[0],
                  c.alpha[1], c.alpha[2], c.lhs, c.rhs, c.lhs > 0 ? c.rhs / c.lhs : 0.0,
                  c.pass ? "ok" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "combinatorics n<=%d: slice identity %s, ordered Bell vs Stirling %s, "
                "factorial bound %s\n",
                comb.n_max, comb.slice_ok ? "ok" : "FAIL",
                comb.bell_matches_stirling ? "ok" : "FAIL",
                comb.factorial_bound_ok ? "ok" : "FAIL");
  out += buf;
  return out;
}

}  // namespace anisoqmc
