#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace anisoqmc {

inline constexpr int kMaxHaltonDim = 200;

/// Reverses the base-b digits of i behind the radix point: i = (d_m ... d_1 d_0)_b
/// maps to 0.d_0 d_1 ... d_m. Index 0 maps to 0.
inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double r = 0.0;
  double scale = 1.0 / static_cast<double>(base);
  while (i > 0) {
    r += scale * static_cast<double>(i % base);
    scale /= static_cast<double>(base);
    i /= base;
  }
  return r;
}

/// First kMaxHaltonDim primes, in natural order.
inline const std::vector<std::uint64_t>& prime_bases() {
  static const std::vector<std::uint64_t> primes = [] {
    std::vector<std::uint64_t> p;
    for (std::uint64_t c = 2; p.size() < kMaxHaltonDim; ++c) {
      bool prime = true;
      for (std::uint64_t d = 2; d * d <= c; ++d)
        if (c % d == 0) { prime = false; break; }
      if (prime) p.push_back(c);
    }
    return p;
  }();
  return primes;
}

/// i-th Halton point in [0,1)^dim; coordinate j uses the j-th prime as base.
inline std::vector<double> halton_point(std::uint64_t i, int dim) {
  if (dim < 1 || dim > kMaxHaltonDim) throw std::invalid_argument("halton_point: dim out of range");
  std::vector<double> p(dim);
  const auto& bases = prime_bases();
  for (int j = 0; j < dim; ++j) p[j] = radical_inverse(i, bases[j]);
  return p;
}

enum class SampleSchedule { plain, log_boosted };

/// Per-level sample count: ceil(2^(level/(1-delta)) * base).  The log_boosted
/// variant multiplies by max(level,1)^((1+eps)/(1-delta)) with eps fixed at 0.5.
/// Values landing on an integer up to rounding noise are snapped before ceil.
inline long sample_count(int level, double delta, double base = 10.0,
                         SampleSchedule schedule = SampleSchedule::plain) {
  if (level < 0) throw std::invalid_argument("sample_count: negative level");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("sample_count: delta not in (0,1)");
  if (!(base > 0.0)) throw std::invalid_argument("sample_count: nonpositive base");
  const double r = 1.0 - delta;
  double v = std::exp2(static_cast<double>(level) / r) * base;
  if (schedule == SampleSchedule::log_boosted) {
    const double eps = 0.5;
    v *= std::pow(static_cast<double>(std::max(level, 1)), (1.0 + eps) / r);
  }
  const double snapped = std::nearbyint(v);
  if (std::abs(v - snapped) <= 1e-9 * std::max(1.0, std::abs(snapped)))
    return static_cast<long>(snapped);
  return static_cast<long>(std::ceil(v));
}

/// QMC rule on (-1,1)^dim: Halton points starting at index 1 (the all-zero
/// point is skipped), mapped by xi = 2*chi - 1, all weights 1/size.
/// Prefixes of a rule are themselves the smaller rules (nested).
struct QuadratureRule {
  int dim = 0;
  long size = 0;
  std::vector<double> points;  // row-major, size x dim

  std::span<const double> point(long i) const {
    return {points.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  double weight() const { return 1.0 / static_cast<double>(size); }
};

inline QuadratureRule build_rule(long n, int dim) {
  if (n < 1) throw std::invalid_argument("build_rule: need at least one point");
  if (dim < 1 || dim > kMaxHaltonDim) throw std::invalid_argument("build_rule: dim out of range");
  QuadratureRule rule;
  rule.dim = dim;
  rule.size = n;
  rule.points.resize(static_cast<std::size_t>(n) * dim);
  const auto& bases = prime_bases();
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j)
      rule.points[static_cast<std::size_t>(i) * dim + j] =
          2.0 * radical_inverse(static_cast<std::uint64_t>(i + 1), bases[j]) - 1.0;
  return rule;
}

}  // namespace anisoqmc
