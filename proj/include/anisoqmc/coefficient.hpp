#pragma once

#include <cmath>
#include <stdexcept>

#include "linalg.hpp"

namespace anisoqmc {

/// Fixed data of the diffusion tensor: the transverse conductivity a and the
/// admissible band [band_lo, band_hi] for the direction-field magnitude.
struct CoefficientParams {
  double a = 0.12;
  double band_lo = 0.12;
  double band_hi = 2.0;

  void validate() const {
    if (!(0.0 < band_lo && band_lo <= a && a <= band_hi))
      throw std::invalid_argument("CoefficientParams: need 0 < band_lo <= a <= band_hi");
    if (!(band_lo <= 1.0 && 1.0 <= band_hi))
      throw std::invalid_argument("CoefficientParams: band must contain 1");
  }
};

/// Counts direction samples whose magnitude leaves the admissible band.
/// Evaluation still proceeds; the study reports the count.
struct EllipticityCounter {
  long violations = 0;
};

/// Algebraic pieces built from a direction vector v:
///   outer = v v', gram = v'v, gram_inv = 1/gram, len = sqrt(gram),
///   projector = outer / gram (rank-one projector onto span v),
///   scaled_projector = len * projector.
struct DirectionTerms {
  Mat3 outer;
  double gram = 0;
  double gram_inv = 0;
  double len = 0;
  Mat3 projector;
  Mat3 scaled_projector;
};

inline DirectionTerms direction_terms(const Vec3& v) {
  const double gram = norm_sq(v);
  if (gram == 0.0) throw std::invalid_argument("direction_terms: zero vector has no direction");
  DirectionTerms t;
  t.outer = outer(v, v);
  t.gram = gram;
  t.gram_inv = 1.0 / gram;
  t.len = std::sqrt(gram);
  t.projector = t.outer * t.gram_inv;
  t.scaled_projector = t.projector * t.len;
  return t;
}

/// Diffusion tensor a*I + (|v| - a) * v v' / v'v. Its spectrum is {|v|, a, a}:
/// conductivity |v| along v, a across. Equivalently a*I + scaled_projector
/// - a*projector.
inline Mat3 diffusion_tensor(const Vec3& v, const CoefficientParams& p,
                             EllipticityCounter* counter = nullptr) {
  const DirectionTerms t = direction_terms(v);
  if (counter && (t.len < p.band_lo || t.len > p.band_hi)) ++counter->violations;
  return Mat3::identity() * p.a + t.projector * (t.len - p.a);
}

}  // namespace anisoqmc
