#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "linalg.hpp"

namespace anisoqmc {

/// Second-order model of the random direction field: a mean plus a
/// componentwise (matrix-diagonal) covariance kernel on the unit cube.
/// Two built-in cases are exposed through the CLI as examples 1 and 2:
///   1: constant axis-aligned mean (1,0,0); component 1 is statistically
///      homogeneous, components 2 and 3 are damped toward the boundary.
///   2: unit mean rotating with x3 in the x1-x2 plane; all three components
///      carry the boundary-damped kernel.
struct CovarianceModel {
  int example = 1;

  Vec3 mean(const Vec3& x) const {
    if (example == 1) return {1.0, 0.0, 0.0};
    const double t = (x.z - 0.5) * std::numbers::pi / 3.0;
    return {std::cos(t), std::sin(t), 0.0};
  }

  /// Kernel for one component (0-based). Both kernels share the smooth
  /// squared-exponential factor exp(-|x-x'|^2 / 50).
  double kernel(int component, const Vec3& x, const Vec3& xp) const {
    if (component < 0 || component > 2) throw std::invalid_argument("kernel: bad component");
    const double g = std::exp(-norm_sq(x - xp) / 50.0);
    auto damp = [](double c) { return 4.0 * c * (1.0 - c); };  // vanishes on the faces
    if (example == 1) {
      if (component == 0) return 0.01 * g;
      const double s = component == 1 ? damp(x.y) * damp(xp.y) : damp(x.z) * damp(xp.z);
      return 0.09 * s * g;
    }
    const double s = damp(x[component]) * damp(xp[component]);
    return 0.09 * s * g;
  }
};

inline CovarianceModel covariance_model(int example) {
  if (example != 1 && example != 2) throw std::invalid_argument("covariance_model: unknown example");
  return CovarianceModel{example};
}

inline double eval_kernel(const CovarianceModel& m, int component, const Vec3& x, const Vec3& xp) {
  return m.kernel(component, x, xp);
}

}  // namespace anisoqmc
