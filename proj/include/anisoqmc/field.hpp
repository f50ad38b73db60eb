#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace anisoqmc {

/// Vertex-based coefficients of a continuous piecewise-linear function on the
/// mesh of the stored level. components is 1 (scalars) or 3 (direction fields);
/// 3-component values are interleaved per vertex.
struct NodalField {
  int level = 0;
  int components = 1;
  std::vector<double> values;

  NodalField() = default;
  NodalField(int level_, int components_, std::size_t n_vertices)
      : level(level_), components(components_), values(n_vertices * components_, 0.0) {}

  std::size_t n_vertices() const { return values.size() / components; }

  double& at(std::size_t vertex, int comp = 0) { return values[vertex * components + comp]; }
  double at(std::size_t vertex, int comp = 0) const { return values[vertex * components + comp]; }

  NodalField& operator+=(const NodalField& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }
  NodalField& operator-=(const NodalField& o) {
    check_same_shape(o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
  NodalField& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }

  void check_same_shape(const NodalField& o) const {
    if (level != o.level || components != o.components || values.size() != o.values.size())
      throw std::invalid_argument("NodalField: shape mismatch");
  }
};

}  // namespace anisoqmc
