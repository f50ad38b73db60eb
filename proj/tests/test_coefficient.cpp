#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "anisoqmc/coefficient.hpp"
#include "anisoqmc/linalg.hpp"

using namespace anisoqmc;

namespace {

Mat3 random_rotation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  // Gram-Schmidt on a random frame
  Vec3 u{un(rng), un(rng), un(rng)};
  u = u * (1.0 / norm(u));
  Vec3 w{un(rng), un(rng), un(rng)};
  Vec3 v = w - u * dot(u, w);
  v = v * (1.0 / norm(v));
  Vec3 t = cross(u, v);
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    r(i, 0) = u[i];
    r(i, 1) = v[i];
    r(i, 2) = t[i];
  }
  return r;
}

}  // namespace

TEST_CASE("parameter validation") {
  CoefficientParams ok{0.12, 0.12, 2.0};
  CHECK_NOTHROW(ok.validate());
  CHECK_THROWS(CoefficientParams{0.0, 0.0, 2.0}.validate());
  CHECK_THROWS(CoefficientParams{0.12, 0.2, 2.0}.validate());   // lo > a
  CHECK_THROWS(CoefficientParams{1.5, 1.2, 2.0}.validate());    // band misses 1
  CHECK_THROWS(CoefficientParams{0.5, 0.12, 0.9}.validate());   // band misses 1
}

TEST_CASE("direction terms") {
  const Vec3 v{0.6, 0.8, 0.0};
  const DirectionTerms t = direction_terms(v);
  CHECK(t.gram == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(t.len == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(t.gram_inv == Catch::Approx(1.0).epsilon(1e-15));
  // projector is idempotent and fixes v
  const Mat3 p2 = matmul(t.projector, t.projector);
  CHECK(max_abs_entry(p2 - t.projector) < 1e-15);
  const Vec3 pv = t.projector * v;
  CHECK(norm(pv - v) < 1e-15);

  CHECK_THROWS(direction_terms(Vec3{0.0, 0.0, 0.0}));
}

TEST_CASE("tensor entries for a pinned direction") {
  const CoefficientParams p{0.12, 0.12, 2.0};
  const Vec3 v{0.6, 0.8, 0.0};  // unit length
  const Mat3 A = diffusion_tensor(v, p);
  // a*I + (1 - a) vv^T with a = 0.12
  CHECK(A(0, 0) == Catch::Approx(0.12 + 0.88 * 0.36).epsilon(1e-14));
  CHECK(A(0, 1) == Catch::Approx(0.88 * 0.48).epsilon(1e-14));
  CHECK(A(1, 1) == Catch::Approx(0.12 + 0.88 * 0.64).epsilon(1e-14));
  CHECK(A(2, 2) == Catch::Approx(0.12).epsilon(1e-14));
  CHECK(A(0, 2) == 0.0);
  CHECK(A(1, 2) == 0.0);
  CHECK(A(1, 0) == A(0, 1));
}

TEST_CASE("spectrum is the direction magnitude and two transverse values") {
  const CoefficientParams p{0.12, 0.12, 2.0};
  std::mt19937_64 rng(21u);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vec3 v{un(rng), un(rng), un(rng)};
    const double len = norm(v);
    if (len < p.band_lo || len > p.band_hi) continue;
    const Mat3 A = diffusion_tensor(v, p);

    std::array<double, 3> expected = {p.a, p.a, len};
    std::sort(expected.begin(), expected.end());
    const auto ev = sym3_eigenvalues(A);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(ev[i] - expected[i]) < 1e-12);

    // v is an eigenvector with eigenvalue |v|
    const Vec3 Av = A * v;
    CHECK(norm(Av - v * len) < 1e-12);
  }
}

TEST_CASE("conjugation by rotations") {
  const CoefficientParams p{0.12, 0.12, 2.0};
  std::mt19937_64 rng(22u);
  std::uniform_real_distribution<double> un(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 v{un(rng), un(rng), un(rng)};
    if (norm(v) < 0.2) continue;
    const Mat3 r = random_rotation(rng);
    const Mat3 lhs = diffusion_tensor(r * v, p);
    const Mat3 rhs = matmul(matmul(r, diffusion_tensor(v, p)), transpose(r));
    CHECK(max_abs_entry(lhs - rhs) < 1e-13);
  }
}

TEST_CASE("tensor decomposes through the direction terms") {
  const CoefficientParams p{0.12, 0.12, 2.0};
  const Vec3 v{0.3, -0.5, 0.7};
  const DirectionTerms t = direction_terms(v);
  const Mat3 direct = diffusion_tensor(v, p);
  const Mat3 composed =
      Mat3::identity() * p.a + t.scaled_projector - t.projector * p.a;
  CHECK(max_abs_entry(direct - composed) < 1e-15);
}

TEST_CASE("band violations are counted, not rejected") {
  const CoefficientParams p{0.12, 0.12, 2.0};
  EllipticityCounter counter;
  diffusion_tensor(Vec3{0.05, 0.0, 0.0}, p, &counter);  // below band_lo
  CHECK(counter.violations == 1);
  diffusion_tensor(Vec3{1.0, 0.0, 0.0}, p, &counter);  // inside
  CHECK(counter.violations == 1);
  diffusion_tensor(Vec3{2.5, 0.0, 0.0}, p, &counter);  // above band_hi
  CHECK(counter.violations == 2);
}
