#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "anisoqmc/regularity.hpp"

using namespace anisoqmc;

namespace {

// hand-built expansion: mean (1, 0.3*x2-ish ... ) kept simple below
KLExpansion constant_mode_expansion(const TetMesh& mesh, const Vec3& mean, const Vec3& mode) {
  KLExpansion kl;
  kl.level = mesh.level;
  kl.modes = 1;
  kl.trace_tol = 0;
  const std::size_t n = mesh.n_vertices();
  kl.mean = NodalField(mesh.level, 3, n);
  kl.mode_matrix.assign(3 * n, 0.0);
  kl.mode_component = {0};
  kl.mode_removed_trace = {1.0};
  for (std::size_t v = 0; v < n; ++v) {
    for (int c = 0; c < 3; ++c) {
      kl.mean.at(v, c) = mean[c];
      kl.mode_matrix[3 * v + c] = mode[c];
    }
  }
  return kl;
}

// closed-form parameter derivatives of the tensor for V(y) = V0 + y*m:
// with C = V'V, E = sqrt(C), B = VV', F = B/C and A = a*I + (E - a) F,
// A'  = E'F + (E-a)F'
// A'' = E''F + 2E'F' + (E-a)F''
struct TensorDerivatives {
  Mat3 first, second;
};

TensorDerivatives analytic_derivatives(const Vec3& v0, const Vec3& m, double y, double a) {
  const Vec3 v = v0 + m * y;
  const double c = norm_sq(v);
  const double cp = 2.0 * dot(v, m);
  const double cpp = 2.0 * norm_sq(m);
  const double e = std::sqrt(c);
  const double ep = cp / (2.0 * e);
  const double epp = (2.0 * c * cpp - cp * cp) / (4.0 * c * e);
  const Mat3 b = outer(v, v);
  const Mat3 bp = outer(v, m) + outer(m, v);
  const Mat3 bpp = outer(m, m) * 2.0;
  const Mat3 f = b * (1.0 / c);
  const Mat3 fp = bp * (1.0 / c) - b * (cp / (c * c));
  const Mat3 fpp = bpp * (1.0 / c) - bp * (2.0 * cp / (c * c)) -
                   b * (cpp / (c * c)) + b * (2.0 * cp * cp / (c * c * c));
  TensorDerivatives d;
  d.first = f * ep + fp * (e - a);
  d.second = f * epp + fp * (2.0 * ep) + fpp * (e - a);
  return d;
}

}  // namespace

TEST_CASE("decay of a manufactured expansion") {
  const TetMesh mesh = build_base_mesh();
  KLExpansion kl = constant_mode_expansion(mesh, {1.0, 0.0, 0.0}, {0.5, 0.0, 0.0});
  // mean field (x1, 0, 0): sup norm 1, one unit derivative column
  for (std::size_t v = 0; v < mesh.n_vertices(); ++v) kl.mean.at(v, 0) = mesh.vertices[v].x;

  const ModeDecay d1 = mode_decay(kl, mesh, 1);
  REQUIRE(d1.gamma.size() == 2);
  CHECK(d1.gamma[0] == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(d1.gamma[1] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(d1.c_gamma == Catch::Approx(2.5).epsilon(1e-12));

  const ModeDecay d0 = mode_decay(kl, mesh, 0);
  CHECK(d0.gamma[0] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(d0.c_gamma == 2.0);  // floor at 2

  CHECK_THROWS(mode_decay(kl, mesh, 2));
}

TEST_CASE("bound constants for the hand-checked configuration") {
  ModeDecay decay;
  decay.smoothness = 1;
  decay.gamma = {1.0, 0.5, 0.25};
  decay.c_gamma = 2.0;

  const BoundConstants proof = bound_constants(decay, 1.0, 2.0, BoundConvention::proof);
  CHECK(proof.k_outer == 4.0);
  CHECK(proof.k_gram == 4.0);
  CHECK(proof.k_gram_inv == 16.0);
  CHECK(proof.k_len == 32.0);
  CHECK(proof.k_proj == 192.0);
  CHECK(proof.k_scaled_proj == 6144.0);
  CHECK(proof.k_tensor == 6530.0);  // exact in double arithmetic

  const BoundConstants stmt = bound_constants(decay, 1.0, 2.0, BoundConvention::statement);
  CHECK(stmt.k_gram_inv == 32.0);
  CHECK(stmt.k_len == 16.0);
  CHECK(stmt.k_scaled_proj == 6144.0);
  CHECK(stmt.k_tensor == 6914.0);

  // the growth constant is convention-independent: 4 c_gamma^2 / (lo^2 ln 2)
  const double expected_c = 4.0 * 4.0 / std::log(2.0);
  CHECK(proof.c_tensor == Catch::Approx(expected_c).epsilon(1e-15));
  CHECK(stmt.c_tensor == Catch::Approx(expected_c).epsilon(1e-15));

  REQUIRE(proof.mu.size() == 3);
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(proof.mu[k] == Catch::Approx(proof.c_tensor * decay.gamma[k]).epsilon(1e-15));

  CHECK_THROWS(bound_constants(decay, 1.5, 2.0));
  CHECK_THROWS(bound_constants(decay, 0.5, 0.9));
}

TEST_CASE("order-zero smoothness drops the growth factor") {
  ModeDecay decay;
  decay.smoothness = 0;
  decay.gamma = {1.0};
  decay.c_gamma = 2.0;
  const BoundConstants b = bound_constants(decay, 0.5, 2.0);
  // kappa = 0: power factor is 1, prefactor kappa+1 = 1
  CHECK(b.k_gram_inv == Catch::Approx(1.0 / 0.25).epsilon(1e-15));
  CHECK(b.k_len == 2.0);
  CHECK(b.c_gram_inv == Catch::Approx(2.0 * 4.0 / 0.25 / std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("finite differences match the closed-form tensor derivatives") {
  const TetMesh mesh = build_base_mesh();
  const Vec3 mean{1.0, 0.0, 0.0};
  const Vec3 mode{0.0, 0.3, 0.0};
  const KLExpansion kl = constant_mode_expansion(mesh, mean, mode);
  const CoefficientParams params{0.12, 0.12, 2.0};

  const auto checks = derivative_bound_checks(kl, params, mesh, 2, 1);
  // alphas: (0,0,0), (1,0,0), (2,0,0) over the single mode
  REQUIRE(checks.size() == 3);

  // replicate the evaluation points: y = 0 plus four seeded uniform draws
  std::vector<double> ys = {0.0};
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (int s = 0; s < 4; ++s) ys.push_back(uni(rng));

  double lhs1 = 0, lhs2 = 0;
  for (double y : ys) {
    const TensorDerivatives d = analytic_derivatives(mean, mode, y, params.a);
    lhs1 = std::max(lhs1, sym3_spectral_norm(d.first));
    lhs2 = std::max(lhs2, sym3_spectral_norm(d.second));
  }

  CHECK(checks[1].order == 1);
  CHECK(checks[1].lhs == Catch::Approx(lhs1).margin(1e-6));
  CHECK(checks[2].order == 2);
  CHECK(checks[2].lhs == Catch::Approx(lhs2).margin(1e-4));
  for (const auto& c : checks) CHECK(c.pass);
}

TEST_CASE("third parameter derivative of the outer term vanishes") {
  // V(y) = V0 + y*m is affine, so VV' is quadratic in y; a wide-step third
  // difference sees only roundoff
  const Vec3 v0{1.0, 0.2, -0.1};
  const Vec3 m{0.05, 0.4, 0.35};
  const double h = 0.05;
  auto outer_at = [&](double y) { return direction_terms(v0 + m * y).outer; };
  const Mat3 third = (outer_at(2 * h) - outer_at(h) * 2.0 + outer_at(-h) * 2.0 -
                      outer_at(-2 * h)) * (1.0 / (2.0 * h * h * h));
  CHECK(max_abs_entry(third) < 1e-6);
}

TEST_CASE("derivative checks pass on the built-in models") {
  const TetMesh mesh = build_base_mesh();
  const CoefficientParams params{0.12, 0.12, 2.0};
  for (int example : {1, 2}) {
    const KLExpansion kl = build_expansion(covariance_model(example), mesh);
    const auto checks = derivative_bound_checks(kl, params, mesh);
    REQUIRE(!checks.empty());
    for (const auto& c : checks) {
      INFO("example " << example << " alpha (" << c.alpha[0] << "," << c.alpha[1] << ","
                      << c.alpha[2] << ") lhs " << c.lhs << " rhs " << c.rhs);
      CHECK(c.pass);
    }
  }
}

TEST_CASE("binomial slice identity and frozen combinatorial tables") {
  CHECK(binomial(6, 2) == 15);
  CHECK(binomial(5, 0) == 1);
  CHECK(binomial(4, 5) == 0);
  CHECK(binomial_slice_identity(5));

  const unsigned long long bell[] = {1, 1, 3, 13, 75, 541, 4683};
  for (int n = 0; n <= 6; ++n) CHECK(ordered_bell_brute(n) == bell[n]);
  CHECK_THROWS(ordered_bell_brute(9));

  CHECK(stirling2_brute(4, 2) == 7);
  CHECK(stirling2_brute(5, 3) == 25);
  CHECK(stirling2_brute(3, 3) == 1);
  CHECK(stirling2_brute(3, 0) == 0);

  const CombinatoricsReport rep = combinatorial_checks(6);
  CHECK(rep.slice_ok);
  CHECK(rep.bell_matches_stirling);
  CHECK(rep.factorial_bound_ok);
  REQUIRE(rep.ordered_bell.size() == 7);
  for (int n = 0; n <= 6; ++n) CHECK(rep.ordered_bell[n] == bell[n]);
}

TEST_CASE("report renders both conventions") {
  ModeDecay decay;
  decay.smoothness = 1;
  decay.gamma = {1.0, 0.5};
  decay.c_gamma = 2.0;
  const BoundConstants proof = bound_constants(decay, 1.0, 2.0, BoundConvention::proof);
  const BoundConstants stmt = bound_constants(decay, 1.0, 2.0, BoundConvention::statement);
  const CombinatoricsReport comb = combinatorial_checks(3);
  const std::string text = regularity_report(proof, stmt, {}, comb);
  CHECK(text.find("6530") != std::string::npos);
  CHECK(text.find("6914") != std::string::npos);
  CHECK(text.find("combinatorics") != std::string::npos);
}
