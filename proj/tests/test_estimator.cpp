#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "anisoqmc/estimator.hpp"
#include "anisoqmc/study.hpp"

using namespace anisoqmc;

namespace {

// level-independent synthetic solver; prolongation only restamps the level
struct FlatSolver {
  int dim = 3;
  int size = 5;
  double shift = 0.0;

  NodalField solve_sample(int level, std::span<const double> y) const {
    NodalField f(level, 1, size);
    double s = shift;
    for (std::size_t k = 0; k < y.size(); ++k) s += static_cast<double>(k + 1) * y[k];
    for (int i = 0; i < size; ++i) f.at(i) = std::sin(0.7 * i + s) + 0.1 * i;
    return f;
  }
  NodalField prolong(const NodalField& u, int, int to) const {
    NodalField out = u;
    out.level = to;
    return out;
  }
  int param_dim(int) const { return dim; }
  int threads() const { return 1; }
};

double nodal_max_diff(const NodalField& a, const NodalField& b) {
  REQUIRE(a.values.size() == b.values.size());
  double m = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("multilevel weights telescope to the single-level estimate") {
  FlatSolver solver;
  const std::vector<long> counts = {10, 24, 57, 135};
  const QuadratureRule rule = build_rule(135, solver.dim);
  const std::vector<int> orders = {1, 2};

  const auto ml = ml_estimate(solver, 3, std::span<const long>(counts), rule,
                              std::span<const int>(orders));
  const auto qmc = qmc_estimate(solver, 3, rule, 135, std::span<const int>(orders));
  REQUIRE(ml.size() == 2);
  for (int q = 0; q < 2; ++q) {
    CHECK(ml[q].order == orders[q]);
    CHECK(ml[q].level == 3);
    CHECK(nodal_max_diff(ml[q].field, qmc[q].field) < 1e-12);
  }
}

TEST_CASE("two-level combination matches the written-out telescope") {
  StudyConfig cfg;
  cfg.max_level = 1;
  cfg.ref_level = 2;
  cfg.ref_samples = 1;
  const StudySolver solver(cfg);

  const std::vector<long> counts = {4, 9};
  const int dim = std::max(solver.param_dim(0), solver.param_dim(1));
  const QuadratureRule rule = build_rule(9, dim);

  const auto ml = ml_estimate(solver, 1, std::span<const long>(counts), rule, 1);

  const auto fine_coarse_rule = qmc_estimate(solver, 1, rule, 4, 1);   // Q_4[u_1]
  const auto coarse_fine_rule = qmc_estimate(solver, 0, rule, 9, 1);   // Q_9[u_0]
  const auto coarse_coarse_rule = qmc_estimate(solver, 0, rule, 4, 1); // Q_4[u_0]

  NodalField oracle = fine_coarse_rule[0].field;
  oracle += solver.prolong(coarse_fine_rule[0].field, 0, 1);
  oracle -= solver.prolong(coarse_coarse_rule[0].field, 0, 1);

  CHECK(nodal_max_diff(ml[0].field, oracle) < 1e-12);
}

TEST_CASE("estimates are linear in the solved fields") {
  FlatSolver s1{3, 5, 0.0};
  FlatSolver s2{3, 5, 1.3};
  struct SumSolver {
    const FlatSolver *a, *b;
    NodalField solve_sample(int level, std::span<const double> y) const {
      NodalField f = a->solve_sample(level, y);
      f += b->solve_sample(level, y);
      return f;
    }
    NodalField prolong(const NodalField& u, int, int to) const {
      NodalField out = u;
      out.level = to;
      return out;
    }
    int param_dim(int l) const { return a->param_dim(l); }
    int threads() const { return 1; }
  } sum{&s1, &s2};

  const std::vector<long> counts = {5, 12};
  const QuadratureRule rule = build_rule(12, 3);
  const auto m1 = ml_estimate(s1, 1, std::span<const long>(counts), rule, 1);
  const auto m2 = ml_estimate(s2, 1, std::span<const long>(counts), rule, 1);
  const auto msum = ml_estimate(sum, 1, std::span<const long>(counts), rule, 1);
  NodalField combined = m1[0].field;
  combined += m2[0].field;
  CHECK(nodal_max_diff(msum[0].field, combined) < 1e-13);
}

TEST_CASE("second moment dominates the squared mean") {
  StudyConfig cfg;
  cfg.max_level = 0;
  cfg.ref_level = 1;
  cfg.ref_samples = 1;
  const StudySolver solver(cfg);
  const QuadratureRule rule = build_rule(16, solver.param_dim(0));
  const std::vector<int> orders = {1, 2};
  const auto est = qmc_estimate(solver, 0, rule, 16, std::span<const int>(orders));
  REQUIRE(est.size() == 2);
  for (std::size_t v = 0; v < est[0].field.n_vertices(); ++v) {
    const double mean = est[0].field.at(v);
    const double m2 = est[1].field.at(v);
    CHECK(m2 - mean * mean >= -1e-12);
  }
}

TEST_CASE("error against a perturbed reference") {
  StudyConfig cfg;
  cfg.max_level = 0;
  cfg.ref_level = 1;
  cfg.ref_samples = 1;
  const StudySolver solver(cfg);
  const auto& meshes = solver.meshes();

  std::vector<double> y(solver.param_dim(0), 0.25);
  const NodalField u0 = solver.solve_sample(0, y);
  const NodalField lifted = solver.prolong(u0, 0, 1);

  NodalField perturbed = lifted;
  const double c = 1e-3;
  for (std::size_t v = 0; v < meshes[1].n_vertices(); ++v)
    if (!meshes[1].on_boundary[v]) perturbed.at(v) += c;

  const MomentEstimate est{1, 0, u0};
  const MomentEstimate ref{1, 1, perturbed};
  const double err =
      error_vs_reference(est, ref, std::span<const TetMesh>(meshes), NormKind::h1);

  NodalField bump(1, 1, meshes[1].n_vertices());
  for (std::size_t v = 0; v < meshes[1].n_vertices(); ++v)
    if (!meshes[1].on_boundary[v]) bump.at(v) = c;
  CHECK(err == Catch::Approx(h1_norm(bump, meshes[1])).epsilon(1e-12));

  const MomentEstimate wrong_order{2, 0, u0};
  CHECK_THROWS(error_vs_reference(wrong_order, ref, std::span<const TetMesh>(meshes),
                                  NormKind::h1));
}

TEST_CASE("input validation") {
  FlatSolver solver;
  const QuadratureRule rule = build_rule(20, 3);

  const std::vector<int> no_orders;
  CHECK_THROWS(qmc_estimate(solver, 0, rule, 5, std::span<const int>(no_orders)));
  CHECK_THROWS(qmc_estimate(solver, 0, rule, 5, 3));
  CHECK_THROWS(qmc_estimate(solver, 0, rule, 21, 1));
  CHECK_THROWS(qmc_estimate(solver, 0, rule, 0, 1));

  const std::vector<long> decreasing = {10, 5};
  CHECK_THROWS(ml_estimate(solver, 1, std::span<const long>(decreasing), rule, 1));
  const std::vector<long> wrong_len = {10};
  CHECK_THROWS(ml_estimate(solver, 1, std::span<const long>(wrong_len), rule, 1));
  const std::vector<long> too_big = {10, 25};
  CHECK_THROWS(ml_estimate(solver, 1, std::span<const long>(too_big), rule, 1));
  const std::vector<long> nonpos = {0, 5};
  CHECK_THROWS(ml_estimate(solver, 1, std::span<const long>(nonpos), rule, 1));
}

TEST_CASE("threaded reduction matches the serial one") {
  StudyConfig cfg;
  cfg.max_level = 0;
  cfg.ref_level = 1;
  cfg.ref_samples = 1;
  StudySolver serial(cfg);
  StudySolver threaded(cfg);
  threaded.set_threads(3);

  const QuadratureRule rule = build_rule(11, serial.param_dim(0));
  const auto a = qmc_estimate(serial, 0, rule, 11, 2);
  const auto b = qmc_estimate(threaded, 0, rule, 11, 2);
  // fixed consume order makes the reduction bitwise thread-independent
  for (std::size_t i = 0; i < a[0].field.values.size(); ++i)
    CHECK(a[0].field.values[i] == b[0].field.values[i]);
}
