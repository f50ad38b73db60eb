#pragma once

#include <exception>
#include <span>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "fem.hpp"
#include "field.hpp"
#include "halton.hpp"
#include "mesh.hpp"

namespace anisoqmc {

/// Nodal estimate of E[u] (order 1) or E[u^2] (order 2, squared nodally so the
/// estimate stays in the P1 space of its level).
struct MomentEstimate {
  int order = 1;
  int level = 0;
  NodalField field;
};

namespace detail {

/// Runs make(i) for i in [0,n), possibly on `threads` workers, and feeds the
/// results to consume in ascending i order. The reduction order is fixed, so
/// results are bitwise independent of the thread count.
template <class Make, class Consume>
void blocked_map_consume(long n, int threads, Make&& make, Consume&& consume) {
  if (threads <= 1) {
    for (long i = 0; i < n; ++i) consume(i, make(i));
    return;
  }
  const long block = threads;
  std::vector<NodalField> slots(block);
  std::vector<std::exception_ptr> errors(block);
  for (long start = 0; start < n; start += block) {
    const long cnt = std::min(block, n - start);
    std::vector<std::thread> workers;
    workers.reserve(cnt);
    for (long j = 0; j < cnt; ++j)
      workers.emplace_back([&, j] {
        try {
          slots[j] = make(start + j);
        } catch (...) {
          errors[j] = std::current_exception();
        }
      });
    for (auto& w : workers) w.join();
    for (long j = 0; j < cnt; ++j) {
      if (errors[j]) std::rethrow_exception(errors[j]);
      consume(start + j, std::move(slots[j]));
    }
  }
}

inline void accumulate_moment(NodalField& acc, const NodalField& u, int order, double w) {
  if (acc.values.empty()) acc = NodalField(u.level, u.components, u.n_vertices());
  for (std::size_t i = 0; i < acc.values.size(); ++i) {
    const double g = order == 1 ? u.values[i] : u.values[i] * u.values[i];
    acc.values[i] += w * g;
  }
}

inline void validate_orders(std::span<const int> orders) {
  if (orders.empty()) throw std::invalid_argument("estimate: no moment orders requested");
  for (int o : orders)
    if (o != 1 && o != 2) throw std::invalid_argument("estimate: moment order must be 1 or 2");
}

}  // namespace detail

/// Plain QMC estimate on one level: the first n_samples rule points, weights
/// 1/n_samples, summed in sample order.
///
/// Solver requirements (shared with ml_estimate):
///   NodalField solve_sample(int level, std::span<const double> y) const;
///   NodalField prolong(const NodalField&, int from_level, int to_level) const;
///   int param_dim(int level) const;   // leading rule coordinates consumed
///   int threads() const;
template <class Solver>
std::vector<MomentEstimate> qmc_estimate(const Solver& solver, int level,
                                         const QuadratureRule& rule, long n_samples,
                                         std::span<const int> orders) {
  detail::validate_orders(orders);
  if (n_samples < 1 || n_samples > rule.size)
    throw std::invalid_argument("qmc_estimate: sample count out of range for the rule");
  const int dim = solver.param_dim(level);
  if (dim > rule.dim) throw std::invalid_argument("qmc_estimate: rule dimension too small");

  std::vector<NodalField> acc(orders.size());
  detail::blocked_map_consume(
      n_samples, solver.threads(),
      [&](long i) { return solver.solve_sample(level, rule.point(i).subspan(0, dim)); },
      [&](long, NodalField&& u) {
        for (std::size_t k = 0; k < orders.size(); ++k)
          detail::accumulate_moment(acc[k], u, orders[k], 1.0);
      });
  std::vector<MomentEstimate> out;
  for (std::size_t k = 0; k < orders.size(); ++k) {
    acc[k] *= 1.0 / static_cast<double>(n_samples);
    out.push_back({orders[k], level, std::move(acc[k])});
  }
  return out;
}

template <class Solver>
std::vector<MomentEstimate> qmc_estimate(const Solver& solver, int level,
                                         const QuadratureRule& rule, long n_samples, int order) {
  const int orders[1] = {order};
  return qmc_estimate(solver, level, rule, n_samples, std::span<const int>(orders));
}

/// Multilevel combination: correction k is computed on spatial level
/// max_level - k with the nested rule pair (counts[k-1], counts[k]). Written
/// out per sample, point i carries weight 1/N_k - 1/N_{k-1} if it appears in
/// the coarser rule and 1/N_k otherwise; with all levels aliased to one
/// solver the terms telescope to the plain estimate with counts[max_level]
/// points. Partial sums are accumulated per correction in sample order,
/// prolongated to max_level, and added in ascending k.
template <class Solver>
std::vector<MomentEstimate> ml_estimate(const Solver& solver, int max_level,
                                        std::span<const long> counts, const QuadratureRule& rule,
                                        std::span<const int> orders) {
  detail::validate_orders(orders);
  if (max_level < 0) throw std::invalid_argument("ml_estimate: negative level");
  if (static_cast<int>(counts.size()) != max_level + 1)
    throw std::invalid_argument("ml_estimate: need one sample count per level");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 1) throw std::invalid_argument("ml_estimate: sample counts must be positive");
    if (k > 0 && counts[k] < counts[k - 1])
      throw std::invalid_argument("ml_estimate: sample counts must be nondecreasing");
  }
  if (counts[max_level] > rule.size)
    throw std::invalid_argument("ml_estimate: rule too small for the finest count");
  for (int k = 0; k <= max_level; ++k)
    if (solver.param_dim(max_level - k) > rule.dim)
      throw std::invalid_argument("ml_estimate: rule dimension too small");

  std::vector<NodalField> total(orders.size());
  for (int k = 0; k <= max_level; ++k) {
    const int lev = max_level - k;
    const long nk = counts[k];
    const long nprev = k == 0 ? 0 : counts[k - 1];
    const double wk = 1.0 / static_cast<double>(nk);
    const double wdiff = k == 0 ? wk : wk - 1.0 / static_cast<double>(nprev);
    const int dim = solver.param_dim(lev);

    std::vector<NodalField> partial(orders.size());
    detail::blocked_map_consume(
        nk, solver.threads(),
        [&](long i) { return solver.solve_sample(lev, rule.point(i).subspan(0, dim)); },
        [&](long i, NodalField&& u) {
          const double w = (k > 0 && i < nprev) ? wdiff : wk;
          for (std::size_t q = 0; q < orders.size(); ++q)
            detail::accumulate_moment(partial[q], u, orders[q], w);
        });
    for (std::size_t q = 0; q < orders.size(); ++q) {
      NodalField lifted =
          lev == max_level ? std::move(partial[q]) : solver.prolong(partial[q], lev, max_level);
      if (total[q].values.empty())
        total[q] = NodalField(max_level, lifted.components, lifted.n_vertices());
      total[q] += lifted;
    }
  }
  std::vector<MomentEstimate> out;
  for (std::size_t q = 0; q < orders.size(); ++q)
    out.push_back({orders[q], max_level, std::move(total[q])});
  return out;
}

template <class Solver>
std::vector<MomentEstimate> ml_estimate(const Solver& solver, int max_level,
                                        std::span<const long> counts, const QuadratureRule& rule,
                                        int order) {
  const int orders[1] = {order};
  return ml_estimate(solver, max_level, counts, rule, std::span<const int>(orders));
}

enum class NormKind { l2, h1, w11 };

/// Norm of (prolongated estimate - reference) on the reference mesh. meshes
/// must be the contiguous refinement hierarchy containing both levels.
inline double error_vs_reference(const MomentEstimate& est, const MomentEstimate& ref,
                                 std::span<const TetMesh> meshes, NormKind kind) {
  if (est.order != ref.order)
    throw std::invalid_argument("error_vs_reference: comparing different moments");
  if (est.level > ref.level) throw std::invalid_argument("error_vs_reference: estimate finer than reference");
  std::size_t first = meshes.size(), last = meshes.size();
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    if (meshes[i].level == est.level) first = i;
    if (meshes[i].level == ref.level) last = i;
  }
  if (first == meshes.size() || last == meshes.size())
    throw std::invalid_argument("error_vs_reference: hierarchy does not cover both levels");
  NodalField diff = prolongate_chain(est.field, meshes.subspan(first, last - first + 1));
  diff -= ref.field;
  const TetMesh& mesh = meshes[last];
  switch (kind) {
    case NormKind::l2: return l2_norm(diff, mesh);
    case NormKind::h1: return h1_norm(diff, mesh);
    default: return w11_norm(diff, mesh);
  }
}

}  // namespace anisoqmc
