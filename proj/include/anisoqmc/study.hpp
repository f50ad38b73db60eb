#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "coefficient.hpp"
#include "covariance.hpp"
#include "estimator.hpp"
#include "fem.hpp"
#include "halton.hpp"
#include "kl.hpp"
#include "mesh.hpp"

namespace anisoqmc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StudyConfig {
  int example = 1;
  int max_level = 3;
  int ref_level = 4;
  long ref_samples = 1000;
  double delta = 0.2;
  double base_samples = 10.0;
  double a = 0.12;
  double band_lo = 0.12;
  double band_hi = 2.0;
  double cg_tol = 1e-10;
  double kl_tol_base = 1e-4;
  int moment = 0;  // 0 = both, else 1 or 2
  SampleSchedule schedule = SampleSchedule::plain;
  int threads = 1;
  std::string out = "study.csv";

  void validate() const {
    if (example != 1 && example != 2) throw ConfigError("example must be 1 or 2");
    if (max_level < 0) throw ConfigError("max_level must be >= 0");
    if (ref_level <= max_level) throw ConfigError("ref_level must exceed max_level");
    if (ref_level > 5) throw ConfigError("ref_level capped at 5 (desk scale)");
    if (ref_samples < 1) throw ConfigError("ref_samples must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (!(base_samples > 0.0)) throw ConfigError("base_samples must be positive");
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw ConfigError("cg_tol must lie in (0,1)");
    if (!(kl_tol_base > 0.0)) throw ConfigError("kl_tol_base must be positive");
    if (moment != 0 && moment != 1 && moment != 2) throw ConfigError("moment must be 1, 2 or both");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    try {
      CoefficientParams{a, band_lo, band_hi}.validate();
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
};

/// Flat key=value overrides ('#' comments, '-' and '_' interchangeable in
/// keys). Values win over whatever is already in cfg.
inline void apply_config_file(StudyConfig& cfg, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    for (char& c : key)
      if (c == '-') c = '_';
    try {
      if (key == "example") cfg.example = std::stoi(value);
      else if (key == "max_level") cfg.max_level = std::stoi(value);
      else if (key == "ref_level") cfg.ref_level = std::stoi(value);
      else if (key == "ref_samples") cfg.ref_samples = std::stol(value);
      else if (key == "delta") cfg.delta = std::stod(value);
      else if (key == "base_samples") cfg.base_samples = std::stod(value);
      else if (key == "a") cfg.a = std::stod(value);
      else if (key == "band_lo") cfg.band_lo = std::stod(value);
      else if (key == "band_hi") cfg.band_hi = std::stod(value);
      else if (key == "cg_tol") cfg.cg_tol = std::stod(value);
      else if (key == "kl_tol_base") cfg.kl_tol_base = std::stod(value);
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "out") cfg.out = value;
      else if (key == "moment") cfg.moment = value == "both" ? 0 : std::stoi(value);
      else if (key == "nl_variant") {
        if (value == "plain") cfg.schedule = SampleSchedule::plain;
        else if (value == "log-boosted" || value == "log_boosted")
          cfg.schedule = SampleSchedule::log_boosted;
        else throw ConfigError("nl_variant must be plain or log-boosted");
      } else
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config line " + std::to_string(lineno) + ": bad value for '" + key + "'");
    }
  }
}

/// Concrete sample solver for the study: per level, sample the direction
/// field from that level's expansion, assemble and solve. Tracks the largest
/// energy seminorm seen and the count of out-of-band direction magnitudes
/// (max and sum are order-free, so the stats stay deterministic under
/// threading).
class StudySolver {
 public:
  explicit StudySolver(const StudyConfig& cfg) : cfg_(cfg), params_{cfg.a, cfg.band_lo, cfg.band_hi} {
    params_.validate();
    meshes_.reserve(cfg.ref_level + 1);
    meshes_.push_back(build_base_mesh());
    for (int l = 1; l <= cfg.ref_level; ++l) meshes_.push_back(refine(meshes_.back()));
    const CovarianceModel model = covariance_model(cfg.example);
    kls_.resize(cfg.ref_level + 1);
    assemblers_.resize(cfg.ref_level + 1);
    for (int l = 0; l <= cfg.ref_level; ++l) {
      if (l > cfg.max_level && l != cfg.ref_level) continue;  // level unused by the study
      kls_[l] = build_expansion(model, meshes_[l], cfg.kl_tol_base);
      assemblers_[l] = std::make_unique<Assembler>(meshes_[l]);
    }
  }

  NodalField solve_sample(int level, std::span<const double> y) const {
    const NodalField direction = sample_field(kls_[level], y);
    EllipticityCounter counter;
    const AssembledSystem sys = assemblers_[level]->assemble(direction, params_, &counter);
    NodalField u = solve(sys, meshes_[level], cfg_.cg_tol);
    const double h1 = h1_seminorm(u, meshes_[level]);
    {
      std::lock_guard<std::mutex> lock(stats_mu_);
      max_h1_seminorm_ = std::max(max_h1_seminorm_, h1);
      ellipticity_violations_ += counter.violations;
    }
    return u;
  }

  NodalField prolong(const NodalField& u, int from, int to) const {
    return prolongate_chain(u, std::span<const TetMesh>(meshes_).subspan(from, to - from + 1));
  }

  int param_dim(int level) const { return kls_[level].modes; }
  int threads() const { return threads_; }
  void set_threads(int t) { threads_ = t < 1 ? 1 : t; }

  const std::vector<TetMesh>& meshes() const { return meshes_; }
  const KLExpansion& expansion(int level) const { return kls_[level]; }
  const CoefficientParams& params() const { return params_; }
  double max_h1_seminorm() const { return max_h1_seminorm_; }
  long ellipticity_violations() const { return ellipticity_violations_; }

 private:
  StudyConfig cfg_;
  CoefficientParams params_;
  std::vector<TetMesh> meshes_;
  std::vector<KLExpansion> kls_;
  std::vector<std::unique_ptr<Assembler>> assemblers_;
  int threads_ = 1;
  mutable std::mutex stats_mu_;
  mutable double max_h1_seminorm_ = 0;
  mutable long ellipticity_violations_ = 0;
};

struct StudyRow {
  int level = 0;
  long n_samples = 0;
  int modes = 0;
  double err_mean_h1_qmc = std::numeric_limits<double>::quiet_NaN();
  double err_mean_h1_ml = std::numeric_limits<double>::quiet_NaN();
  double err_m2_w11_qmc = std::numeric_limits<double>::quiet_NaN();
  double err_m2_w11_ml = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0;
  bool solver_ok = true;
};

struct StudyReport {
  StudyConfig cfg;
  std::vector<StudyRow> rows;
  double slope_mean_qmc = std::numeric_limits<double>::quiet_NaN();
  double slope_mean_ml = std::numeric_limits<double>::quiet_NaN();
  double slope_m2_qmc = std::numeric_limits<double>::quiet_NaN();
  double slope_m2_ml = std::numeric_limits<double>::quiet_NaN();
  double max_h1_seminorm = 0;
  long ellipticity_violations = 0;
  bool any_solver_failure = false;
};

/// Least-squares slope of log2(err) against level; nan with fewer than two
/// usable points.
inline double fit_log2_slope(std::span<const std::pair<int, double>> pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  for (const auto& [l, e] : pts) {
    if (!(e > 0.0) || !std::isfinite(e)) continue;
    const double x = l, y = std::log2(e);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double denom = n * sxx - sx * sx;
  if (denom == 0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / denom;
}

inline StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyReport rep;
  rep.cfg = cfg;
  StudySolver solver(cfg);
  solver.set_threads(cfg.threads == 0
                         ? static_cast<int>(std::thread::hardware_concurrency())
                         : cfg.threads);

  std::vector<long> counts(cfg.max_level + 1);
  for (int l = 0; l <= cfg.max_level; ++l)
    counts[l] = sample_count(l, cfg.delta, cfg.base_samples, cfg.schedule);

  std::vector<int> orders;
  if (cfg.moment == 0) orders = {1, 2};
  else orders = {cfg.moment};

  int rule_dim = solver.param_dim(cfg.ref_level);
  for (int l = 0; l <= cfg.max_level; ++l) rule_dim = std::max(rule_dim, solver.param_dim(l));
  const long rule_size = std::max(cfg.ref_samples, counts[cfg.max_level]);
  const QuadratureRule rule = build_rule(rule_size, rule_dim);

  const std::vector<MomentEstimate> ref =
      qmc_estimate(solver, cfg.ref_level, rule, cfg.ref_samples, std::span<const int>(orders));

  const auto meshes = std::span<const TetMesh>(solver.meshes());
  for (int l = 0; l <= cfg.max_level; ++l) {
    StudyRow row;
    row.level = l;
    row.n_samples = counts[l];
    row.modes = solver.param_dim(l);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto qmc =
          qmc_estimate(solver, l, rule, counts[l], std::span<const int>(orders));
      const auto ml = ml_estimate(solver, l, std::span<const long>(counts).subspan(0, l + 1),
                                  rule, std::span<const int>(orders));
      for (std::size_t q = 0; q < orders.size(); ++q) {
        if (orders[q] == 1) {
          row.err_mean_h1_qmc = error_vs_reference(qmc[q], ref[q], meshes, NormKind::h1);
          row.err_mean_h1_ml = error_vs_reference(ml[q], ref[q], meshes, NormKind::h1);
        } else {
          row.err_m2_w11_qmc = error_vs_reference(qmc[q], ref[q], meshes, NormKind::w11);
          row.err_m2_w11_ml = error_vs_reference(ml[q], ref[q], meshes, NormKind::w11);
        }
      }
    } catch (const SolveFailure&) {
      row.solver_ok = false;
      rep.any_solver_failure = true;
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.rows.push_back(row);
  }

  auto slope_of = [&](double StudyRow::*field) {
    std::vector<std::pair<int, double>> pts;
    for (const auto& r : rep.rows)
      if (r.solver_ok) pts.emplace_back(r.level, r.*field);
    return fit_log2_slope(pts);
  };
  rep.slope_mean_qmc = slope_of(&StudyRow::err_mean_h1_qmc);
  rep.slope_mean_ml = slope_of(&StudyRow::err_mean_h1_ml);
  rep.slope_m2_qmc = slope_of(&StudyRow::err_m2_w11_qmc);
  rep.slope_m2_ml = slope_of(&StudyRow::err_m2_w11_ml);
  rep.max_h1_seminorm = solver.max_h1_seminorm();
  rep.ellipticity_violations = solver.ellipticity_violations();
  return rep;
}

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Report CSV: config echo and column header, one row per level, slope footer.
/// All numeric columns except wall_time_s are deterministic for a fixed
/// config; wall_time_s is measured and varies run to run.
inline void write_report_csv(const StudyReport& rep, std::ostream& os) {
  const StudyConfig& c = rep.cfg;
  os << "# anisoqmc study v1\n";
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "# example=%d max_level=%d ref_level=%d ref_samples=%ld delta=%.17g "
                "base_samples=%.17g a=%.17g band_lo=%.17g band_hi=%.17g cg_tol=%.17g "
                "kl_tol_base=%.17g moment=%s nl_variant=%s\n",
                c.example, c.max_level, c.ref_level, c.ref_samples, c.delta, c.base_samples, c.a,
                c.band_lo, c.band_hi, c.cg_tol, c.kl_tol_base,
                c.moment == 0 ? "both" : (c.moment == 1 ? "1" : "2"),
                c.schedule == SampleSchedule::plain ? "plain" : "log-boosted");
  os << buf;
  os << "level,N_l,M_l,err_mean_H1_qmc,err_mean_H1_mlqmc,err_m2_W11_qmc,err_m2_W11_mlqmc,"
        "wall_time_s\n";
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%d,%s,%s,%s,%s,%.3f\n", r.level, r.n_samples, r.modes,
                  detail::fmt17(r.err_mean_h1_qmc).c_str(),
                  detail::fmt17(r.err_mean_h1_ml).c_str(),
                  detail::fmt17(r.err_m2_w11_qmc).c_str(),
                  detail::fmt17(r.err_m2_w11_ml).c_str(), r.wall_time_s);
    os << buf;
    if (!r.solver_ok) os << "# level " << r.level << ": solver failed, row not usable\n";
  }
  os << "# slope_mean_H1_qmc=" << detail::fmt17(rep.slope_mean_qmc) << "\n";
  os << "# slope_mean_H1_mlqmc=" << detail::fmt17(rep.slope_mean_ml) << "\n";
  os << "# slope_m2_W11_qmc=" << detail::fmt17(rep.slope_m2_qmc) << "\n";
  os << "# slope_m2_W11_mlqmc=" << detail::fmt17(rep.slope_m2_ml) << "\n";
  os << "# max_h1_seminorm=" << detail::fmt17(rep.max_h1_seminorm) << "\n";
  os << "# ellipticity_violations=" << rep.ellipticity_violations << "\n";
}

/// Per-panel CSVs next to the report: <stem>_mean.csv and <stem>_m2.csv with
/// columns level,qmc,mlqmc,guide. The guide column is the reference-rate line
/// anchored at 0.7 (mean, H1) and 0.06 (second moment, W11) at level 0.
inline void emit_plotdata(const StudyReport& rep, const std::string& out_path) {
  std::string stem = out_path;
  if (stem.size() >= 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
  auto write_panel = [&](const std::string& path, double anchor,
                         double StudyRow::*qmc, double StudyRow::*ml) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_plotdata: cannot write " + path);
    os << "level,qmc,mlqmc,guide\n";
    for (const auto& r : rep.rows) {
      os << r.level << ',' << detail::fmt17(r.*qmc) << ',' << detail::fmt17(r.*ml) << ','
         << detail::fmt17(anchor * std::pow(2.0, -r.level)) << '\n';
    }
  };
  if (rep.cfg.moment != 2)
    write_panel(stem + "_mean.csv", 0.7, &StudyRow::err_mean_h1_qmc, &StudyRow::err_mean_h1_ml);
  if (rep.cfg.moment != 1)
    write_panel(stem + "_m2.csv", 0.06, &StudyRow::err_m2_w11_qmc, &StudyRow::err_m2_w11_ml);
}

}  // namespace anisoqmc
