// Command-line front end: convergence studies, mesh dumps, expansion export
// and the derivative-bound report. Exit codes: 0 ok, 2 configuration error,
// 3 solver failure.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "anisoqmc/kl.hpp"
#include "anisoqmc/mesh.hpp"
#include "anisoqmc/regularity.hpp"
#include "anisoqmc/study.hpp"

namespace {

int run_command(anisoqmc::StudyConfig cfg, const std::string& config_path) {
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file " << config_path << "\n";
      return 2;
    }
    anisoqmc::apply_config_file(cfg, in);
  }
  cfg.validate();
  const anisoqmc::StudyReport rep = anisoqmc::run_study(cfg);
  std::ofstream os(cfg.out, std::ios::binary);
  if (!os) {
    std::cerr << "error: cannot write " << cfg.out << "\n";
    return 2;
  }
  anisoqmc::write_report_csv(rep, os);
  anisoqmc::emit_plotdata(rep, cfg.out);
  std::cout << "wrote " << cfg.out << " (levels 0.." << cfg.max_level << ", reference level "
            << cfg.ref_level << ")\n";
  if (rep.any_solver_failure) {
    std::cerr << "error: solver failed on at least one level (rows flagged in the CSV)\n";
    return 3;
  }
  return 0;
}

int mesh_dump_command(int level, const std::string& out_path) {
  const anisoqmc::TetMesh mesh = anisoqmc::kuhn_mesh(level);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return 2;
  }
  anisoqmc::dump_mesh(mesh, os);
  std::cout << "wrote " << out_path << " (" << mesh.n_vertices() << " vertices, " << mesh.n_tets()
            << " tets)\n";
  return 0;
}

int kl_export_command(int example, int level, double tol_base, const std::string& out_path) {
  const anisoqmc::CovarianceModel model = anisoqmc::covariance_model(example);
  anisoqmc::TetMesh mesh = anisoqmc::build_base_mesh();
  for (int l = 0; l < level; ++l) mesh = anisoqmc::refine(mesh);
  const anisoqmc::KLExpansion kl = anisoqmc::build_expansion(model, mesh, tol_base);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return 2;
  }
  anisoqmc::export_expansion(kl, os);
  std::cout << "wrote " << out_path << " (" << kl.modes << " modes, trace tolerance "
            << kl.trace_tol << ")\n";
  return 0;
}

int regularity_command(int example, int level, int n_max, double a, double lo, double hi) {
  const anisoqmc::CovarianceModel model = anisoqmc::covariance_model(example);
  anisoqmc::TetMesh mesh = anisoqmc::build_base_mesh();
  for (int l = 0; l < level; ++l) mesh = anisoqmc::refine(mesh);
  const anisoqmc::KLExpansion kl = anisoqmc::build_expansion(model, mesh);
  const anisoqmc::CoefficientParams params{a, lo, hi};
  params.validate();
  const anisoqmc::ModeDecay decay = anisoqmc::mode_decay(kl, mesh, 1);
  const auto proof =
      anisoqmc::bound_constants(decay, lo, hi, anisoqmc::BoundConvention::proof);
  const auto statement =
      anisoqmc::bound_constants(decay, lo, hi, anisoqmc::BoundConvention::statement);
  const auto checks = anisoqmc::derivative_bound_checks(kl, params, mesh);
  const auto comb = anisoqmc::combinatorial_checks(n_max);
  std::cout << anisoqmc::regularity_report(proof, statement, checks, comb);
  bool all = comb.slice_ok && comb.bell_matches_stirling && comb.factorial_bound_ok;
  for (const auto& c : checks) all = all && c.pass;
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multilevel quasi-Monte Carlo study of diffusion with a random direction field"};
  app.require_subcommand(1);

  anisoqmc::StudyConfig cfg;
  std::string config_path;
  auto* run = app.add_subcommand("run", "run a convergence study and write CSV reports");
  run->add_option("--example", cfg.example, "model to study (1 or 2)");
  run->add_option("--max-level", cfg.max_level, "finest estimated level");
  run->add_option("--ref-level", cfg.ref_level, "reference level (must exceed max-level)");
  run->add_option("--ref-samples", cfg.ref_samples, "samples for the reference estimate");
  run->add_option("--delta", cfg.delta, "sample growth parameter in (0,1)");
  run->add_option("--base-samples", cfg.base_samples, "level-0 sample budget");
  run->add_option("--a", cfg.a, "transverse conductivity");
  run->add_option("--band-lo", cfg.band_lo, "lower admissible direction magnitude");
  run->add_option("--band-hi", cfg.band_hi, "upper admissible direction magnitude");
  run->add_option("--cg-tol", cfg.cg_tol, "relative CG residual tolerance");
  run->add_option("--kl-tol-base", cfg.kl_tol_base, "level-0 relative trace tolerance");
  run->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  run->add_option("--out", cfg.out, "report CSV path");
  std::string moment = "both";
  run->add_option("--moment", moment, "moment to estimate: 1, 2 or both");
  std::string nl_variant = "plain";
  run->add_option("--nl-variant", nl_variant, "sample schedule: plain or log-boosted");
  run->add_option("--config", config_path, "key=value file overriding the flags");

  int dump_level = 0;
  std::string dump_out = "mesh.txt";
  auto* dump = app.add_subcommand("mesh-dump", "write a plain-text mesh listing");
  dump->add_option("--level", dump_level, "mesh level");
  dump->add_option("--out", dump_out, "output path");

  int klx_example = 1, klx_level = 0;
  double klx_tol = 1e-4;
  std::string klx_out = "expansion.txt";
  auto* klx = app.add_subcommand("kl-export", "build and export a direction-field expansion");
  klx->add_option("--example", klx_example, "model (1 or 2)");
  klx->add_option("--level", klx_level, "mesh level");
  klx->add_option("--tol-base", klx_tol, "level-0 relative trace tolerance");
  klx->add_option("--out", klx_out, "output path");

  int reg_example = 1, reg_level = 0, reg_nmax = 6;
  double reg_a = 0.12, reg_lo = 0.12, reg_hi = 2.0;
  auto* reg = app.add_subcommand("regularity", "print the derivative-bound report");
  reg->add_option("--example", reg_example, "model (1 or 2)");
  reg->add_option("--level", reg_level, "mesh level for the discrete decay surrogate");
  reg->add_option("--n-max", reg_nmax, "combinatorial check depth (<= 8)");
  reg->add_option("--a", reg_a, "transverse conductivity");
  reg->add_option("--band-lo", reg_lo, "lower admissible direction magnitude");
  reg->add_option("--band-hi", reg_hi, "upper admissible direction magnitude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      if (moment == "both") cfg.moment = 0;
      else if (moment == "1") cfg.moment = 1;
      else if (moment == "2") cfg.moment = 2;
      else throw anisoqmc::ConfigError("--moment must be 1, 2 or both");
      if (nl_variant == "plain") cfg.schedule = anisoqmc::SampleSchedule::plain;
      else if (nl_variant == "log-boosted") cfg.schedule = anisoqmc::SampleSchedule::log_boosted;
      else throw anisoqmc::ConfigError("--nl-variant must be plain or log-boosted");
      return run_command(cfg, config_path);
    }
    if (dump->parsed()) return mesh_dump_command(dump_level, dump_out);
    if (klx->parsed()) return kl_export_command(klx_example, klx_level, klx_tol, klx_out);
    if (reg->parsed())
      return regularity_command(reg_example, reg_level, reg_nmax, reg_a, reg_lo, reg_hi);
  } catch (const anisoqmc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const anisoqmc::SolveFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
