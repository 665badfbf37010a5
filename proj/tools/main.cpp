// Command-line front end: simulate, density, coercivity, pdtest, learn, run,
// report. Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 precondition
// failure.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ipslab/coercivity.hpp"
#include "ipslab/config.hpp"
#include "ipslab/density.hpp"
#include "ipslab/io.hpp"
#include "ipslab/learn.hpp"
#include "ipslab/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ipslab;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json gram_report_to_json(const GramReport& r) {
  json j;
  j["n"] = r.n;
  j["trials"] = r.trials;
  j["min_eigenvalue"] = r.min_eigenvalue;
  j["max_zero_sum_eigenvalue"] = r.max_zero_sum_eigenvalue;
  j["verdict"] = verdict_name(r.verdict);
  j["seed"] = r.seed;
  j["tol"] = r.tol;
  return j;
}

json coercivity_report_to_json(const CoercivityReport& r) {
  json j;
  j["G"] = matrix_to_json(r.G);
  j["M"] = matrix_to_json(r.M);
  j["G_se"] = matrix_to_json(r.G_se);
  j["M_se"] = matrix_to_json(r.M_se);
  j["c_hat"] = r.c_hat;
  j["c_hat_se"] = r.c_hat_se;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["low_sample"] = r.low_sample;
  return j;
}

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out = ".";
};

int run_simulate(const std::string& config_path, const std::string& layout_name,
                 bool csv, const GlobalFlags& g) {
  json j = read_json(config_path);
  // The simulate config is the "system" object of the experiment schema.
  SystemSpec spec = [&] {
    json wrap;
    wrap["schema_version"] = 1;
    wrap["system"] = j;
    return ExperimentConfig::from_json(wrap).system;
  }();
  if (g.seed) spec.seed = *g.seed;
  if (g.threads) spec.threads = *g.threads;
  Layout layout = Layout::Relative;
  if (layout_name == "full") layout = Layout::FullSpace;
  else if (layout_name == "relative") layout = Layout::Relative;
  else if (layout_name == "y") layout = Layout::YCoords;
  else throw ConfigError("simulate: unknown layout \"" + layout_name + "\"");

  Ensemble ens = simulate(spec, layout);
  fs::create_directories(g.out);
  const fs::path out(g.out);
  save_ensemble(ens, out / "ensemble.bin", out / "ensemble.json");
  if (csv) write_ensemble_csv(ens, out / "ensemble.csv");
  json summary = {{"manifest", (out / "ensemble.json").string()},
                  {"n_paths", ens.n_paths},
                  {"snapshots", ens.times.size()},
                  {"divergence_count", ens.divergence_count}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_density(const std::string& a_path, const std::string& b_path) {
  const DensityGrid a = load_density(a_path);
  const DensityGrid b = load_density(b_path);
  json out = {{"l1_distance", l1_distance(a, b)},
              {"deficit_a", a.deficit},
              {"deficit_b", b.deficit}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_coercivity(const std::string& space_path, const std::string& source,
                   const std::string& manifest, const std::string& system_path,
                   double T, const GlobalFlags& g) {
  const HypothesisSpace hs = space_from_json(read_json(space_path));
  hs.check_independent();
  const std::uint64_t seed = g.seed.value_or(1);
  CoercivityReport rep;
  if (source == "stationary") {
    if (system_path.empty())
      throw ConfigError("coercivity: --system required for stationary source");
    json wrap;
    wrap["schema_version"] = 1;
    wrap["system"] = read_json(system_path);
    const SystemSpec sys = ExperimentConfig::from_json(wrap).system;
    auto uv = sample_stationary_gaussian(sys.potential, sys.N, sys.d, 200000, seed);
    rep = estimate_I_infty(hs, uv, seed);
  } else if (source == "ensemble") {
    if (manifest.empty())
      throw ConfigError("coercivity: --manifest required for ensemble source");
    const Ensemble ens = load_ensemble(manifest);
    rep = T > 0 ? estimate_I_bar_T(hs, ens, T)
                : estimate_I_bar_T(hs, ens, ens.times.back());
  } else {
    throw ConfigError("coercivity: source must be stationary or ensemble");
  }
  std::cout << coercivity_report_to_json(rep).dump(2) << "\n";
  return 0;
}

int run_pdtest(const std::string& kernel_path, int dim, int n, int trials,
               const std::string& mode, const GlobalFlags& g) {
  const Kernel k = kernel_from_json(read_json(kernel_path));
  const std::uint64_t seed = g.seed.value_or(1);
  GramReport rep = mode == "nd" ? test_nd(k, dim, n, trials, seed)
                                : test_pd(k, dim, n, trials, seed);
  json j = gram_report_to_json(rep);
  j["kernel"] = k.provenance;
  j["mode"] = mode;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_learn(const std::string& manifest, const std::string& space_path,
              double t0, double t1, double reg, const GlobalFlags& g) {
  const Ensemble ens = load_ensemble(manifest);
  const HypothesisSpace hs = space_from_json(read_json(space_path));
  hs.check_independent();
  RegressionProblem prob = assemble(ens, hs, t0, t1);
  LearnResult res = solve_and_report(prob, hs, reg);
  json j;
  j["coeffs"] = json::array();
  for (Eigen::Index i = 0; i < res.coeffs.size(); ++i)
    j["coeffs"].push_back(res.coeffs[i]);
  j["reg_used"] = res.reg_used;
  j["rows"] = prob.rows;
  fs::create_directories(g.out);
  write_json_atomic(fs::path(g.out) / "learn.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interacting-particle systems laboratory"};
  app.require_subcommand(1);

  GlobalFlags g;
  std::uint64_t seed_raw = 0;
  int threads_raw = 0;
  auto* seed_opt = app.add_option("--seed", seed_raw, "master RNG seed");
  auto* thr_opt = app.add_option("--threads", threads_raw, "worker threads");
  app.add_option("--out", g.out, "output directory");

  auto* sim = app.add_subcommand("simulate", "integrate the particle SDE");
  std::string sim_config, sim_layout = "relative";
  bool sim_csv = false;
  sim->add_option("--config", sim_config, "SystemSpec JSON file")->required();
  sim->add_option("--layout", sim_layout, "full | relative | y");
  sim->add_flag("--csv", sim_csv, "also write flattened CSV");

  auto* den = app.add_subcommand("density", "L1 distance of two density manifests");
  std::string den_a, den_b;
  den->add_option("--a", den_a, "first density manifest")->required();
  den->add_option("--b", den_b, "second density manifest")->required();

  auto* coe = app.add_subcommand("coercivity", "estimate the coercivity form");
  std::string coe_space, coe_source = "stationary", coe_manifest, coe_system;
  double coe_T = -1;
  coe->add_option("--space", coe_space, "hypothesis space JSON file")->required();
  coe->add_option("--source", coe_source, "stationary | ensemble");
  coe->add_option("--manifest", coe_manifest, "ensemble manifest (ensemble source)");
  coe->add_option("--system", coe_system, "SystemSpec JSON (stationary source)");
  coe->add_option("--T", coe_T, "time horizon for the ensemble average");

  auto* pdt = app.add_subcommand("pdtest", "randomized definiteness tests");
  std::string pdt_kernel, pdt_mode = "pd";
  int pdt_dim = 3, pdt_n = 30, pdt_trials = 20;
  pdt->add_option("--kernel", pdt_kernel, "kernel spec JSON file")->required();
  pdt->add_option("--dim", pdt_dim, "ambient dimension");
  pdt->add_option("--n", pdt_n, "points per Gram matrix");
  pdt->add_option("--trials", pdt_trials, "random point sets");
  pdt->add_option("--mode", pdt_mode, "pd | nd");

  auto* lrn = app.add_subcommand("learn", "least-squares kernel recovery");
  std::string lrn_manifest, lrn_space;
  double lrn_t0 = 0, lrn_t1 = -1, lrn_reg = -1;
  lrn->add_option("--manifest", lrn_manifest, "ensemble manifest")->required();
  lrn->add_option("--space", lrn_space, "hypothesis space JSON file")->required();
  lrn->add_option("--t0", lrn_t0, "window start");
  lrn->add_option("--t1", lrn_t1, "window end (<0: full horizon)");
  lrn->add_option("--reg", lrn_reg, "ridge parameter (<0: automatic)");

  auto* run = app.add_subcommand("run", "execute a full experiment config");
  std::string run_config;
  run->add_option("--config", run_config, "experiment JSON file")->required();

  auto* rep = app.add_subcommand("report", "emit plot-ready CSV tables");
  std::string rep_manifest;
  rep->add_option("--manifest", rep_manifest, "experiment manifest")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (seed_opt->count()) g.seed = seed_raw;
  if (thr_opt->count()) g.threads = threads_raw;

  try {
    if (sim->parsed()) return run_simulate(sim_config, sim_layout, sim_csv, g);
    if (den->parsed()) return run_density(den_a, den_b);
    if (coe->parsed())
      return run_coercivity(coe_space, coe_source, coe_manifest, coe_system,
                            coe_T, g);
    if (pdt->parsed())
      return run_pdtest(pdt_kernel, pdt_dim, pdt_n, pdt_trials, pdt_mode, g);
    if (lrn->parsed())
      return run_learn(lrn_manifest, lrn_space, lrn_t0, lrn_t1, lrn_reg, g);
    if (run->parsed()) {
      ExperimentConfig cfg = ExperimentConfig::from_file(run_config);
      if (g.seed) cfg.system.seed = *g.seed;
      if (g.threads) cfg.system.threads = *g.threads;
      if (g.out != ".") cfg.output_dir = g.out;
      run_pipeline(cfg);
      std::cout << "ok: " << (fs::path(cfg.output_dir) / "manifest.json").string()
                << "\n";
      return 0;
    }
    if (rep->parsed()) {
      report_tables(rep_manifest);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "precondition failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
