#include "ipslab/pipeline.hpp"

#include <fstream>
#include <iostream>

#include "ipslab/coercivity.hpp"
#include "ipslab/density.hpp"
#include "ipslab/io.hpp"
#include "ipslab/learn.hpp"

namespace ipslab {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

json matrix_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json certificate_to_json(const AdmissibilityCertificate& c) {
  json j;
  j["pass"] = c.pass;
  j["growth_pass"] = c.growth_pass;
  j["hessian_pass"] = c.hessian_pass;
  j["beta"] = c.beta;
  j["c1_growth"] = c.c1_growth;
  j["c0_growth"] = c.c0_growth;
  j["alpha"] = c.alpha;
  j["c3"] = c.c3;
  j["method"] = c.method == CertifyMethod::Analytic ? "analytic" : "numeric_scan";
  if (c.witness_r) j["witness_r"] = *c.witness_r;
  return j;
}

json coercivity_to_json(const CoercivityReport& r) {
  json j;
  j["G"] = matrix_to_json(r.G);
  j["M"] = matrix_to_json(r.M);
  j["G_se"] = matrix_to_json(r.G_se);
  j["M_se"] = matrix_to_json(r.M_se);
  j["c_hat"] = r.c_hat;
  j["c_hat_se"] = r.c_hat_se;
  j["c_min"] = vector_to_json(r.c_min);
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["low_sample"] = r.low_sample;
  return j;
}

// kappa = (s - 2)/(2 - theta gamma); defined only for theta gamma < 2.
std::optional<double> kappa_of(const SystemSpec& sys) {
  double tg;
  switch (sys.potential.family()) {
    case PotentialFamily::PowerShifted:
      tg = sys.potential.theta() * sys.potential.gamma();
      break;
    case PotentialFamily::PurePower:
      tg = sys.potential.gamma();
      break;
    default:
      return std::nullopt;
  }
  if (!(tg < 2)) return std::nullopt;
  return (sys.moment_s - 2.0) / (2.0 - tg);
}

}  // namespace

void run_pipeline(const ExperimentConfig& cfg) {
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  json manifest;
  manifest["kind"] = "experiment";
  manifest["schema_version"] = 1;
  manifest["config_hash"] = cfg.config_hash;
  manifest["seed"] = cfg.system.seed;
  manifest["status"] = "running";
  manifest["stages"] = json::object();

  auto flush = [&] { write_json_atomic(out / "manifest.json", manifest); };

  try {
    // Certify the potential before spending any compute on it.
    const auto cert = certify(cfg.system.potential);
    manifest["stages"]["certify"] = certificate_to_json(cert);
    manifest["stages"]["certify"]["potential"] =
        potential_to_json(cfg.system.potential);
    flush();
    if (!cert.pass)
      throw DomainError(
          "pipeline: potential failed the ergodicity certificate (see the "
          "certify stage in the manifest); refusing to simulate");

    const RelativeFrame frame = build_frame(cfg.system.N, cfg.system.d);
    Ensemble ens = simulate(cfg.system, Layout::Relative);
    save_ensemble(ens, out / "ensemble.bin", out / "ensemble.json");
    manifest["stages"]["simulate"] = {
        {"manifest", "ensemble.json"},
        {"divergence_count", ens.divergence_count},
        {"n_paths", ens.n_paths},
        {"snapshots", ens.times.size()}};
    flush();

    if (cfg.density.enabled) {
      const DensityGrid stat =
          stationary_density(frame, cfg.system.potential, cfg.density.grid,
                             cfg.density.mc);
      save_density(stat, out / "stationary.bin", out / "stationary.json");
      json dj;
      dj["stationary"] = "stationary.json";
      json rows = json::array();
      std::vector<double> ts, ds;
      for (std::size_t i = 0; i < cfg.density.times.size(); ++i) {
        const double t = cfg.density.times[i];
        const DensityGrid emp = empirical_density(ens, t, cfg.density.grid);
        const std::string stem = "empirical_" + std::to_string(i);
        save_density(emp, out / (stem + ".bin"), out / (stem + ".json"));
        const double l1 = l1_distance(emp, stat);
        rows.push_back({{"t", t}, {"l1", l1}, {"manifest", stem + ".json"}});
        if (t > 0) {
          ts.push_back(t);
          ds.push_back(l1);
        }
      }
      dj["l1"] = rows;
      if (ts.size() >= 5) {
        try {
          const RateFit fit = fit_decay(ts, ds, FitKind::Polynomial);
          dj["rate_fit"] = {{"kind", "polynomial"},
                            {"fitted_rate", fit.fitted_rate},
                            {"residual", fit.residual}};
        } catch (const NumericError& e) {
          dj["rate_fit"] = {{"error", e.what()}};
        }
      }
      manifest["stages"]["density"] = dj;
      flush();
    }

    if (cfg.coercivity.enabled) {
      const HypothesisSpace hs = space_from_json(cfg.coercivity.space);
      hs.check_independent();
      std::vector<std::pair<VectorXd, VectorXd>> uv;
      if (stationary_gaussian_cov(cfg.system.potential, cfg.system.N,
                                  cfg.system.d)) {
        uv = sample_stationary_gaussian(cfg.system.potential, cfg.system.N,
                                        cfg.system.d,
                                        cfg.coercivity.stationary_samples,
                                        cfg.coercivity.seed);
      } else {
        // No exact sampler: late-time snapshots stand in for stationarity.
        uv = samples_from_ensemble(ens, 0.5 * cfg.system.T);
      }
      CoercivityReport inf = estimate_I_infty(hs, uv, cfg.coercivity.seed);
      json cj;
      cj["I_infty"] = coercivity_to_json(inf);
      json tlist = json::array();
      for (double T : cfg.coercivity.T_list) {
        CoercivityReport bar = estimate_I_bar_T(hs, ens, T);
        tlist.push_back({{"T", T}, {"report", coercivity_to_json(bar)}});
      }
      cj["I_bar_T"] = tlist;
      if (inf.c_hat > 0) {
        const double S_H = estimate_S_H(hs, inf);
        cj["S_H_lower_bound"] = S_H;
        if (auto kappa = kappa_of(cfg.system)) {
          cj["kappa"] = *kappa;
          auto [tc, tmin] =
              time_threshold(S_H, cfg.coercivity.C, cfg.system.N, *kappa);
          cj["T_c"] = tc;
          cj["T_min"] = tmin;
        }
      }
      write_json_atomic(out / "coercivity.json", cj);
      manifest["stages"]["coercivity"] = {{"manifest", "coercivity.json"},
                                          {"c_hat", inf.c_hat},
                                          {"c_hat_se", inf.c_hat_se}};
      flush();
    }

    if (cfg.learn.enabled) {
      const HypothesisSpace hs = space_from_json(cfg.learn.space);
      hs.check_independent();
      RegressionProblem prob = assemble(ens, hs, cfg.learn.t0, cfg.learn.t1);
      auto truth = [&](double r) { return cfg.system.potential.phi(r); };
      std::vector<double> rho;
      for (int pth = 0; pth < std::min(ens.n_paths, 2000); ++pth) {
        if (ens.diverged_at[pth] >= 0) continue;
        rho.push_back(ens.state(pth, static_cast<int>(ens.times.size()) - 1)
                          .head(ens.d)
                          .norm());
      }
      LearnResult res = solve_and_report(prob, hs, cfg.learn.reg, truth, rho);
      json lj;
      lj["coeffs"] = vector_to_json(res.coeffs);
      lj["reg_used"] = res.reg_used;
      lj["rows"] = prob.rows;
      if (res.l2_rho_error) lj["l2_rho_error"] = *res.l2_rho_error;
      write_json_atomic(out / "learn.json", lj);
      manifest["stages"]["learn"] = {{"manifest", "learn.json"}};
      flush();
    }

    manifest["status"] = "ok";
    flush();
  } catch (...) {
    manifest["status"] = "FAILED";
    flush();
    throw;
  }
}

void report_tables(const fs::path& manifest_path) {
  const json manifest = read_json(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  const json stages = manifest.value("stages", json::object());

  auto open_csv = [&](const std::string& name) {
    std::ofstream os(dir / name, std::ios::trunc);
    if (!os) throw NumericError("report: cannot open " + name);
    os.precision(17);
    return os;
  };

  {
    auto os = open_csv("l1_decay.csv");
    os << "t,l1_distance\n";
    if (stages.contains("density"))
      for (const auto& row : stages["density"].value("l1", json::array()))
        os << row.at("t").get<double>() << ","
           << row.at("l1").get<double>() << "\n";
    else
      std::cerr << "report: no density stage in the manifest\n";
  }
  {
    auto os = open_csv("coercivity.csv");
    os << "T,c_hat,c_hat_se\n";
    if (stages.contains("coercivity")) {
      const json cj = read_json(
          dir / stages["coercivity"].at("manifest").get<std::string>());
      const json& inf = cj.at("I_infty");
      os << "inf," << inf.at("c_hat").get<double>() << ","
         << inf.at("c_hat_se").get<double>() << "\n";
      for (const auto& row : cj.value("I_bar_T", json::array()))
        os << row.at("T").get<double>() << ","
           << row.at("report").at("c_hat").get<double>() << ","
           << row.at("report").at("c_hat_se").get<double>() << "\n";
    } else {
      std::cerr << "report: no coercivity stage in the manifest\n";
    }
  }
  {
    auto os = open_csv("coefficients.csv");
    os << "basis_index,coefficient\n";
    if (stages.contains("learn")) {
      const json lj =
          read_json(dir / stages["learn"].at("manifest").get<std::string>());
      int i = 0;
      for (const auto& c : lj.at("coeffs")) os << i++ << "," << c.get<double>() << "\n";
    } else {
      std::cerr << "report: no learn stage in the manifest\n";
    }
  }
  {
    auto os = open_csv("spectra.csv");
    os << "matrix,index,eigenvalue\n";
    if (stages.contains("coercivity")) {
      const json cj = read_json(
          dir / stages["coercivity"].at("manifest").get<std::string>());
      for (const char* name : {"G", "M"}) {
        const json& mj = cj.at("I_infty").at(name);
        const int n = static_cast<int>(mj.size());
        MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) m(i, j) = mj[i][j].get<double>();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
        for (int i = 0; i < n; ++i)
          os << name << "," << i << "," << es.eigenvalues()[i] << "\n";
      }
    } else {
      std::cerr << "report: no coercivity stage in the manifest\n";
    }
  }
}

}  // namespace ipslab
