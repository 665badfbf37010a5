#include "ipslab/config.hpp"

#include <cmath>

#include "ipslab/io.hpp"

namespace ipslab {

using nlohmann::json;

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& context) {
  if (!j.is_object())
    throw ConfigError(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || it.key() == k;
    if (!ok)
      throw ConfigError(context + ": unknown field \"" + it.key() + "\"");
  }
}

namespace {

double get_num(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key))
    throw ConfigError(ctx + ": missing required field \"" + key + "\"");
  if (!j.at(key).is_number())
    throw ConfigError(ctx + ": field \"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

std::vector<double> get_vec(const json& j, const std::string& key,
                            const std::string& ctx) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ConfigError(ctx + ": field \"" + key + "\" must be an array");
  return j.at(key).get<std::vector<double>>();
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

}  // namespace

Potential potential_from_json(const json& j) {
  require_keys(j, {"family", "a", "theta", "gamma"}, "potential");
  const std::string fam = j.value("family", "");
  if (fam == "power_shifted")
    return Potential::power_shifted(get_num(j, "a", "potential"),
                                    get_num(j, "theta", "potential"),
                                    get_num(j, "gamma", "potential"));
  if (fam == "pure_power") {
    require_keys(j, {"family", "gamma"}, "potential(pure_power)");
    return Potential::pure_power(get_num(j, "gamma", "potential"));
  }
  if (fam == "composite")
    throw ConfigError(
        "potential: composite potentials need a programmatic psi and cannot be "
        "loaded from JSON");
  throw ConfigError("potential: unknown family \"" + fam + "\"");
}

json potential_to_json(const Potential& p) {
  json j;
  switch (p.family()) {
    case PotentialFamily::PowerShifted:
      j["family"] = "power_shifted";
      j["a"] = p.a();
      j["theta"] = p.theta();
      j["gamma"] = p.gamma();
      break;
    case PotentialFamily::PurePower:
      j["family"] = "pure_power";
      j["gamma"] = p.gamma();
      break;
    case PotentialFamily::Composite:
      j["family"] = "composite";
      j["c1"] = p.c1();
      j["c2"] = p.c2();
      break;
  }
  return j;
}

HypothesisSpace space_from_json(const json& j) {
  require_keys(j, {"type", "n", "R_max"}, "space");
  const std::string type = j.value("type", "");
  const double R = get_num(j, "R_max", "space");
  if (type == "hats")
    return HypothesisSpace::hats(static_cast<int>(get_num(j, "n", "space")), R);
  if (type == "constant") {
    require_keys(j, {"type", "R_max"}, "space(constant)");
    return HypothesisSpace::constant(R);
  }
  throw ConfigError("space: unknown type \"" + type + "\"");
}

Kernel kernel_from_json(const json& j) {
  require_keys(j, {"type", "t", "scale", "theta", "a", "gamma", "transform"},
               "kernel");
  const std::string type = j.value("type", "");
  if (type == "gaussian") {
    const double t = j.value("t", 1.0);
    if (!(t > 0)) throw ConfigError("kernel(gaussian): t must be > 0");
    return k_radial([t](double r) { return std::exp(-t * r * r); },
                    "gaussian t=" + std::to_string(t));
  }
  if (type == "inner_product") return k_inner_product();
  if (type == "exp_inner") {
    return k_exp(k_inner_product(), j.value("scale", 1.0));
  }
  if (type == "radial_power") {
    const double theta = j.value("theta", 1.0);
    if (!(theta > 0) || theta > 2)
      throw ConfigError("kernel(radial_power): theta must be in (0,2]");
    return k_radial([theta](double r) { return std::pow(r, theta); },
                    "radial_power theta=" + std::to_string(theta));
  }
  if (type == "phi0") {
    const double a = j.value("a", 0.0);
    const double theta = j.value("theta", 2.0);
    const double gamma = j.value("gamma", 1.0);
    const Potential p = Potential::power_shifted(a, theta, gamma);
    Kernel psi = k_radial([p](double r) { return p.value(r); },
                          "phi0 a=" + std::to_string(a));
    const std::string tr = j.value("transform", "none");
    if (tr == "none") return psi;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
    if (tr == "triangle") return transform_triangle(psi, x0);
    if (tr == "box") return transform_box(psi, x0);
    throw ConfigError("kernel(phi0): unknown transform \"" + tr + "\"");
  }
  throw ConfigError("kernel: unknown type \"" + type + "\"");
}

namespace {

InitialCondition initial_from_json(const json& j) {
  require_keys(j, {"kind", "x0", "mean", "sigma", "burn_in"}, "initial");
  const std::string kind = j.value("kind", "");
  if (kind == "point") {
    return InitialCondition::point(to_eigen(get_vec(j, "x0", "initial")));
  }
  if (kind == "gaussian") {
    Eigen::VectorXd mean;
    if (j.contains("mean")) mean = to_eigen(get_vec(j, "mean", "initial"));
    return InitialCondition::gaussian(std::move(mean), j.value("sigma", 1.0));
  }
  if (kind == "stationary")
    return InitialCondition::stationary_bootstrap(j.value("burn_in", 20.0));
  throw ConfigError("initial: unknown kind \"" + kind + "\"");
}

SystemSpec system_from_json(const json& j) {
  require_keys(j,
               {"N", "d", "potential", "dt", "T", "n_paths", "initial", "seed",
                "moment_s", "snapshot_times", "threads"},
               "system");
  SystemSpec s;
  s.N = static_cast<int>(get_num(j, "N", "system"));
  s.d = static_cast<int>(get_num(j, "d", "system"));
  if (!j.contains("potential"))
    throw ConfigError("system: missing required field \"potential\"");
  s.potential = potential_from_json(j.at("potential"));
  s.dt = get_num(j, "dt", "system");
  s.T = get_num(j, "T", "system");
  s.n_paths = static_cast<int>(get_num(j, "n_paths", "system"));
  if (j.contains("initial")) s.initial = initial_from_json(j.at("initial"));
  s.seed = j.value("seed", std::uint64_t{0});
  s.moment_s = j.value("moment_s", 4.0);
  if (j.contains("snapshot_times"))
    s.snapshot_times = get_vec(j, "snapshot_times", "system");
  s.threads = static_cast<int>(j.value("threads", 1.0));
  s.validate();
  return s;
}

GridSpec grid_from_json(const json& j) {
  require_keys(j, {"d", "lo", "hi", "res"}, "grid");
  GridSpec g;
  g.d = static_cast<int>(get_num(j, "d", "grid"));
  g.lo = to_eigen(get_vec(j, "lo", "grid"));
  g.hi = to_eigen(get_vec(j, "hi", "grid"));
  for (double r : get_vec(j, "res", "grid"))
    g.res.push_back(static_cast<int>(r));
  g.validate();
  return g;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require_keys(j,
               {"schema_version", "system", "density", "coercivity", "learn",
                "output_dir"},
               "config");
  ExperimentConfig cfg;
  cfg.schema_version = static_cast<int>(j.value("schema_version", 0.0));
  if (cfg.schema_version != 1)
    throw ConfigError("config: unsupported schema_version (expected 1)");
  if (!j.contains("system"))
    throw ConfigError("config: missing required field \"system\"");
  cfg.system = system_from_json(j.at("system"));
  if (j.contains("density")) {
    const json& dj = j.at("density");
    require_keys(dj, {"enabled", "grid", "times", "mc_samples", "mc_seed"},
                 "density");
    cfg.density.enabled = dj.value("enabled", false);
    if (cfg.density.enabled) {
      if (!dj.contains("grid"))
        throw ConfigError("density: missing required field \"grid\"");
      cfg.density.grid = grid_from_json(dj.at("grid"));
      cfg.density.times = get_vec(dj, "times", "density");
      cfg.density.mc.n_samples =
          static_cast<long>(dj.value("mc_samples", 20000.0));
      cfg.density.mc.seed = dj.value("mc_seed", std::uint64_t{1});
    }
  }
  if (j.contains("coercivity")) {
    const json& cj = j.at("coercivity");
    require_keys(cj,
                 {"enabled", "space", "T_list", "C", "seed",
                  "stationary_samples"},
                 "coercivity");
    cfg.coercivity.enabled = cj.value("enabled", false);
    if (cfg.coercivity.enabled) {
      if (!cj.contains("space"))
        throw ConfigError("coercivity: missing required field \"space\"");
      cfg.coercivity.space = cj.at("space");
      space_from_json(cfg.coercivity.space);  // validate eagerly
      if (cj.contains("T_list"))
        cfg.coercivity.T_list = get_vec(cj, "T_list", "coercivity");
      cfg.coercivity.C = cj.value("C", 1.0);
      cfg.coercivity.seed = cj.value("seed", std::uint64_t{1});
      cfg.coercivity.stationary_samples =
          static_cast<long>(cj.value("stationary_samples", 200000.0));
    }
  }
  if (j.contains("learn")) {
    const json& lj = j.at("learn");
    require_keys(lj, {"enabled", "space", "t0", "t1", "reg"}, "learn");
    cfg.learn.enabled = lj.value("enabled", false);
    if (cfg.learn.enabled) {
      if (!lj.contains("space"))
        throw ConfigError("learn: missing required field \"space\"");
      cfg.learn.space = lj.at("space");
      space_from_json(cfg.learn.space);
      cfg.learn.t0 = lj.value("t0", 0.0);
      cfg.learn.t1 = lj.value("t1", -1.0);
      cfg.learn.reg = lj.value("reg", -1.0);
    }
  }
  cfg.output_dir = j.value("output_dir", "out");
  const std::string canon = j.dump();
  cfg.config_hash = fnv1a_bytes(canon.data(), canon.size());
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json(read_json(path));
}

}  // namespace ipslab
