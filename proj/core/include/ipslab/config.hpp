#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipslab/density.hpp"
#include "ipslab/dynamics.hpp"
#include "ipslab/hypothesis.hpp"
#include "ipslab/pdkernels.hpp"

namespace ipslab {

/// Strict helpers: unknown fields are ConfigErrors, so misspelled keys cannot
/// silently change a scientific run.
void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                  const std::string& context);

Potential potential_from_json(const nlohmann::json& j);
nlohmann::json potential_to_json(const Potential& p);

HypothesisSpace space_from_json(const nlohmann::json& j);

/// Kernel spec for the `pdtest` subcommand, e.g.
///   {"type":"gaussian","t":1.0}        exp(-t|u-v|^2)
///   {"type":"inner_product"}           <u,v>
///   {"type":"exp_inner","scale":1.0}   exp(scale <u,v>)
///   {"type":"radial_power","theta":1.5}       |u-v|^theta
///   {"type":"phi0","a":1,"theta":2,"gamma":1,"transform":"none|triangle|box"}
Kernel kernel_from_json(const nlohmann::json& j);

struct DensityStageConfig {
  bool enabled = false;
  GridSpec grid;
  std::vector<double> times;
  McSpec mc;
};

struct CoercivityStageConfig {
  bool enabled = false;
  nlohmann::json space;          // hypothesis space spec
  std::vector<double> T_list;
  double C = 1.0;                // the unquantified rate constant, user input
  std::uint64_t seed = 1;
  long stationary_samples = 200000;
};

struct LearnStageConfig {
  bool enabled = false;
  nlohmann::json space;
  double t0 = 0, t1 = -1;        // t1 < 0: full horizon
  double reg = -1;
};

struct ExperimentConfig {
  int schema_version = 1;
  SystemSpec system;
  DensityStageConfig density;
  CoercivityStageConfig coercivity;
  LearnStageConfig learn;
  std::string output_dir = "out";
  std::uint64_t config_hash = 0;   // FNV-1a of the canonical config text

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

}  // namespace ipslab
