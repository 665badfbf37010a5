#pragma once

#include <filesystem>
#include <string>

#include "ipslab/config.hpp"

namespace ipslab {

/// Executes the enabled stages (certify -> simulate -> density -> coercivity
/// -> learn), writing every artifact plus a manifest that links them to the
/// config hash and seed. Re-running with identical config+seed reproduces
/// bitwise-identical binary outputs. Throws on stage failure after writing a
/// FAILED marker into the manifest.
void run_pipeline(const ExperimentConfig& cfg);

/// Emits flat plot-ready tables (CSV) next to the manifest:
/// l1_decay.csv (t, l1_distance), coercivity.csv (T, c_hat, stderr),
/// coefficients.csv (basis_index, coefficient), spectra.csv (matrix, index,
/// eigenvalue). Missing artifacts are listed on stderr; the rest are emitted.
void report_tables(const std::filesystem::path& manifest_path);

}  // namespace ipslab
