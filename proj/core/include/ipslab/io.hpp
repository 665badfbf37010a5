#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipslab/density.hpp"
#include "ipslab/dynamics.hpp"

namespace ipslab {

/// Raw little-endian float64 array plus a JSON sidecar (shape, dtype, order).
void write_f64_array(const std::filesystem::path& bin_path,
                     const std::vector<long>& shape, const std::vector<double>& data);
std::vector<double> read_f64_array(const std::filesystem::path& bin_path,
                                   std::vector<long>& shape);

/// Atomic JSON write: temp file in the same directory, then rename.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t len);

// Ensemble <-> (binary array + manifest)
void save_ensemble(const Ensemble& ens, const std::filesystem::path& bin_path,
                   const std::filesystem::path& manifest_path);
Ensemble load_ensemble(const std::filesystem::path& manifest_path);
void write_ensemble_csv(const Ensemble& ens, const std::filesystem::path& csv_path);

// DensityGrid <-> (binary array + manifest)
void save_density(const DensityGrid& den, const std::filesystem::path& bin_path,
                  const std::filesystem::path& manifest_path);
DensityGrid load_density(const std::filesystem::path& manifest_path);

}  // namespace ipslab
