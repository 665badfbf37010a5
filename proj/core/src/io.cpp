#include "ipslab/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

#include "ipslab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian float64");

namespace ipslab {

namespace fs = std::filesystem;
using nlohmann::json;

void write_f64_array(const fs::path& bin_path, const std::vector<long>& shape,
                     const std::vector<double>& data) {
  long expect = 1;
  for (long s : shape) expect *= s;
  if (expect != static_cast<long>(data.size()))
    throw DomainError("write_f64_array: shape does not match the data size");

  const fs::path tmp = bin_path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw NumericError("write_f64_array: cannot open " + tmp.string());
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!os) throw NumericError("write_f64_array: short write to " + tmp.string());
  }
  fs::rename(tmp, bin_path);

  json side;
  side["dtype"] = "float64";
  side["byte_order"] = "little";
  side["order"] = "C";
  side["shape"] = shape;
  write_json_atomic(bin_path.string() + ".json", side);
}

std::vector<double> read_f64_array(const fs::path& bin_path,
                                   std::vector<long>& shape) {
  const json side = read_json(bin_path.string() + ".json");
  if (side.value("dtype", "") != "float64" ||
      side.value("byte_order", "") != "little")
    throw ConfigError("read_f64_array: unsupported sidecar dtype/byte order");
  shape = side.at("shape").get<std::vector<long>>();
  long expect = 1;
  for (long s : shape) expect *= s;

  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw ConfigError("read_f64_array: cannot open " + bin_path.string());
  std::vector<double> data(expect);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(data.size() * sizeof(double)))
    throw ConfigError("read_f64_array: file shorter than the sidecar shape");
  return data;
}

void write_json_atomic(const fs::path& path, const json& j) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw NumericError("write_json_atomic: cannot open " + tmp.string());
    os << j.dump(2) << "\n";
    if (!os) throw NumericError("write_json_atomic: short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("read_json: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("read_json: " + path.string() + ": " + e.what());
  }
  return j;
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("fnv1a_file: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const auto got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof(buf))) break;
  }
  return h;
}

namespace {

const char* layout_name(Layout l) {
  switch (l) {
    case Layout::FullSpace: return "full";
    case Layout::Relative: return "relative";
    case Layout::YCoords: return "y";
  }
  return "?";
}

Layout layout_from_name(const std::string& s) {
  if (s == "full") return Layout::FullSpace;
  if (s == "relative") return Layout::Relative;
  if (s == "y") return Layout::YCoords;
  throw ConfigError("unknown layout: " + s);
}

}  // namespace

void save_ensemble(const Ensemble& ens, const fs::path& bin_path,
                   const fs::path& manifest_path) {
  write_f64_array(bin_path,
                  {ens.n_paths, static_cast<long>(ens.times.size()), ens.dim},
                  ens.data);
  json m;
  m["kind"] = "ensemble";
  m["layout"] = layout_name(ens.layout);
  m["N"] = ens.N;
  m["d"] = ens.d;
  m["dim"] = ens.dim;
  m["times"] = ens.times;
  m["n_paths"] = ens.n_paths;
  m["seed"] = ens.seed;
  m["dt"] = ens.dt;
  m["diverged_at"] = ens.diverged_at;
  m["divergence_count"] = ens.divergence_count;
  m["data_file"] = bin_path.filename().string();
  m["data_fnv1a"] = fnv1a_file(bin_path);
  write_json_atomic(manifest_path, m);
}

Ensemble load_ensemble(const fs::path& manifest_path) {
  const json m = read_json(manifest_path);
  if (m.value("kind", "") != "ensemble")
    throw ConfigError("load_ensemble: manifest is not an ensemble");
  Ensemble ens;
  ens.layout = layout_from_name(m.at("layout").get<std::string>());
  ens.N = m.at("N").get<int>();
  ens.d = m.at("d").get<int>();
  ens.dim = m.at("dim").get<int>();
  ens.times = m.at("times").get<std::vector<double>>();
  ens.n_paths = m.at("n_paths").get<int>();
  ens.seed = m.at("seed").get<std::uint64_t>();
  ens.dt = m.at("dt").get<double>();
  ens.diverged_at = m.at("diverged_at").get<std::vector<int>>();
  ens.divergence_count = m.at("divergence_count").get<int>();
  const fs::path bin =
      manifest_path.parent_path() / m.at("data_file").get<std::string>();
  if (fnv1a_file(bin) != m.at("data_fnv1a").get<std::uint64_t>())
    throw ConfigError("load_ensemble: data file hash mismatch");
  std::vector<long> shape;
  ens.data = read_f64_array(bin, shape);
  if (shape != std::vector<long>{ens.n_paths,
                                 static_cast<long>(ens.times.size()), ens.dim})
    throw ConfigError("load_ensemble: data shape disagrees with the manifest");
  return ens;
}

void write_ensemble_csv(const Ensemble& ens, const fs::path& csv_path) {
  std::ofstream os(csv_path, std::ios::trunc);
  if (!os) throw NumericError("write_ensemble_csv: cannot open " + csv_path.string());
  os << "path,time";
  for (int c = 0; c < ens.dim; ++c) os << ",x" << c;
  os << "\n";
  os.precision(17);
  for (int pth = 0; pth < ens.n_paths; ++pth)
    for (std::size_t ti = 0; ti < ens.times.size(); ++ti) {
      os << pth << "," << ens.times[ti];
      const auto st = ens.state(pth, static_cast<int>(ti));
      for (int c = 0; c < ens.dim; ++c) os << "," << st[c];
      os << "\n";
    }
}

void save_density(const DensityGrid& den, const fs::path& bin_path,
                  const fs::path& manifest_path) {
  std::vector<double> payload = den.values;
  payload.insert(payload.end(), den.stderrs.begin(), den.stderrs.end());
  const long nc = den.grid.n_cells();
  write_f64_array(bin_path, {den.stderrs.empty() ? 1L : 2L, nc}, payload);
  json m;
  m["kind"] = "density";
  m["d"] = den.grid.d;
  m["lo"] = std::vector<double>(den.grid.lo.data(),
                                den.grid.lo.data() + den.grid.lo.size());
  m["hi"] = std::vector<double>(den.grid.hi.data(),
                                den.grid.hi.data() + den.grid.hi.size());
  m["res"] = den.grid.res;
  m["density_kind"] = den.kind == DensityKind::AnalyticStationary ? "analytic"
                      : den.kind == DensityKind::Kde              ? "kde"
                                                                  : "histogram";
  m["normalization"] = den.normalization;
  m["deficit"] = den.deficit;
  m["has_stderrs"] = !den.stderrs.empty();
  m["data_file"] = bin_path.filename().string();
  m["data_fnv1a"] = fnv1a_file(bin_path);
  write_json_atomic(manifest_path, m);
}

DensityGrid load_density(const fs::path& manifest_path) {
  const json m = read_json(manifest_path);
  if (m.value("kind", "") != "density")
    throw ConfigError("load_density: manifest is not a density");
  DensityGrid den;
  den.grid.d = m.at("d").get<int>();
  const auto lo = m.at("lo").get<std::vector<double>>();
  const auto hi = m.at("hi").get<std::vector<double>>();
  den.grid.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
  den.grid.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
  den.grid.res = m.at("res").get<std::vector<int>>();
  den.grid.validate();
  const std::string k = m.at("density_kind").get<std::string>();
  den.kind = k == "analytic" ? DensityKind::AnalyticStationary
             : k == "kde"    ? DensityKind::Kde
                             : DensityKind::EmpiricalHistogram;
  den.normalization = m.at("normalization").get<double>();
  den.deficit = m.at("deficit").get<double>();
  const fs::path bin =
      manifest_path.parent_path() / m.at("data_file").get<std::string>();
  if (fnv1a_file(bin) != m.at("data_fnv1a").get<std::uint64_t>())
    throw ConfigError("load_density: data file hash mismatch");
  std::vector<long> shape;
  std::vector<double> payload = read_f64_array(bin, shape);
  const long nc = den.grid.n_cells();
  den.values.assign(payload.begin(), payload.begin() + nc);
  if (m.at("has_stderrs").get<bool>())
    den.stderrs.assign(payload.begin() + nc, payload.end());
  return den;
}

}  // namespace ipslab
