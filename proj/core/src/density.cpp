#include "ipslab/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ipslab/errors.hpp"
#include "ipslab/rng.hpp"

namespace ipslab {

using Eigen::VectorXd;

long GridSpec::n_cells() const {
  long n = 1;
  for (int r : res) n *= r;
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1;
  for (int ax = 0; ax < n_axes(); ++ax) v *= (hi[ax] - lo[ax]) / res[ax];
  return v;
}

void GridSpec::validate() const {
  if (d < 1) throw ConfigError("grid: d must be >= 1");
  if (lo.size() != n_axes() || hi.size() != n_axes() ||
      static_cast<int>(res.size()) != n_axes())
    throw ConfigError("grid: lo/hi/res must all have length 2d");
  for (int ax = 0; ax < n_axes(); ++ax) {
    if (!(lo[ax] < hi[ax])) throw ConfigError("grid: lo < hi required per axis");
    if (res[ax] < 1) throw ConfigError("grid: res must be >= 1 per axis");
  }
  if (n_cells() > 100000000L) throw ConfigError("grid: more than 1e8 cells");
}

double DensityGrid::mass_on_box() const {
  return std::accumulate(values.begin(), values.end(), 0.0) * grid.cell_volume();
}

namespace {

bool grids_equal(const GridSpec& a, const GridSpec& b) {
  return a.d == b.d && a.res == b.res && a.lo.size() == b.lo.size() &&
         (a.lo - b.lo).cwiseAbs().maxCoeff() < 1e-12 &&
         (a.hi - b.hi).cwiseAbs().maxCoeff() < 1e-12;
}

// Multi-index walk over cells: idx in [0, n_cells), axis strides row-major
// with axis 0 slowest.
std::vector<long> strides_of(const GridSpec& g) {
  const int na = g.n_axes();
  std::vector<long> st(na);
  long s = 1;
  for (int ax = na - 1; ax >= 0; --ax) {
    st[ax] = s;
    s *= g.res[ax];
  }
  return st;
}

// Unnormalized stationary density of (u, v) = (r_12, r_13) up to the
// marginalization factor: exp(-(2/N)[Phi(|u|) + Phi(|v|) + Phi(|u-v|)]).
double pair_weight(const Potential& p, int N, int d, const VectorXd& uv) {
  const VectorXd u = uv.head(d), v = uv.tail(d);
  const double e = p.value(u.norm()) + p.value(v.norm()) + p.value((u - v).norm());
  return std::exp(-2.0 * e / N);
}

// Importance-sampled marginalization factor for N > 3: integrates out
// r_14..r_1N against the remaining interaction terms using a Gaussian
// proposal centered between u and v. Returns (estimate, stderr).
std::pair<double, double> marginal_factor(const Potential& p, int N, int d,
                                          const VectorXd& u, const VectorXd& v,
                                          long n_samples, std::mt19937_64& rng) {
  const int extra = N - 3;
  const VectorXd center = (u + v) / 3.0;
  const double sigma = 1.0;  // matches the quadratic-family stationary scale
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0, sumsq = 0;
  std::vector<VectorXd> r(extra, VectorXd(d));
  for (long s = 0; s < n_samples; ++s) {
    double log_q = 0;
    for (int j = 0; j < extra; ++j) {
      double q2 = 0;
      for (int k = 0; k < d; ++k) {
        const double z = normal(rng);
        r[j][k] = center[k] + sigma * z;
        q2 += z * z;
      }
      log_q += -0.5 * q2 - d * std::log(sigma * std::sqrt(2 * M_PI));
    }
    double energy = 0;
    for (int j = 0; j < extra; ++j) {
      energy += p.value(r[j].norm());
      energy += p.value((u - r[j]).norm());
      energy += p.value((v - r[j]).norm());
      for (int k = j + 1; k < extra; ++k)
        energy += p.value((r[j] - r[k]).norm());
    }
    const double w = std::exp(-2.0 * energy / N - log_q);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / n_samples;
  const double var = std::max(0.0, sumsq / n_samples - mean * mean);
  return {mean, std::sqrt(var / n_samples)};
}

// 3-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr double kGx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr double kGw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

// Average of f over one cell by a tensor Gauss rule.
double cell_average(const GridSpec& g, const std::vector<int>& cell,
                    const std::function<double(const VectorXd&)>& f) {
  const int na = g.n_axes();
  std::vector<int> node(na, 0);
  VectorXd x(na);
  double acc = 0;
  for (;;) {
    double w = 1;
    for (int ax = 0; ax < na; ++ax) {
      const double h = (g.hi[ax] - g.lo[ax]) / g.res[ax];
      const double c = g.lo[ax] + (cell[ax] + 0.5) * h;
      x[ax] = c + 0.5 * h * kGx[node[ax]];
      w *= 0.5 * kGw[node[ax]];
    }
    acc += w * f(x);
    int ax = na - 1;
    while (ax >= 0 && ++node[ax] == 3) node[ax--] = 0;
    if (ax < 0) break;
  }
  return acc;
}

}  // namespace

DensityGrid stationary_density(const RelativeFrame& frame, const Potential& p,
                               const GridSpec& grid, const McSpec& mc) {
  grid.validate();
  if (grid.d != frame.d)
    throw ConfigError("stationary_density: grid dimension does not match the frame");
  const int N = frame.N, d = frame.d;
  const int na = grid.n_axes();
  const long nc = grid.n_cells();

  DensityGrid out;
  out.grid = grid;
  out.kind = DensityKind::AnalyticStationary;
  out.values.resize(nc);
  if (N > 3) out.stderrs.resize(nc);

  auto rng = make_stream(mc.seed, 0);
  double worst_rel_se = 0;
  auto strides = strides_of(grid);
  std::vector<int> cell(na, 0);
  for (long idx = 0; idx < nc; ++idx) {
    if (N == 3) {
      out.values[idx] = cell_average(grid, cell, [&](const VectorXd& x) {
        return pair_weight(p, N, d, x);
      });
    } else {
      // One importance-sampling run per cell at the cell's Gauss points would
      // be wasteful; estimate f at the cell center and multiply the exact
      // cell average of the pair weight.
      VectorXd c(na);
      for (int ax = 0; ax < na; ++ax)
        c[ax] = grid.lo[ax] + (cell[ax] + 0.5) * (grid.hi[ax] - grid.lo[ax]) / grid.res[ax];
      auto [f, se] = marginal_factor(p, N, d, c.head(d), c.tail(d), mc.n_samples, rng);
      if (f > 0) worst_rel_se = std::max(worst_rel_se, se / f);
      const double base = cell_average(grid, cell, [&](const VectorXd& x) {
        return pair_weight(p, N, d, x);
      });
      out.values[idx] = f * base;
      out.stderrs[idx] = se * base;
    }
    int ax = na - 1;
    while (ax >= 0 && ++cell[ax] == grid.res[ax]) cell[ax--] = 0;
    if (ax < 0 && idx + 1 < nc)
      throw NumericError("stationary_density: cell walk out of sync");
  }
  if (N > 3 && worst_rel_se > mc.max_rel_stderr) {
    std::ostringstream os;
    os << "stationary_density: importance sampling too noisy (worst relative "
          "stderr "
       << worst_rel_se << " > " << mc.max_rel_stderr << ")";
    throw NumericError(os.str());
  }

  // Mass outside the box, estimated on a 3x enlarged coarse midpoint grid.
  const double box_mass =
      std::accumulate(out.values.begin(), out.values.end(), 0.0) *
      grid.cell_volume();
  if (!(box_mass > 0))
    throw NumericError("stationary_density: zero mass on the box");
  double outer_mass = 0;
  {
    GridSpec big = grid;
    const VectorXd mid = 0.5 * (grid.lo + grid.hi);
    big.lo = mid + 3.0 * (grid.lo - mid);
    big.hi = mid + 3.0 * (grid.hi - mid);
    big.res.assign(na, na <= 2 ? 96 : 24);
    const double cv = big.cell_volume();
    std::vector<int> bc(na, 0);
    const long bn = big.n_cells();
    for (long idx = 0; idx < bn; ++idx) {
      VectorXd x(na);
      bool inside = true;
      for (int ax = 0; ax < na; ++ax) {
        x[ax] = big.lo[ax] + (bc[ax] + 0.5) * (big.hi[ax] - big.lo[ax]) / big.res[ax];
        inside = inside && x[ax] >= grid.lo[ax] && x[ax] <= grid.hi[ax];
      }
      if (!inside) {
        double w = pair_weight(p, N, d, x);
        if (N > 3) {
          auto [f, se] = marginal_factor(p, N, d, x.head(d), x.tail(d),
                                         std::max(200L, mc.n_samples / 50), rng);
          w *= f;
        }
        outer_mass += w * cv;
      }
      int ax = na - 1;
      while (ax >= 0 && ++bc[ax] == big.res[ax]) bc[ax--] = 0;
    }
  }

  const double total = box_mass + outer_mass;
  for (auto& v : out.values) v /= total;
  for (auto& s : out.stderrs) s /= total;
  out.deficit = outer_mass / total;
  out.normalization = total;
  return out;
}

DensityGrid empirical_density(const Ensemble& ens, double t, const GridSpec& grid,
                              bool kde) {
  grid.validate();
  if (ens.layout != Layout::Relative)
    throw DomainError("empirical_density: ensemble must be in relative coordinates");
  if (grid.d != ens.d)
    throw DomainError("empirical_density: grid dimension does not match the ensemble");
  if (ens.dim < 2 * ens.d)
    throw DomainError("empirical_density: need at least two relative coordinates");
  const int ti = ens.time_index(t);
  const int na = grid.n_axes();
  const long nc = grid.n_cells();
  auto strides = strides_of(grid);

  // Collect (r_12, r_13) samples from non-diverged paths.
  std::vector<VectorXd> samples;
  samples.reserve(ens.n_paths);
  for (int pth = 0; pth < ens.n_paths; ++pth) {
    if (ens.diverged_at[pth] >= 0 &&
        ens.diverged_at[pth] * ens.dt <= t + 1e-12)
      continue;
    samples.emplace_back(ens.state(pth, ti).head(na));
  }
  const long n_total = static_cast<long>(samples.size());

  DensityGrid out;
  out.grid = grid;
  out.kind = kde ? DensityKind::Kde : DensityKind::EmpiricalHistogram;
  out.values.assign(nc, 0.0);
  out.stderrs.assign(nc, 0.0);

  long in_box = 0;
  if (!kde) {
    for (const auto& s : samples) {
      long idx = 0;
      bool inside = true;
      for (int ax = 0; ax < na && inside; ++ax) {
        const double h = (grid.hi[ax] - grid.lo[ax]) / grid.res[ax];
        const long c = static_cast<long>(std::floor((s[ax] - grid.lo[ax]) / h));
        if (c < 0 || c >= grid.res[ax]) inside = false;
        else idx += c * strides[ax];
      }
      if (inside) {
        out.values[idx] += 1;
        ++in_box;
      }
    }
    if (in_box < 100)
      throw DomainError("empirical_density: fewer than 100 in-box samples");
    const double cv = grid.cell_volume();
    for (long i = 0; i < nc; ++i) {
      const double frac = out.values[i] / n_total;
      out.values[i] = frac / cv;
      out.stderrs[i] = std::sqrt(frac * (1 - frac) / n_total) / cv;
    }
  } else {
    // Product-Gaussian KDE, Silverman bandwidth per axis, evaluated at cell
    // centers. Counts in-box via the raw samples.
    VectorXd mean = VectorXd::Zero(na), m2 = VectorXd::Zero(na);
    for (const auto& s : samples) {
      mean += s;
      bool inside = true;
      for (int ax = 0; ax < na; ++ax)
        inside = inside && s[ax] >= grid.lo[ax] && s[ax] <= grid.hi[ax];
      if (inside) ++in_box;
    }
    if (in_box < 100)
      throw DomainError("empirical_density: fewer than 100 in-box samples");
    mean /= n_total;
    for (const auto& s : samples) m2 += (s - mean).cwiseAbs2();
    VectorXd bw(na);
    for (int ax = 0; ax < na; ++ax) {
      const double sd = std::sqrt(m2[ax] / std::max(1L, n_total - 1));
      bw[ax] = sd * std::pow(4.0 / ((na + 2.0) * n_total), 1.0 / (na + 4.0));
      if (!(bw[ax] > 0))
        throw NumericError("empirical_density: degenerate KDE bandwidth");
    }
    std::vector<int> cell(na, 0);
    for (long idx = 0; idx < nc; ++idx) {
      VectorXd c(na);
      for (int ax = 0; ax < na; ++ax)
        c[ax] = grid.lo[ax] + (cell[ax] + 0.5) * (grid.hi[ax] - grid.lo[ax]) / grid.res[ax];
      double acc = 0;
      for (const auto& s : samples) {
        double k = 1;
        for (int ax = 0; ax < na; ++ax) {
          const double z = (c[ax] - s[ax]) / bw[ax];
          k *= std::exp(-0.5 * z * z) / (bw[ax] * std::sqrt(2 * M_PI));
        }
        acc += k;
      }
      out.values[idx] = acc / n_total;
      int ax = na - 1;
      while (ax >= 0 && ++cell[ax] == grid.res[ax]) cell[ax--] = 0;
    }
  }
  out.deficit = 1.0 - out.mass_on_box();
  out.deficit = std::max(0.0, out.deficit);
  out.normalization = 1.0;
  return out;
}

double l1_distance(const DensityGrid& p, const DensityGrid& q) {
  if (!grids_equal(p.grid, q.grid))
    throw DomainError("l1_distance: grids do not match");
  double acc = 0;
  for (std::size_t i = 0; i < p.values.size(); ++i)
    acc += std::abs(p.values[i] - q.values[i]);
  return acc * p.grid.cell_volume() + p.deficit + q.deficit;
}

RateFit fit_decay(const std::vector<double>& times,
                  const std::vector<double>& distances, FitKind kind) {
  if (times.size() != distances.size())
    throw DomainError("fit_decay: times/distances size mismatch");
  if (times.size() < 5)
    throw DomainError("fit_decay: need at least 5 points");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0)) throw DomainError("fit_decay: times must be > 0");
    if (!(distances[i] > 0))
      throw DomainError("fit_decay: distances must be > 0");
  }
  const double dmax = *std::max_element(distances.begin(), distances.end());
  const double dmin = *std::min_element(distances.begin(), distances.end());
  if (dmax / dmin < 1.05)
    throw NumericError("fit_decay: distances vary by < 5%, below a plausible "
                       "noise floor; no rate is identifiable");

  const std::size_t n = times.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = kind == FitKind::Polynomial ? std::log(times[i]) : times[i];
    ys[i] = std::log(distances[i]);
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14)
    throw NumericError("fit_decay: degenerate abscissa");
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;

  RateFit fit;
  fit.times = times;
  fit.distances = distances;
  fit.kind = kind;
  fit.fitted_rate = kind == FitKind::Polynomial ? -2.0 * slope : -slope;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  return fit;
}

}  // namespace ipslab
