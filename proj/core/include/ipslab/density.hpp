#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ipslab/dynamics.hpp"

namespace ipslab {

/// Axis-aligned box grid over (u,v) in R^d x R^d, so 2d axes. Cells are
/// uniform per axis; values live on cells.
struct GridSpec {
  int d = 1;
  Eigen::VectorXd lo, hi;     // length 2d
  std::vector<int> res;       // cells per axis, length 2d

  int n_axes() const { return 2 * d; }
  long n_cells() const;
  double cell_volume() const;
  void validate() const;
};

enum class DensityKind { AnalyticStationary, EmpiricalHistogram, Kde };

struct DensityGrid {
  GridSpec grid;
  std::vector<double> values;       // >= 0, cell-averaged density
  std::vector<double> stderrs;      // per-cell MC standard error (may be empty)
  double normalization = 1.0;       // mass on the box
  double deficit = 0.0;             // estimated mass outside the box
  DensityKind kind = DensityKind::EmpiricalHistogram;

  double mass_on_box() const;
};

struct McSpec {
  long n_samples = 20000;         // importance samples for f(u,v), N > 3
  double max_rel_stderr = 0.2;    // cap on the worst per-node relative SE
  std::uint64_t seed = 1;
};

/// Evaluates p_inf(u,v) ~ f(u,v) exp(-(2/N)[Phi|u| + Phi|v| + Phi|u-v|]) as
/// cell averages (tensor Gauss points per cell), normalized on the box with
/// an out-of-box deficit estimated on an enlarged coarse box. For N = 3 the
/// marginalization factor f is identically 1; for N > 3 it is estimated per
/// cell by importance sampling with a moment-matched Gaussian proposal.
DensityGrid stationary_density(const RelativeFrame& frame, const Potential& p,
                               const GridSpec& grid, const McSpec& mc = {});

/// Histogram (or product-Gaussian KDE) of (r_12, r_13) at snapshot time t
/// across non-diverged paths. Throws DomainError with fewer than 100 in-box
/// samples.
DensityGrid empirical_density(const Ensemble& ens, double t, const GridSpec& grid,
                              bool kde = false);

/// Sum |p - q| cellvol plus both truncation deficits (an upper bound on the
/// true L1 distance under the box policy). Grids must match exactly.
double l1_distance(const DensityGrid& p, const DensityGrid& q);

enum class FitKind { Polynomial, Exponential };

struct RateFit {
  std::vector<double> times, distances;
  double fitted_rate = 0;   // kappa-hat for Polynomial (d ~ c t^{-kappa/2}),
                            // lambda for Exponential (d ~ c e^{-lambda t})
  FitKind kind = FitKind::Polynomial;
  double residual = 0;      // RMS residual of the linearized fit
};

/// Least squares on (log t, log d) or (t, log d). Requires >= 5 points with
/// positive distances; throws NumericError when the distances do not vary
/// beyond a plausible noise floor.
RateFit fit_decay(const std::vector<double>& times,
                  const std::vector<double>& distances, FitKind kind);

}  // namespace ipslab
