#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ipslab/dynamics.hpp"
#include "ipslab/hypothesis.hpp"

namespace ipslab {

/// G is the coercivity bilinear form on the basis, M the L2(rho) Gram of the
/// same basis; c_hat is the minimum eigenvalue of the symmetric pencil (G, M).
struct CoercivityReport {
  Eigen::MatrixXd G, M;
  Eigen::MatrixXd G_se, M_se;      // batch-mean standard errors per entry
  double c_hat = 0;
  double c_hat_se = 0;             // SE of the form at the minimizing direction
  Eigen::VectorXd c_min;           // minimizing coefficients, unit M-norm
  long samples = 0;
  std::uint64_t seed = 0;
  bool low_sample = false;
};

/// Estimates I_inf on the basis from samples (u,v) ~ p_inf:
/// G[i][j] = E[ psi_i(|u|) psi_j(|v|) <u,v>/(|u||v|) ] (symmetrized),
/// M[i][j] = E[ psi_i(|u|) psi_j(|u|) ] pooling both marginals.
CoercivityReport estimate_I_infty(
    const HypothesisSpace& hs,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& uv_samples,
    std::uint64_t seed = 0);

/// Time-averaged version over snapshots of a Relative-layout ensemble up to
/// time T (trapezoidal in t), with M against the mean marginal density.
CoercivityReport estimate_I_bar_T(const HypothesisSpace& hs, const Ensemble& ens,
                                  double T);

/// Minimum eigenvalue of M^{-1/2} G M^{-1/2}, via Cholesky whitening.
/// Throws NumericError when M is not positive definite to tolerance.
double coercivity_constant(const Eigen::MatrixXd& G, const Eigen::MatrixXd& M);

/// Lower bound on S_H = sup ||h||_inf^2 / I_inf(h) by projected gradient
/// ascent over the M-unit sphere with random restarts.
double estimate_S_H(const HypothesisSpace& hs, const CoercivityReport& report,
                    int restarts = 32, std::uint64_t seed = 7);

/// (T_c, T_min) = ((8 C N S_H^2)^{1/kappa}, (1 + 4 S_H) T_c).
std::pair<double, double> time_threshold(double S_H, double C, int N, double kappa);

struct NormStarSpec {
  int k_max = 12;           // series truncation (even terms contribute)
  int radial_points = 400;  // Gauss-Legendre points for the inner integral
  int lambda_points = 2000; // points of the log-substituted lambda quadrature
  double s_lo = -30, s_hi = 8;  // lambda = e^s integration window
};

struct NormStarResult {
  double value = 0;
  std::vector<double> terms;  // contribution per k = 1..k_max
  double tail_bound = 0;
};

/// Truncated series for ||h||_*^2 in d = 1 for a radial h supported on
/// [0, R_max]. Odd-k terms vanish by parity (h(|u|) u^k/|u| is odd in u for
/// odd k). Throws NumericError when the term ratio stops decaying at k_max.
NormStarResult norm_star(const std::function<double(double)>& h, double R_max,
                         double a, double gamma, const NormStarSpec& spec = {});

/// Draws n iid samples (u,v) from the exact stationary Gaussian of a
/// quadratic potential. Throws DomainError for non-quadratic families.
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> sample_stationary_gaussian(
    const Potential& p, int N, int d, long n, std::uint64_t seed);

/// Pools (r_12, r_13) snapshots of a Relative ensemble at times >= t_min.
std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> samples_from_ensemble(
    const Ensemble& ens, double t_min);

}  // namespace ipslab
