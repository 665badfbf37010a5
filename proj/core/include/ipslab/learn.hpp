#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "ipslab/coercivity.hpp"
#include "ipslab/dynamics.hpp"
#include "ipslab/hypothesis.hpp"

namespace ipslab {

/// Normal system of the increment-based least squares estimator of the
/// interaction kernel phi on a hypothesis space.
struct RegressionProblem {
  Eigen::MatrixXd A;   // symmetric positive semidefinite
  Eigen::VectorXd b;
  double reg = 0;      // added as reg * I when solving
  long rows = 0;       // effective increment equations used
  int n = 0;
};

/// Matches observed increments against dt * (1/N) sum_j psi(|r_ji|) r_ji per
/// basis element over snapshots in [t0, t1]. FullSpace ensembles use the
/// particle increments directly; Relative ensembles are whitened by S^{-1}.
RegressionProblem assemble(const Ensemble& ens, const HypothesisSpace& hs,
                           double t0, double t1);

/// Merges two normal systems built from disjoint sub-ensembles.
RegressionProblem merge(const RegressionProblem& a, const RegressionProblem& b);

struct LearnResult {
  Eigen::VectorXd coeffs;
  std::optional<double> l2_rho_error;  // ||phi_hat - phi||_{L2(rho)} when known
  double reg_used = 0;
};

/// Solves (A + reg I) c = b. Default reg = 1e-10 trace(A)/n when reg < 0.
/// When the true phi and rho-samples are supplied, reports the L2(rho)
/// recovery error by Monte Carlo over the |r_12| samples.
LearnResult solve_and_report(const RegressionProblem& prob, const HypothesisSpace& hs,
                             double reg = -1,
                             const std::function<double(double)>& true_phi = nullptr,
                             const std::vector<double>& rho_samples = {});

}  // namespace ipslab
