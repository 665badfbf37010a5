#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "ipslab/potentials.hpp"

namespace ipslab {

/// Coordinate frame for the relative system r = (r_12, ..., r_1N).
/// A = S S^T is the covariance structure of the pairwise Brownian
/// differences; S is the explicit lower-triangular square root.
struct RelativeFrame {
  int N = 0;
  int d = 0;
  Eigen::MatrixXd A;      // (N-1)d square, 2I_d diagonal / I_d off-diagonal blocks
  Eigen::MatrixXd S;      // lower triangular
  Eigen::MatrixXd S_inv;
};

RelativeFrame build_frame(int N, int d);

/// H(r) = (1/N) [ sum_{j>=2} Phi(|r_1j|) + sum_{2<=i<j} Phi(|r_1i - r_1j|) ].
double hamiltonian(const RelativeFrame& frame, const Potential& p,
                   const Eigen::VectorXd& r);

Eigen::VectorXd grad_hamiltonian(const RelativeFrame& frame, const Potential& p,
                                 const Eigen::VectorXd& r);

/// Component i: (1/N) sum_{j != i} phi(|X_j - X_i|)(X_j - X_i).
Eigen::VectorXd drift_full(const Potential& p, int N, int d,
                           const Eigen::VectorXd& X);

/// -b(r) with b_i = (1/N)[2 phi(r_1i) r_1i + sum_{j != i}(phi(r_1j) r_1j +
/// phi(r_ji) r_ji)]; satisfies b(r) = A grad_r H(r).
Eigen::VectorXd drift_relative(const RelativeFrame& frame, const Potential& p,
                               const Eigen::VectorXd& r);

enum class Layout { FullSpace, Relative, YCoords };

struct InitialCondition {
  enum class Kind { Point, Gaussian, StationaryBootstrap };
  Kind kind = Kind::Gaussian;
  Eigen::VectorXd x0;     // Point: full state in the simulated layout
  Eigen::VectorXd mean;   // Gaussian
  double sigma = 1.0;     // Gaussian: isotropic std dev
  double bootstrap_burn_in = 20.0;  // used when no exact sampler exists

  static InitialCondition point(Eigen::VectorXd x);
  static InitialCondition gaussian(Eigen::VectorXd mean, double sigma);
  static InitialCondition stationary_bootstrap(double burn_in = 20.0);
};

struct SystemSpec {
  int N = 2;
  int d = 1;
  Potential potential = Potential::pure_power(2.0);
  double dt = 1e-2;
  double T = 1.0;
  int n_paths = 1;
  InitialCondition initial;
  std::uint64_t seed = 0;
  double moment_s = 4.0;             // the s of the initial-moment condition
  std::vector<double> snapshot_times;  // empty: snapshot every step
  bool zero_noise = false;           // test hook
  int threads = 1;

  void validate() const;  // throws ConfigError
};

/// Immutable once constructed. states are stored path-major:
/// data[(path * n_times + time) * dim + component].
struct Ensemble {
  Layout layout = Layout::Relative;
  int N = 0, d = 0;
  int dim = 0;                 // state dimension in this layout
  std::vector<double> times;
  std::vector<double> data;
  int n_paths = 0;
  std::uint64_t seed = 0;
  double dt = 0;               // integrator step used to produce it
  std::vector<int> diverged_at;  // first bad step per path, -1 if none
  int divergence_count = 0;

  Eigen::Map<const Eigen::VectorXd> state(int path, int time_index) const {
    return {data.data() + (static_cast<std::size_t>(path) * times.size() + time_index) * dim,
            dim};
  }
  int time_index(double t, double tol = 1e-9) const;  // DomainError if absent
};

/// Euler-Maruyama. FullSpace integrates the N-particle system with
/// independent per-particle Brownian motions; Relative integrates
/// dr = -b(r) dt + S dW; YCoords integrates dY = -grad_Y H(SY) dt + dW.
/// Bitwise reproducible given (seed, path index), independent of `threads`.
Ensemble simulate(const SystemSpec& spec, Layout layout);

// Exact linear coordinate changes (full -> relative loses the center).
Eigen::VectorXd full_to_relative(int N, int d, const Eigen::VectorXd& X);
Eigen::VectorXd relative_to_Y(const RelativeFrame& frame, const Eigen::VectorXd& r);
Eigen::VectorXd Y_to_relative(const RelativeFrame& frame, const Eigen::VectorXd& y);

/// Maps every snapshot of a FullSpace ensemble to relative coordinates.
Ensemble to_relative(const Ensemble& full, const RelativeFrame& frame);

/// Exact Gaussian sampler for the stationary relative law when Phi = c r^2
/// (quadratic family); empty otherwise.
std::optional<Eigen::MatrixXd> stationary_gaussian_cov(const Potential& p, int N, int d);

}  // namespace ipslab
