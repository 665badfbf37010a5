#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "ipslab/errors.hpp"

namespace ipslab {

/// User-supplied radial function with its derivative. The second derivative
/// is optional; when absent it is approximated by central differences on
/// `deriv`.
struct RadialFunction {
  std::function<double(double)> value;
  std::function<double(double)> deriv;
  std::function<double(double)> deriv2;  // may be empty
};

enum class PotentialFamily { PowerShifted, PurePower, Composite };

/// Radial interaction potential Phi. The derived interaction kernel is
/// phi(r) = Phi'(r)/r; all derivatives are analytic, never finite-differenced.
class Potential {
public:
  /// Phi(r) = (a + r^theta)^gamma, a >= 0, theta in (0,2].
  /// gamma in (0,1] in general; gamma >= 1 is additionally accepted when
  /// theta == 2 (the uniformly-convex shifted family).
  static Potential power_shifted(double a, double theta, double gamma);

  /// Phi(r) = r^gamma, gamma > 0.
  static Potential pure_power(double gamma);

  /// Phi = c1 * base + c2 * psi with a user-supplied radial psi whose
  /// negative definiteness (as psi(|u-v|)) is verified by sampling at
  /// construction; throws DomainError if the check refutes it.
  static Potential composite(double c1, const Potential& base, double c2,
                             RadialFunction psi);

  double value(double r) const;   // Phi(r)
  double deriv(double r) const;   // Phi'(r)
  double phi(double r) const;     // Phi'(r)/r; throws DomainError where singular
  double phi_deriv(double r) const;

  /// phi(|dx|) * dx, extended by continuity at dx = 0 when the limit of
  /// phi(r) r is 0; throws NumericError otherwise.
  Eigen::VectorXd phi_times(const Eigen::VectorXd& dx) const;

  /// Hess_x Phi(|x|) = phi'(|x|) (x x^T)/|x| + phi(|x|) I_d. Throws
  /// DomainError at x = 0.
  Eigen::MatrixXd hessian_radial(const Eigen::VectorXd& x) const;

  PotentialFamily family() const { return family_; }
  double a() const { return a_; }
  double theta() const { return theta_; }
  double gamma() const { return gamma_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }

  /// True iff theta in (1,2] and theta*gamma > 1 (or theta=2, gamma=1).
  bool ergodic_admissible() const;

  /// True iff lim_{r->0} phi(r) r = 0, so the drift extends to coincident
  /// particles.
  bool phi_times_r_vanishes_at_zero() const;

  std::string describe() const;

private:
  Potential() = default;

  PotentialFamily family_ = PotentialFamily::PurePower;
  double a_ = 0, theta_ = 0, gamma_ = 0;
  // Composite pieces
  double c1_ = 0, c2_ = 0;
  std::shared_ptr<const Potential> base_;
  RadialFunction psi_;
};

enum class CertifyMethod { Analytic, NumericScan };

/// Witnessed constants for the two ergodicity conditions: the radial growth
/// bound phi(r) r^2 >= c1 r^beta - c0 and the curvature bound
/// Hess Phi >= c3 (1+r)^(alpha-2) I.
struct AdmissibilityCertificate {
  bool growth_pass = false;
  bool hessian_pass = false;
  bool pass = false;
  double beta = 0;
  double c1_growth = 0;
  double c0_growth = 0;
  double alpha = 0;
  double c3 = 0;
  CertifyMethod method = CertifyMethod::Analytic;
  std::optional<double> witness_r;  // a grid point violating a condition
};

/// Closed-form families are certified analytically; Composite (or
/// force_numeric) runs a log-spaced grid scan over r in [1e-6, 1e6]. The
/// scan is a soundness check, not a proof: it can only refute on the grid.
AdmissibilityCertificate certify(const Potential& p, bool force_numeric = false);

}  // namespace ipslab
