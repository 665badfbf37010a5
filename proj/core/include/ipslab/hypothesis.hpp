#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "ipslab/errors.hpp"

namespace ipslab {

/// Finite basis of bounded radial functions on [0, R_max].
class HypothesisSpace {
public:
  /// n piecewise-linear hats on the uniform knot grid of [0, R_max].
  static HypothesisSpace hats(int n, double R_max);
  /// The single constant function 1 on [0, R_max].
  static HypothesisSpace constant(double R_max);
  static HypothesisSpace custom(std::vector<std::function<double(double)>> basis,
                                double R_max, std::vector<std::string> names = {});

  int n() const { return static_cast<int>(basis_.size()); }
  double R_max() const { return R_max_; }
  double eval(int i, double r) const;
  Eigen::VectorXd eval_all(double r) const;
  /// h = sum_i c_i psi_i evaluated at r.
  double combine(const Eigen::VectorXd& c, double r) const;
  /// sup-norm of sum c_i psi_i on a uniform evaluation grid.
  double sup_norm(const Eigen::VectorXd& c, int grid_points = 10000) const;
  const std::vector<double>& basis_sup_norms() const { return sup_norms_; }
  const std::string& name(int i) const { return names_[i]; }

  /// L2([0,R_max]) Gram condition check; throws DomainError when the basis is
  /// numerically dependent (condition beyond 1e10).
  void check_independent() const;

private:
  std::vector<std::function<double(double)>> basis_;
  std::vector<double> sup_norms_;
  std::vector<std::string> names_;
  double R_max_ = 1;
};

}  // namespace ipslab
