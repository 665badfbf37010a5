#include "ipslab/hypothesis.hpp"

#include <algorithm>
#include <cmath>

namespace ipslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double grid_sup(const std::function<double(double)>& f, double R_max, int pts) {
  double s = 0;
  for (int i = 0; i < pts; ++i)
    s = std::max(s, std::abs(f(R_max * i / (pts - 1.0))));
  return s;
}

}  // namespace

HypothesisSpace HypothesisSpace::hats(int n, double R_max) {
  if (n < 1) throw DomainError("hats: n must be >= 1");
  if (!(R_max > 0)) throw DomainError("hats: R_max must be > 0");
  std::vector<std::function<double(double)>> basis;
  std::vector<std::string> names;
  // Knots 0 = t_0 < ... < t_{n+1} = R_max; hat i peaks at t_{i+1}.
  const double h = R_max / (n + 1);
  for (int i = 0; i < n; ++i) {
    const double center = (i + 1) * h;
    basis.push_back([center, h](double r) {
      return std::max(0.0, 1.0 - std::abs(r - center) / h);
    });
    names.push_back("hat@" + std::to_string(center));
  }
  return custom(std::move(basis), R_max, std::move(names));
}

HypothesisSpace HypothesisSpace::constant(double R_max) {
  if (!(R_max > 0)) throw DomainError("constant: R_max must be > 0");
  return custom({[](double) { return 1.0; }}, R_max, {"const"});
}

HypothesisSpace HypothesisSpace::custom(
    std::vector<std::function<double(double)>> basis, double R_max,
    std::vector<std::string> names) {
  if (basis.empty()) throw DomainError("hypothesis space: empty basis");
  if (!(R_max > 0)) throw DomainError("hypothesis space: R_max must be > 0");
  HypothesisSpace hs;
  hs.R_max_ = R_max;
  hs.basis_ = std::move(basis);
  if (names.empty())
    for (std::size_t i = 0; i < hs.basis_.size(); ++i)
      names.push_back("basis" + std::to_string(i));
  if (names.size() != hs.basis_.size())
    throw DomainError("hypothesis space: names/basis size mismatch");
  hs.names_ = std::move(names);
  hs.sup_norms_.reserve(hs.basis_.size());
  for (const auto& f : hs.basis_)
    hs.sup_norms_.push_back(grid_sup(f, R_max, 10001));
  return hs;
}

double HypothesisSpace::eval(int i, double r) const {
  if (i < 0 || i >= n()) throw DomainError("hypothesis eval: index out of range");
  if (r < 0 || r > R_max_) return 0.0;
  return basis_[i](r);
}

VectorXd HypothesisSpace::eval_all(double r) const {
  VectorXd v(n());
  if (r < 0 || r > R_max_) return v.setZero();
  for (int i = 0; i < n(); ++i) v[i] = basis_[i](r);
  return v;
}

double HypothesisSpace::combine(const VectorXd& c, double r) const {
  if (c.size() != n()) throw DomainError("combine: coefficient size mismatch");
  return c.dot(eval_all(r));
}

double HypothesisSpace::sup_norm(const VectorXd& c, int grid_points) const {
  if (c.size() != n()) throw DomainError("sup_norm: coefficient size mismatch");
  double s = 0;
  for (int i = 0; i < grid_points; ++i)
    s = std::max(s, std::abs(combine(c, R_max_ * i / (grid_points - 1.0))));
  return s;
}

void HypothesisSpace::check_independent() const {
  // L2 Gram by composite Simpson on a grid fine enough for hat bases.
  const int pts = 4001;
  const double h = R_max_ / (pts - 1);
  MatrixXd G = MatrixXd::Zero(n(), n());
  for (int k = 0; k < pts; ++k) {
    const double w = (k == 0 || k == pts - 1) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const VectorXd v = eval_all(k * h);
    G.noalias() += (w * h / 3.0) * v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double mn = es.eigenvalues().minCoeff();
  const double mx = es.eigenvalues().maxCoeff();
  if (!(mn > 0) || mx / mn > 1e10)
    throw DomainError("hypothesis space: basis numerically dependent (L2 cond > 1e10)");
}

}  // namespace ipslab
