#include "ipslab/learn.hpp"

#include <cmath>

#include "ipslab/errors.hpp"

namespace ipslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Columns are the candidate drifts F_b evaluated at one state: the drift the
// system would have if the kernel were psi_b.
MatrixXd candidate_drifts_full(const HypothesisSpace& hs, int N, int d,
                               const VectorXd& X) {
  MatrixXd F = MatrixXd::Zero(N * d, hs.n());
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      const VectorXd diff = X.segment(j * d, d) - X.segment(i * d, d);
      const VectorXd psi = hs.eval_all(diff.norm());
      const MatrixXd contrib = diff * psi.transpose() / N;
      F.middleRows(i * d, d) += contrib;
      F.middleRows(j * d, d) -= contrib;
    }
  return F;
}

MatrixXd candidate_drifts_relative(const HypothesisSpace& hs, int N, int d,
                                   const VectorXd& r) {
  const int m = N - 1;
  MatrixXd own = MatrixXd::Zero(d, hs.n());
  for (int j = 0; j < m; ++j) {
    const VectorXd rj = r.segment(j * d, d);
    own += rj * hs.eval_all(rj.norm()).transpose();
  }
  MatrixXd F = MatrixXd::Zero(m * d, hs.n());
  for (int i = 0; i < m; ++i) {
    const VectorXd ri = r.segment(i * d, d);
    MatrixXd bi = ri * hs.eval_all(ri.norm()).transpose() + own;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const VectorXd diff = ri - r.segment(j * d, d);
      bi += diff * hs.eval_all(diff.norm()).transpose();
    }
    F.middleRows(i * d, d) = -bi / N;
  }
  return F;
}

}  // namespace

RegressionProblem assemble(const Ensemble& ens, const HypothesisSpace& hs,
                           double t0, double t1) {
  if (ens.layout == Layout::YCoords)
    throw DomainError("assemble: Y-coordinate ensembles are not supported");
  if (ens.times.size() < 2)
    throw DomainError("assemble: need at least two snapshots");
  if (t1 < 0) t1 = ens.times.back();
  if (!(t0 <= t1)) throw DomainError("assemble: empty time window");

  const int n = hs.n();
  RegressionProblem prob;
  prob.n = n;
  prob.A = MatrixXd::Zero(n, n);
  prob.b = VectorXd::Zero(n);

  const RelativeFrame frame =
      ens.layout == Layout::Relative ? build_frame(ens.N, ens.d) : RelativeFrame{};

  for (int pth = 0; pth < ens.n_paths; ++pth) {
    for (std::size_t k = 0; k + 1 < ens.times.size(); ++k) {
      if (ens.times[k] < t0 - 1e-12 || ens.times[k + 1] > t1 + 1e-12) continue;
      if (ens.diverged_at[pth] >= 0 &&
          ens.diverged_at[pth] * ens.dt <= ens.times[k + 1] + 1e-12)
        break;
      const double dt = ens.times[k + 1] - ens.times[k];
      const VectorXd x = ens.state(pth, static_cast<int>(k));
      const VectorXd dx =
          ens.state(pth, static_cast<int>(k + 1)).eval() - x;
      if (!x.allFinite() || !dx.allFinite()) continue;
      MatrixXd F;
      if (ens.layout == Layout::FullSpace) {
        F = candidate_drifts_full(hs, ens.N, ens.d, x);
        prob.A.noalias() += dt * dt * F.transpose() * F;
        prob.b.noalias() += dt * F.transpose() * dx;
      } else {
        // Relative noise is S dW; whitening by S^{-1} restores the isotropic
        // least-squares geometry.
        F = frame.S_inv * candidate_drifts_relative(hs, ens.N, ens.d, x);
        const VectorXd wdx = frame.S_inv * dx;
        prob.A.noalias() += dt * dt * F.transpose() * F;
        prob.b.noalias() += dt * F.transpose() * wdx;
      }
      ++prob.rows;
    }
  }
  if (prob.rows == 0) throw DomainError("assemble: no usable increments");
  return prob;
}

RegressionProblem merge(const RegressionProblem& a, const RegressionProblem& b) {
  if (a.n != b.n) throw DomainError("merge: basis size mismatch");
  RegressionProblem out;
  out.n = a.n;
  out.A = a.A + b.A;
  out.b = a.b + b.b;
  out.rows = a.rows + b.rows;
  out.reg = std::max(a.reg, b.reg);
  return out;
}

LearnResult solve_and_report(const RegressionProblem& prob,
                             const HypothesisSpace& hs, double reg,
                             const std::function<double(double)>& true_phi,
                             const std::vector<double>& rho_samples) {
  if (prob.n != hs.n())
    throw DomainError("solve_and_report: space does not match the problem");
  if (reg < 0) reg = 1e-10 * prob.A.trace() / prob.n;
  MatrixXd A = prob.A + reg * MatrixXd::Identity(prob.n, prob.n);
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("solve_and_report: normal matrix factorization failed");
  LearnResult res;
  res.coeffs = ldlt.solve(prob.b);
  res.reg_used = reg;
  if (!res.coeffs.allFinite())
    throw NumericError("solve_and_report: non-finite solution");
  if (true_phi && !rho_samples.empty()) {
    double acc = 0;
    for (double r : rho_samples) {
      const double diff = hs.combine(res.coeffs, r) - true_phi(r);
      acc += diff * diff;
    }
    res.l2_rho_error = std::sqrt(acc / rho_samples.size());
  }
  return res;
}

}  // namespace ipslab
