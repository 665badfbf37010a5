#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ipslab/errors.hpp"

namespace ipslab {

/// Symmetric real kernel on R^d x R^d or on [0,inf) x [0,inf). Symmetry is
/// asserted by the test harness, not assumed.
struct Kernel {
  enum class Domain { RealSpace, HalfLine };

  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> eval;
  std::string provenance;
  Domain domain = Domain::RealSpace;

  double operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return eval(x, y);
  }
};

// --- constructors ---------------------------------------------------------

Kernel k_inner_product();                       // <u,v>
Kernel k_rank_one(std::function<double(const Eigen::VectorXd&)> f);
Kernel k_radial(std::function<double(double)> g, std::string name);  // g(|u-v|)
Kernel k_sum(const Kernel& k1, const Kernel& k2, double c1 = 1, double c2 = 1);
Kernel k_product(const Kernel& k1, const Kernel& k2);
Kernel k_exp(const Kernel& k, double scale = 1);  // exp(scale * k)
Kernel k_pullback(const Kernel& k,
                  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f);
Kernel k_half_line(std::function<double(double, double)> g, std::string name);

// --- Gram machinery -------------------------------------------------------

/// G[i][j] = k(x_i, x_j), symmetrized by (G+G^T)/2. Relative asymmetry above
/// 1e-10 is a DomainError naming the offending pair.
Eigen::MatrixXd gram(const Kernel& k, const std::vector<Eigen::VectorXd>& points);

enum class Verdict { pd, psd, nd, indefinite };

struct GramReport {
  int n = 0;
  int trials = 0;
  double min_eigenvalue = 0;           // over all trials (full spectrum)
  double max_zero_sum_eigenvalue = 0;  // over all trials, zero-sum subspace
  Verdict verdict = Verdict::indefinite;
  std::vector<Eigen::VectorXd> points;  // point set of the worst trial
  std::uint64_t seed = 0;
  double tol = 0;
};

const char* verdict_name(Verdict v);

/// Randomized refutation test for positive definiteness: `trials` Gaussian
/// point sets of size n (|Gaussian| on half-line domains), verdict pd iff the
/// minimum Gram eigenvalue across trials exceeds -tol, tol = 1e-9 n max|G|.
GramReport test_pd(const Kernel& k, int d, int n, int trials, std::uint64_t seed);

/// Negative definiteness restricted to zero-sum coefficients: the Gram
/// quadratic form is projected onto {c : sum c_j = 0} by an explicit
/// Helmert-style orthonormal basis and its maximum eigenvalue must be <= tol.
GramReport test_nd(const Kernel& k, int d, int n, int trials, std::uint64_t seed);

// --- transforms (negative -> positive definite) ---------------------------

/// psi(x,x0) + psi(y,x0) - psi(x,y)
Kernel transform_triangle(const Kernel& psi, const Eigen::VectorXd& x0);
/// psi(x,x0) + psi(y,x0) - psi(x,y) - psi(x0,x0)
Kernel transform_box(const Kernel& psi, const Eigen::VectorXd& x0);

struct SchoenbergReport {
  std::vector<double> t_list;
  std::vector<GramReport> reports;
  bool all_pd = false;
};

/// Checks that exp(-t psi) is pd for each listed t > 0.
SchoenbergReport schoenberg_check(const Kernel& psi, const std::vector<double>& t_list,
                                  int d, int n, int trials, std::uint64_t seed);

/// (psi^alpha, log(1+psi)) for alpha in (0,1); both stay negative definite
/// when psi is nd with psi(x,x) >= 0. Evaluating psi^alpha at a point where
/// psi < 0 throws DomainError.
std::pair<Kernel, Kernel> power_and_log(const Kernel& psi, double alpha);

// --- quadrature identity --------------------------------------------------

struct QuadratureSpec {
  double rel_tol = 1e-9;
  int max_depth = 40;
};

/// Evaluates (gamma/Gamma(1-gamma)) Int_0^inf (1 - e^{-lambda z})
/// lambda^{-gamma-1} dlambda, which equals z^gamma for z > 0, gamma in (0,1).
/// Adaptive quadrature split at lambda = 1 with substitution lambda = e^s;
/// throws NumericError (carrying the achieved estimate) on non-convergence.
double gamma_representation(double z, double gamma, const QuadratureSpec& q = {});

// --- metric check ---------------------------------------------------------

struct MetricReport {
  bool ok = false;
  int triples_checked = 0;
  double worst_violation = 0;  // max over triples of d(x,z) - d(x,y) - d(y,z)
  std::vector<Eigen::VectorXd> worst_triple;
};

/// Asserts the triangle inequality of sqrt(psi) on all triples from `points`,
/// with 1e-12 slack. Throws DomainError if psi(x,y)=0 off the diagonal on
/// the samples (degenerate zero set).
MetricReport metric_check(const Kernel& psi, const std::vector<Eigen::VectorXd>& points);

}  // namespace ipslab
