#include "ipslab/pdkernels.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ipslab/rng.hpp"

namespace ipslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Kernel k_inner_product() {
  return {[](const VectorXd& u, const VectorXd& v) { return u.dot(v); },
          "inner-product", Kernel::Domain::RealSpace};
}

Kernel k_rank_one(std::function<double(const VectorXd&)> f) {
  return {[f = std::move(f)](const VectorXd& u, const VectorXd& v) {
            return f(u) * f(v);
          },
          "rank-one", Kernel::Domain::RealSpace};
}

Kernel k_radial(std::function<double(double)> g, std::string name) {
  return {[g = std::move(g)](const VectorXd& u, const VectorXd& v) {
            return g((u - v).norm());
          },
          "radial(" + name + ")", Kernel::Domain::RealSpace};
}

Kernel k_sum(const Kernel& k1, const Kernel& k2, double c1, double c2) {
  return {[e1 = k1.eval, e2 = k2.eval, c1, c2](const VectorXd& u, const VectorXd& v) {
            return c1 * e1(u, v) + c2 * e2(u, v);
          },
          "sum(" + k1.provenance + "," + k2.provenance + ")", k1.domain};
}

Kernel k_product(const Kernel& k1, const Kernel& k2) {
  return {[e1 = k1.eval, e2 = k2.eval](const VectorXd& u, const VectorXd& v) {
            return e1(u, v) * e2(u, v);
          },
          "product(" + k1.provenance + "," + k2.provenance + ")", k1.domain};
}

Kernel k_exp(const Kernel& k, double scale) {
  return {[e = k.eval, scale](const VectorXd& u, const VectorXd& v) {
            return std::exp(scale * e(u, v));
          },
          "exp(" + k.provenance + ")", k.domain};
}

Kernel k_pullback(const Kernel& k, std::function<VectorXd(const VectorXd&)> f) {
  return {[e = k.eval, f = std::move(f)](const VectorXd& u, const VectorXd& v) {
            return e(f(u), f(v));
          },
          "pullback(" + k.provenance + ")", Kernel::Domain::RealSpace};
}

Kernel k_half_line(std::function<double(double, double)> g, std::string name) {
  return {[g = std::move(g)](const VectorXd& u, const VectorXd& v) {
            return g(u[0], v[0]);
          },
          name, Kernel::Domain::HalfLine};
}

MatrixXd gram(const Kernel& k, const std::vector<VectorXd>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 1) throw DomainError("gram: need at least one point");
  MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double gij = k(points[i], points[j]);
      const double gji = i == j ? gij : k(points[j], points[i]);
      if (!std::isfinite(gij) || !std::isfinite(gji)) {
        std::ostringstream os;
        os << "gram: kernel evaluation not finite at pair (" << i << "," << j << ")";
        throw NumericError(os.str());
      }
      const double scale = std::max({1.0, std::abs(gij), std::abs(gji)});
      if (std::abs(gij - gji) > 1e-10 * scale) {
        std::ostringstream os;
        os << "gram: asymmetric kernel at pair (" << i << "," << j << "): " << gij
           << " vs " << gji;
        throw DomainError(os.str());
      }
      G(i, j) = G(j, i) = 0.5 * (gij + gji);
    }
  return G;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pd: return "pd";
    case Verdict::psd: return "psd";
    case Verdict::nd: return "nd";
    case Verdict::indefinite: return "indefinite";
  }
  return "?";
}

namespace {

std::vector<VectorXd> draw_points(Kernel::Domain domain, int d, int n,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<VectorXd> pts(n);
  for (int i = 0; i < n; ++i) {
    VectorXd x(domain == Kernel::Domain::HalfLine ? 1 : d);
    for (int j = 0; j < x.size(); ++j) x[j] = normal(rng);
    if (domain == Kernel::Domain::HalfLine) x[0] = std::abs(x[0]);
    pts[i] = std::move(x);
  }
  return pts;
}

// Rows form an orthonormal basis of the zero-sum subspace {c : sum c_j = 0}.
MatrixXd helmert_basis(int n) {
  MatrixXd B = MatrixXd::Zero(n - 1, n);
  for (int k = 1; k < n; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int j = 0; j < k; ++j) B(k - 1, j) = s;
    B(k - 1, k) = -k * s;
  }
  return B;
}

}  // namespace

GramReport test_pd(const Kernel& k, int d, int n, int trials, std::uint64_t seed) {
  if (n < 2) throw DomainError("test_pd: n must be >= 2");
  if (trials < 1) throw DomainError("test_pd: trials must be >= 1");
  GramReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.seed = seed;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  double worst_tol = 0;
  for (int t = 0; t < trials; ++t) {
    auto rng = make_stream(seed, t);
    auto pts = draw_points(k.domain, d, n, rng);
    MatrixXd G = gram(k, pts);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double mn = es.eigenvalues().minCoeff();
    const double tol = 1e-9 * n * G.cwiseAbs().maxCoeff();
    if (mn < rep.min_eigenvalue) {
      rep.min_eigenvalue = mn;
      rep.points = pts;
      worst_tol = tol;
    }
  }
  rep.tol = worst_tol;
  rep.verdict = rep.min_eigenvalue > -rep.tol ? Verdict::pd : Verdict::indefinite;
  return rep;
}

GramReport test_nd(const Kernel& k, int d, int n, int trials, std::uint64_t seed) {
  if (n < 2) throw DomainError("test_nd: n must be >= 2");
  if (trials < 1) throw DomainError("test_nd: trials must be >= 1");
  GramReport rep;
  rep.n = n;
  rep.trials = trials;
  rep.seed = seed;
  rep.max_zero_sum_eigenvalue = -std::numeric_limits<double>::infinity();
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  const MatrixXd B = helmert_basis(n);
  double worst_tol = 0;
  for (int t = 0; t < trials; ++t) {
    auto rng = make_stream(seed, t);
    auto pts = draw_points(k.domain, d, n, rng);
    MatrixXd G = gram(k, pts);
    MatrixXd P = B * G * B.transpose();  // quadratic form on the zero-sum subspace
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(P, Eigen::EigenvaluesOnly);
    const double mx = es.eigenvalues().maxCoeff();
    const double tol = 1e-9 * n * std::max(1e-300, G.cwiseAbs().maxCoeff());
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
    if (mx > rep.max_zero_sum_eigenvalue) {
      rep.max_zero_sum_eigenvalue = mx;
      rep.points = pts;
      worst_tol = tol;
    }
  }
  rep.tol = worst_tol;
  rep.verdict =
      rep.max_zero_sum_eigenvalue <= rep.tol ? Verdict::nd : Verdict::indefinite;
  return rep;
}

Kernel transform_triangle(const Kernel& psi, const VectorXd& x0) {
  return {[e = psi.eval, x0](const VectorXd& u, const VectorXd& v) {
            return e(u, x0) + e(v, x0) - e(u, v);
          },
          "triangle(" + psi.provenance + ")", psi.domain};
}

Kernel transform_box(const Kernel& psi, const VectorXd& x0) {
  return {[e = psi.eval, x0](const VectorXd& u, const VectorXd& v) {
            return e(u, x0) + e(v, x0) - e(u, v) - e(x0, x0);
          },
          "box(" + psi.provenance + ")", psi.domain};
}

SchoenbergReport schoenberg_check(const Kernel& psi, const std::vector<double>& t_list,
                                  int d, int n, int trials, std::uint64_t seed) {
  SchoenbergReport out;
  out.t_list = t_list;
  out.all_pd = true;
  for (double t : t_list) {
    if (t <= 0) throw DomainError("schoenberg_check: t must be > 0");
    Kernel kt = k_exp(psi, -t);
    kt.provenance = "exp(-" + std::to_string(t) + " * " + psi.provenance + ")";
    out.reports.push_back(test_pd(kt, d, n, trials, seed));
    out.all_pd = out.all_pd && out.reports.back().verdict == Verdict::pd;
  }
  return out;
}

std::pair<Kernel, Kernel> power_and_log(const Kernel& psi, double alpha) {
  if (alpha <= 0 || alpha >= 1)
    throw DomainError("power_and_log: alpha must be in (0,1)");
  Kernel pw{[e = psi.eval, alpha](const VectorXd& u, const VectorXd& v) {
              const double val = e(u, v);
              if (val < 0)
                throw DomainError(
                    "power_and_log: psi < 0 encountered under non-integer power");
              return std::pow(val, alpha);
            },
            "power-" + std::to_string(alpha) + "(" + psi.provenance + ")",
            psi.domain};
  Kernel lg{[e = psi.eval](const VectorXd& u, const VectorXd& v) {
              const double val = e(u, v);
              if (val <= -1) throw DomainError("power_and_log: log(1+psi) undefined");
              return std::log1p(val);
            },
            "log1p(" + psi.provenance + ")", psi.domain};
  return {std::move(pw), std::move(lg)};
}

namespace {

// Adaptive Simpson with absolute/relative tolerance on [a,b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double fa, double fm, double fb, double tol, int depth,
                        bool& converged) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15 * tol) return left + right + delta / 15;
  if (depth <= 0) {
    converged = false;
    return left + right;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2, depth - 1, converged) +
         adaptive_simpson(f, m, b, fm, frm, fb, tol / 2, depth - 1, converged);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol, int max_depth, bool& converged) {
  const double m = 0.5 * (a + b);
  return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, max_depth, converged);
}

}  // namespace

double gamma_representation(double z, double g, const QuadratureSpec& q) {
  if (z <= 0) throw DomainError("gamma_representation: z must be > 0");
  if (g <= 0 || g >= 1) throw DomainError("gamma_representation: gamma must be in (0,1)");
  // Substitute lambda = e^s: the integrand (1 - e^{-z e^s}) e^{-g s} decays
  // like z e^{(1-g)s} to the left and e^{-g s} to the right. Window chosen so
  // both tails are below 1e-14 relative.
  auto integrand = [&](double s) {
    const double lam = std::exp(s);
    return -std::expm1(-lam * z) * std::exp(-g * s);
  };
  const double s_lo = std::min((std::log(1e-15) - std::log(z)) / (1 - g), 0.0);
  const double s_hi = -std::log(1e-15) / g;
  bool converged = true;
  const double tol = q.rel_tol * std::pow(z, g);
  // Split at lambda = 1 (s = 0): the integrand changes character there.
  const double core = integrate(integrand, s_lo, 0, tol / 2, q.max_depth, converged);
  const double tail = integrate(integrand, 0, s_hi, tol / 2, q.max_depth, converged);
  const double cg = g / std::tgamma(1 - g);
  const double value = cg * (core + tail);
  if (!converged) {
    std::ostringstream os;
    os << "gamma_representation: quadrature not converged (estimate " << value
       << ", target tol " << tol << ")";
    throw NumericError(os.str());
  }
  return value;
}

MetricReport metric_check(const Kernel& psi, const std::vector<VectorXd>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw DomainError("metric_check: need at least 3 points");
  MatrixXd G = gram(psi, points);
  int zero_off_diag = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(G(i, j)) < 1e-14) ++zero_off_diag;
  if (zero_off_diag > 0)
    throw DomainError("metric_check: psi vanishes off the diagonal (" +
                      std::to_string(zero_off_diag) + " pairs); zero set too large");
  for (int i = 0; i < n; ++i)
    if (G(i, i) < -1e-14 || std::abs(G(i, i)) > 1e-12)
      throw DomainError("metric_check: psi(x,x) must vanish");

  MetricReport rep;
  rep.worst_violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        const double dik = std::sqrt(std::max(0.0, G(i, k)));
        const double dij = std::sqrt(std::max(0.0, G(i, j)));
        const double djk = std::sqrt(std::max(0.0, G(j, k)));
        const double viol = dik - dij - djk;
        ++rep.triples_checked;
        if (viol > rep.worst_violation) {
          rep.worst_violation = viol;
          rep.worst_triple = {points[i], points[j], points[k]};
        }
      }
  rep.ok = rep.worst_violation <= 1e-12;
  return rep;
}

}  // namespace ipslab
