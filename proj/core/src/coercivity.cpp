#include "ipslab/coercivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ipslab/errors.hpp"
#include "ipslab/rng.hpp"

namespace ipslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kBatches = 20;

struct Accumulator {
  std::vector<MatrixXd> G, M;
  std::vector<double> weight;

  explicit Accumulator(int n) {
    G.assign(kBatches, MatrixXd::Zero(n, n));
    M.assign(kBatches, MatrixXd::Zero(n, n));
    weight.assign(kBatches, 0.0);
  }

  void add(int batch, const VectorXd& pu, const VectorXd& pv, double cosuv,
           double w) {
    G[batch].noalias() +=
        (0.5 * w * cosuv) * (pu * pv.transpose() + pv * pu.transpose());
    M[batch].noalias() +=
        (0.5 * w) * (pu * pu.transpose() + pv * pv.transpose());
    weight[batch] += w;
  }
};

CoercivityReport finalize(const HypothesisSpace& hs, Accumulator& acc,
                          long samples, std::uint64_t seed) {
  const int n = hs.n();
  CoercivityReport rep;
  rep.samples = samples;
  rep.seed = seed;

  double total_w = 0;
  MatrixXd G = MatrixXd::Zero(n, n), M = MatrixXd::Zero(n, n);
  int live = 0;
  for (int b = 0; b < kBatches; ++b) {
    total_w += acc.weight[b];
    G += acc.G[b];
    M += acc.M[b];
    if (acc.weight[b] > 0) {
      acc.G[b] /= acc.weight[b];
      acc.M[b] /= acc.weight[b];
      ++live;
    }
  }
  if (!(total_w > 0)) throw DomainError("coercivity: no usable samples");
  rep.G = G / total_w;
  rep.M = M / total_w;
  rep.low_sample = samples < 1000 || live < kBatches;

  // Batch-mean standard errors per entry.
  rep.G_se = MatrixXd::Zero(n, n);
  rep.M_se = MatrixXd::Zero(n, n);
  if (live >= 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double vg = 0, vm = 0;
        for (int b = 0; b < kBatches; ++b) {
          if (!(acc.weight[b] > 0)) continue;
          vg += std::pow(acc.G[b](i, j) - rep.G(i, j), 2);
          vm += std::pow(acc.M[b](i, j) - rep.M(i, j), 2);
        }
        rep.G_se(i, j) = std::sqrt(vg / (live - 1) / live);
        rep.M_se(i, j) = std::sqrt(vm / (live - 1) / live);
      }
  }

  // Pencil minimum and minimizing direction via Cholesky whitening.
  Eigen::LLT<MatrixXd> llt(rep.M);
  if (llt.info() != Eigen::Success)
    throw NumericError("coercivity: M not positive definite");
  const MatrixXd L = llt.matrixL();
  const MatrixXd W = L.triangularView<Eigen::Lower>().solve(
      L.triangularView<Eigen::Lower>()
          .solve(rep.G.transpose())
          .transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()));
  rep.c_hat = es.eigenvalues().minCoeff();
  int arg = 0;
  es.eigenvalues().minCoeff(&arg);
  rep.c_min = L.transpose()
                  .triangularView<Eigen::Upper>()
                  .solve(es.eigenvectors().col(arg));

  // SE of the Rayleigh quotient at the minimizing direction, batch means.
  std::vector<double> vals;
  for (int b = 0; b < kBatches; ++b) {
    if (!(acc.weight[b] > 0)) continue;
    const double m = rep.c_min.dot(acc.M[b] * rep.c_min);
    if (m > 1e-14) vals.push_back(rep.c_min.dot(acc.G[b] * rep.c_min) / m);
  }
  if (vals.size() >= 2) {
    const double mean =
        std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    rep.c_hat_se = std::sqrt(var / (vals.size() - 1) / vals.size());
  } else {
    rep.low_sample = true;
  }
  return rep;
}

}  // namespace

CoercivityReport estimate_I_infty(
    const HypothesisSpace& hs,
    const std::vector<std::pair<VectorXd, VectorXd>>& uv_samples,
    std::uint64_t seed) {
  if (uv_samples.empty()) throw DomainError("estimate_I_infty: no samples");
  Accumulator acc(hs.n());
  long used = 0;
  const long n = static_cast<long>(uv_samples.size());
  for (long s = 0; s < n; ++s) {
    const auto& [u, v] = uv_samples[s];
    const double nu = u.norm(), nv = v.norm();
    if (!(nu > 0) || !(nv > 0)) continue;
    const int batch = static_cast<int>(s * kBatches / n);
    acc.add(batch, hs.eval_all(nu), hs.eval_all(nv), u.dot(v) / (nu * nv), 1.0);
    ++used;
  }
  return finalize(hs, acc, used, seed);
}

CoercivityReport estimate_I_bar_T(const HypothesisSpace& hs, const Ensemble& ens,
                                  double T) {
  if (ens.layout != Layout::Relative)
    throw DomainError("estimate_I_bar_T: ensemble must be in relative coordinates");
  if (ens.dim < 2 * ens.d)
    throw DomainError("estimate_I_bar_T: need at least two relative coordinates");
  // Trapezoidal time weights over snapshots in [0, T].
  std::vector<int> idx;
  for (std::size_t i = 0; i < ens.times.size(); ++i)
    if (ens.times[i] <= T + 1e-12) idx.push_back(static_cast<int>(i));
  if (idx.empty()) throw DomainError("estimate_I_bar_T: no snapshots in [0, T]");
  std::vector<double> tw(idx.size(), 1.0);
  if (idx.size() >= 2) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double tl = k == 0 ? ens.times[idx[0]] : ens.times[idx[k - 1]];
      const double tr =
          k + 1 == idx.size() ? ens.times[idx.back()] : ens.times[idx[k + 1]];
      tw[k] = 0.5 * (tr - tl);
    }
  }

  Accumulator acc(hs.n());
  long used = 0;
  for (int pth = 0; pth < ens.n_paths; ++pth) {
    const int batch = static_cast<int>(
        static_cast<long>(pth) * kBatches / ens.n_paths);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (ens.diverged_at[pth] >= 0 &&
          ens.diverged_at[pth] * ens.dt <= ens.times[idx[k]] + 1e-12)
        break;
      const auto st = ens.state(pth, idx[k]);
      const VectorXd u = st.head(ens.d), v = st.segment(ens.d, ens.d);
      const double nu = u.norm(), nv = v.norm();
      if (!(nu > 0) || !(nv > 0)) continue;
      acc.add(batch, hs.eval_all(nu), hs.eval_all(nv), u.dot(v) / (nu * nv),
              tw[k]);
      ++used;
    }
  }
  return finalize(hs, acc, used, ens.seed);
}

double coercivity_constant(const MatrixXd& G, const MatrixXd& M) {
  if (G.rows() != G.cols() || M.rows() != M.cols() || G.rows() != M.rows())
    throw DomainError("coercivity_constant: dimension mismatch");
  Eigen::LLT<MatrixXd> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericError("coercivity_constant: M not positive definite");
  const MatrixXd L = llt.matrixL();
  const MatrixXd W = L.triangularView<Eigen::Lower>().solve(
      L.triangularView<Eigen::Lower>().solve(G.transpose()).transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (W + W.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double estimate_S_H(const HypothesisSpace& hs, const CoercivityReport& report,
                    int restarts, std::uint64_t seed) {
  if (!(report.c_hat > 0))
    throw DomainError("estimate_S_H: requires c_hat > 0");
  const int n = hs.n();
  const MatrixXd& G = report.G;
  const MatrixXd& M = report.M;

  // Grid for the sup-norm and its (sub)gradient.
  const int grid_n = 10000;
  std::vector<VectorXd> psi(grid_n);
  for (int g = 0; g < grid_n; ++g)
    psi[g] = hs.eval_all(hs.R_max() * g / (grid_n - 1.0));

  auto objective = [&](const VectorXd& c, int* argmax) {
    double best = 0;
    int bi = 0;
    for (int g = 0; g < grid_n; ++g) {
      const double v = std::abs(c.dot(psi[g]));
      if (v > best) {
        best = v;
        bi = g;
      }
    }
    if (argmax) *argmax = bi;
    const double q = c.dot(G * c);
    if (!(q > 0)) return -1.0;  // outside the coercive cone, reject
    return best * best / q;
  };

  double overall = -1;
  for (int r = 0; r < restarts; ++r) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(r));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = normal(rng);
    const double mn0 = std::sqrt(c.dot(M * c));
    if (!(mn0 > 0)) continue;
    c /= mn0;
    double f = objective(c, nullptr);
    double step = 0.1;
    for (int it = 0; it < 200 && step > 1e-10; ++it) {
      int gi = 0;
      const double sup = [&] {
        double best = 0;
        for (int g = 0; g < grid_n; ++g) {
          const double v = std::abs(c.dot(psi[g]));
          if (v > best) {
            best = v;
            gi = g;
          }
        }
        return best;
      }();
      const double q = c.dot(G * c);
      if (!(q > 0) || !(sup > 0)) break;
      const double sgn = c.dot(psi[gi]) > 0 ? 1.0 : -1.0;
      VectorXd grad =
          (2 * sup * sgn / q) * psi[gi] - (2 * sup * sup / (q * q)) * (G * c);
      VectorXd trial = c + step * grad;
      const double mn = std::sqrt(trial.dot(M * trial));
      if (!(mn > 0)) break;
      trial /= mn;
      const double ft = objective(trial, nullptr);
      if (ft > f) {
        c = trial;
        f = ft;
        step *= 1.2;
      } else {
        step *= 0.5;
      }
    }
    overall = std::max(overall, f);
  }
  if (!(overall > 0) || !std::isfinite(overall))
    throw NumericError("estimate_S_H: optimizer found no positive direction");
  return overall;
}

std::pair<double, double> time_threshold(double S_H, double C, int N,
                                         double kappa) {
  if (!(kappa > 0)) throw DomainError("time_threshold: kappa must be > 0");
  if (!(C > 0)) throw DomainError("time_threshold: C must be > 0");
  if (!(S_H > 0)) throw DomainError("time_threshold: S_H must be > 0");
  if (N < 2) throw DomainError("time_threshold: N must be >= 2");
  const double T_c = std::pow(8.0 * C * N * S_H * S_H, 1.0 / kappa);
  return {T_c, (1.0 + 4.0 * S_H) * T_c};
}

namespace {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * z * p1 - j * p2) / (j + 1);
      }
      pp = n * (z * p0 - p1) / (z * z - 1);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1 - z * z) * pp * pp);
  }
}

}  // namespace

NormStarResult norm_star(const std::function<double(double)>& h, double R_max,
                         double a, double gamma, const NormStarSpec& spec) {
  if (!(R_max > 0)) throw DomainError("norm_star: R_max must be > 0");
  if (!(gamma > 0) || !(gamma < 1))
    throw DomainError("norm_star: gamma must be in (0,1)");
  if (a < 0) throw DomainError("norm_star: a must be >= 0");
  if (spec.k_max < 2) throw DomainError("norm_star: k_max must be >= 2");

  std::vector<double> gx, gw;
  gauss_legendre(spec.radial_points, gx, gw);
  std::vector<double> u(spec.radial_points), hu(spec.radial_points),
      wu(spec.radial_points);
  for (int i = 0; i < spec.radial_points; ++i) {
    u[i] = 0.5 * R_max * (gx[i] + 1.0);
    wu[i] = 0.5 * R_max * gw[i];
    hu[i] = h(u[i]);
  }

  // log k! running; lambda grid shared across k.
  const int nl = spec.lambda_points;
  std::vector<double> s_grid(nl), lam(nl);
  for (int j = 0; j < nl; ++j) {
    s_grid[j] = spec.s_lo + (spec.s_hi - spec.s_lo) * j / (nl - 1.0);
    lam[j] = std::exp(s_grid[j]);
  }
  const double ds = (spec.s_hi - spec.s_lo) / (nl - 1.0);

  NormStarResult res;
  res.terms.assign(spec.k_max, 0.0);
  double log_kfac = 0;
  for (int k = 1; k <= spec.k_max; ++k) {
    log_kfac += std::log(static_cast<double>(k));
    if (k % 2 == 1) continue;  // odd k: the inner integrand is odd, term is 0
    double term = 0;
    for (int j = 0; j < nl; ++j) {
      // Inner integral over R of h(|u|) e^{-lambda u^2} u^k / |u|, which for
      // even k is 2 * Int_0^R h(u) e^{-lambda u^2} u^{k-1} du.
      double inner = 0;
      for (int i = 0; i < spec.radial_points; ++i)
        inner += wu[i] * hu[i] * std::exp(-lam[j] * u[i] * u[i]) *
                 std::pow(u[i], k - 1);
      inner *= 2.0;
      // Integrand of the outer d lambda integral after lambda = e^s, in log
      // form to dodge overflow of (2 lambda)^{k-1}.
      const double log_f = -lam[j] * a + (k - 1) * std::log(2 * lam[j]) +
                           std::log(static_cast<double>(k)) - log_kfac -
                           gamma * s_grid[j];
      const double trap = (j == 0 || j == nl - 1) ? 0.5 : 1.0;
      if (inner != 0)
        term += trap * ds * std::exp(log_f + 2.0 * std::log(std::abs(inner)));
    }
    res.terms[k - 1] = term;
    res.value += term;
  }

  // Tail control from the last two even terms.
  const double t_last = res.terms[spec.k_max % 2 == 0 ? spec.k_max - 1
                                                      : spec.k_max - 2];
  const int prev = (spec.k_max % 2 == 0 ? spec.k_max : spec.k_max - 1) - 2;
  const double t_prev = prev >= 1 ? res.terms[prev - 1] : 0;
  if (t_last > 0 && t_prev > 0) {
    const double ratio = t_last / t_prev;
    if (ratio >= 1)
      throw NumericError(
          "norm_star: series terms not decaying at k_max; increase k_max");
    res.tail_bound = t_last * ratio / (1 - ratio);
  }
  return res;
}

std::vector<std::pair<VectorXd, VectorXd>> sample_stationary_gaussian(
    const Potential& p, int N, int d, long n, std::uint64_t seed) {
  if (N < 3)
    throw DomainError("sample_stationary_gaussian: N must be >= 3 for (u,v)");
  auto cov = stationary_gaussian_cov(p, N, d);
  if (!cov)
    throw DomainError(
        "sample_stationary_gaussian: potential has no Gaussian stationary law");
  Eigen::LLT<MatrixXd> llt(*cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("sample_stationary_gaussian: covariance not SPD");
  const MatrixXd L = llt.matrixL();
  std::vector<std::pair<VectorXd, VectorXd>> out;
  out.reserve(n);
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(cov->rows());
  for (long s = 0; s < n; ++s) {
    for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
    const VectorXd r = L * z;
    out.emplace_back(r.head(d), r.segment(d, d));
  }
  return out;
}

std::vector<std::pair<VectorXd, VectorXd>> samples_from_ensemble(
    const Ensemble& ens, double t_min) {
  if (ens.layout != Layout::Relative)
    throw DomainError("samples_from_ensemble: ensemble must be relative");
  if (ens.dim < 2 * ens.d)
    throw DomainError("samples_from_ensemble: need at least two coordinates");
  std::vector<std::pair<VectorXd, VectorXd>> out;
  for (int pth = 0; pth < ens.n_paths; ++pth)
    for (std::size_t ti = 0; ti < ens.times.size(); ++ti) {
      if (ens.times[ti] < t_min - 1e-12) continue;
      if (ens.diverged_at[pth] >= 0 &&
          ens.diverged_at[pth] * ens.dt <= ens.times[ti] + 1e-12)
        break;
      const auto st = ens.state(pth, static_cast<int>(ti));
      out.emplace_back(st.head(ens.d), st.segment(ens.d, ens.d));
    }
  return out;
}

}  // namespace ipslab
