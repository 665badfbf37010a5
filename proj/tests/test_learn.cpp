#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ipslab/learn.hpp"
#include "ipslab/rng.hpp"

using namespace ipslab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Relative drift -b(r) of the interaction kernel psi in d = 1; the oracle the
// estimator has to match when increments are noiseless.
VectorXd drift_of_kernel(int N, const VectorXd& r,
                         const std::function<double(double)>& psi) {
  const int m = N - 1;
  VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    double acc = 2 * psi(std::abs(r[i])) * r[i];
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const double rji = r[i] - r[j];
      acc += psi(std::abs(r[j])) * r[j] + psi(std::abs(rji)) * rji;
    }
    out[i] = -acc / N;
  }
  return out;
}

// Noiseless Euler ensemble of the relative system driven by psi.
Ensemble manufactured_ensemble(int N, const std::function<double(double)>& psi,
                               int n_paths, int n_steps, double dt,
                               std::uint64_t seed) {
  const int m = N - 1;
  Ensemble ens;
  ens.layout = Layout::Relative;
  ens.N = N;
  ens.d = 1;
  ens.dim = m;
  ens.n_paths = n_paths;
  ens.seed = seed;
  ens.dt = dt;
  ens.diverged_at.assign(n_paths, -1);
  for (int s = 0; s <= n_steps; ++s) ens.times.push_back(s * dt);
  ens.data.resize(static_cast<std::size_t>(n_paths) * (n_steps + 1) * m);
  auto rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(-1.2, 1.2);
  for (int pth = 0; pth < n_paths; ++pth) {
    VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = unif(rng);
    for (int s = 0; s <= n_steps; ++s) {
      Eigen::Map<VectorXd>(
          ens.data.data() +
              (static_cast<std::size_t>(pth) * (n_steps + 1) + s) * m,
          m) = x;
      x += dt * drift_of_kernel(N, x, psi);
    }
  }
  return ens;
}

HypothesisSpace smooth_space() {
  return HypothesisSpace::custom(
      {[](double) { return 1.0; }, [](double r) { return r * r; },
       [](double r) { return std::exp(-r); }},
      5.0, {"one", "r2", "exp"});
}

}  // namespace

TEST_CASE("exact recovery of in-span kernels from noiseless increments") {
  const auto hs = smooth_space();
  auto rng = make_stream(91, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd c(3);
    for (int i = 0; i < 3; ++i) c[i] = normal(rng);
    auto psi = [&hs, c](double r) { return hs.combine(c, r); };
    const Ensemble ens = manufactured_ensemble(4, psi, 20, 5, 1e-3, 7 + trial);
    RegressionProblem prob = assemble(ens, hs, 0.0, -1.0);
    CHECK(prob.n == 3);
    CHECK(prob.rows > 0);
    const LearnResult res = solve_and_report(prob, hs, 0.0);
    CHECK((res.coeffs - c).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("merge adds normal systems") {
  const auto hs = smooth_space();
  auto psi = [](double r) { return 1.0 + 0.5 * r * r; };
  const Ensemble e1 = manufactured_ensemble(3, psi, 10, 4, 1e-3, 1);
  const Ensemble e2 = manufactured_ensemble(3, psi, 14, 4, 1e-3, 2);
  const RegressionProblem p1 = assemble(e1, hs, 0.0, -1.0);
  const RegressionProblem p2 = assemble(e2, hs, 0.0, -1.0);
  const RegressionProblem m = merge(p1, p2);
  CHECK((m.A - (p1.A + p2.A)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.b - (p1.b + p2.b)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.rows == p1.rows + p2.rows);

  RegressionProblem wrong;
  wrong.A = MatrixXd::Identity(2, 2);
  wrong.b = VectorXd::Zero(2);
  wrong.n = 2;
  CHECK_THROWS_AS(merge(p1, wrong), DomainError);
}

TEST_CASE("heavy ridge shrinks the solution toward zero") {
  const auto hs = smooth_space();
  auto psi = [](double r) { return 2.0 - r; };
  const Ensemble ens = manufactured_ensemble(3, psi, 20, 5, 1e-3, 9);
  const RegressionProblem prob = assemble(ens, hs, 0.0, -1.0);
  const LearnResult plain = solve_and_report(prob, hs, 0.0);
  const double big = 1e6 * prob.A.trace();
  const LearnResult ridged = solve_and_report(prob, hs, big);
  CHECK(ridged.coeffs.norm() < 1e-4 * plain.coeffs.norm());
  CHECK(ridged.reg_used == doctest::Approx(big));

  // Default regularization is tiny relative to the spectrum.
  const LearnResult def = solve_and_report(prob, hs);
  CHECK(def.reg_used == doctest::Approx(1e-10 * prob.A.trace() / prob.n));
  CHECK((def.coeffs - plain.coeffs).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("empty observation window is a domain error") {
  const auto hs = smooth_space();
  auto psi = [](double r) { return 1.0 + r; };
  const Ensemble ens = manufactured_ensemble(3, psi, 5, 4, 1e-3, 3);
  CHECK_THROWS_AS(assemble(ens, hs, 100.0, 200.0), DomainError);
}

TEST_CASE("Y-coordinate ensembles are rejected") {
  SystemSpec spec;
  spec.N = 3;
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);
  spec.dt = 0.01;
  spec.T = 0.1;
  spec.n_paths = 5;
  spec.initial = InitialCondition::point(VectorXd::Zero(2));
  const Ensemble y = simulate(spec, Layout::YCoords);
  CHECK_THROWS_AS(assemble(y, smooth_space(), 0.0, -1.0), DomainError);
}

TEST_CASE("noisy OU simulation recovers the constant kernel phi = 2") {
  SystemSpec spec;
  spec.N = 3;
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);  // phi identically 2
  spec.dt = 0.01;
  spec.T = 2.0;
  spec.n_paths = 1500;
  spec.seed = 404;
  spec.initial = InitialCondition::stationary_bootstrap();
  const Ensemble ens = simulate(spec, Layout::Relative);
  const auto hs = HypothesisSpace::constant(6.0);
  const RegressionProblem prob = assemble(ens, hs, 0.0, -1.0);
  auto truth = [](double) { return 2.0; };
  std::vector<double> rho;
  for (int pth = 0; pth < 500; ++pth)
    rho.push_back(std::abs(ens.state(pth, ens.time_index(2.0))[0]));
  const LearnResult res = solve_and_report(prob, hs, -1, truth, rho);
  CHECK(res.coeffs[0] == doctest::Approx(2.0).epsilon(0.05));
  REQUIRE(res.l2_rho_error.has_value());
  CHECK(*res.l2_rho_error < 0.1);
}

TEST_CASE("full-space and relative assemblies agree on the estimate") {
  SystemSpec spec;
  spec.N = 3;
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);
  spec.dt = 0.01;
  spec.T = 1.0;
  spec.n_paths = 800;
  spec.seed = 17;
  spec.initial = InitialCondition::gaussian(VectorXd::Zero(3), 1.0);
  const Ensemble full = simulate(spec, Layout::FullSpace);
  const auto hs = HypothesisSpace::constant(6.0);
  const RegressionProblem pf = assemble(full, hs, 0.0, -1.0);
  const LearnResult rf = solve_and_report(pf, hs, 0.0);
  CHECK(rf.coeffs[0] == doctest::Approx(2.0).epsilon(0.1));
}
