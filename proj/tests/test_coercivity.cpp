#include <doctest.h>

#include <cmath>
#include <random>

#include "ipslab/coercivity.hpp"
#include "ipslab/rng.hpp"

using namespace ipslab;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("coercivity_constant closed cases") {
  MatrixXd M(2, 2);
  M << 2, 0.3, 0.3, 1;
  CHECK(coercivity_constant(M, M) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(coercivity_constant(MatrixXd::Zero(2, 2), M) ==
        doctest::Approx(0.0).epsilon(1e-12));

  MatrixXd G = MatrixXd::Zero(3, 3), I = MatrixXd::Identity(3, 3);
  G.diagonal() << 0.7, 0.2, 1.5;
  CHECK(coercivity_constant(G, I) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("coercivity_constant is invariant under a basis change") {
  auto rng = make_stream(44, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 4;
  MatrixXd R(n, n), Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      R(i, j) = normal(rng);
      Q(i, j) = normal(rng);
    }
  MatrixXd M = R * R.transpose() + MatrixXd::Identity(n, n);
  MatrixXd G = 0.5 * (Q + Q.transpose());
  const double c = coercivity_constant(G, M);
  MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
  B += 3 * MatrixXd::Identity(n, n);
  const double c2 = coercivity_constant(B.transpose() * G * B,
                                        B.transpose() * M * B);
  CHECK(c == doctest::Approx(c2).epsilon(1e-9));
}

TEST_CASE("coercivity_constant rejects an indefinite mass matrix") {
  MatrixXd M(2, 2);
  M << 1, 0, 0, -1;
  CHECK_THROWS_AS(coercivity_constant(MatrixXd::Identity(2, 2), M),
                  NumericError);
}

TEST_CASE("I_infty of the constant function is 1/3 for the quadratic system") {
  // <u,v>/(|u||v|) = sign(u) sign(v) in d=1; with correlation 1/2 its mean is
  // (2/pi) arcsin(1/2) = 1/3.
  const auto p = Potential::pure_power(2.0);
  const auto uv = sample_stationary_gaussian(p, 3, 1, 200000, 11);
  const auto hs = HypothesisSpace::constant(8.0);
  const CoercivityReport rep = estimate_I_infty(hs, uv, 11);
  CHECK(rep.G(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(0.02));
  CHECK(rep.M(0, 0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(rep.c_hat == doctest::Approx(1.0 / 3.0).epsilon(0.03));
  CHECK(rep.c_hat_se > 0);
  CHECK(rep.c_hat_se < 0.01);
  CHECK_FALSE(rep.low_sample);
  CHECK(std::abs(rep.c_hat - 1.0 / 3.0) < 4 * rep.c_hat_se + 1e-3);
}

TEST_CASE("small sample sets raise the low_sample flag") {
  const auto p = Potential::pure_power(2.0);
  const auto uv = sample_stationary_gaussian(p, 3, 1, 200, 5);
  const auto hs = HypothesisSpace::constant(8.0);
  CHECK(estimate_I_infty(hs, uv, 5).low_sample);
}

TEST_CASE("I_bar_T on a stationary ensemble matches I_infty") {
  SystemSpec spec;
  spec.N = 3;
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);
  spec.dt = 0.02;
  spec.T = 4.0;
  spec.n_paths = 3000;
  spec.seed = 71;
  spec.initial = InitialCondition::stationary_bootstrap();
  spec.snapshot_times = {0.0, 1.0, 2.0, 3.0, 4.0};
  const Ensemble ens = simulate(spec, Layout::Relative);
  const auto hs = HypothesisSpace::constant(8.0);
  const CoercivityReport rep = estimate_I_bar_T(hs, ens, 4.0);
  CHECK(rep.c_hat == doctest::Approx(1.0 / 3.0).epsilon(0.1));
}

TEST_CASE("samples_from_ensemble pools late snapshots") {
  SystemSpec spec;
  spec.N = 3;
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);
  spec.dt = 0.5;
  spec.T = 2.0;
  spec.n_paths = 10;
  spec.seed = 2;
  spec.initial = InitialCondition::point(VectorXd::Zero(2));
  const Ensemble ens = simulate(spec, Layout::Relative);
  const auto uv = samples_from_ensemble(ens, 1.0);
  // Snapshots at t = 1.0, 1.5, 2.0 across 10 paths.
  CHECK(uv.size() == 30);
  for (const auto& [u, v] : uv) {
    CHECK(u.size() == 1);
    CHECK(v.size() == 1);
  }
}

TEST_CASE("S_H is exact for a one-dimensional space") {
  const auto hs = HypothesisSpace::constant(3.0);
  CoercivityReport rep;
  rep.G = MatrixXd::Constant(1, 1, 0.5);
  rep.M = MatrixXd::Constant(1, 1, 2.0);
  rep.c_hat = 0.25;
  rep.c_min = VectorXd::Constant(1, 1.0 / std::sqrt(2.0));
  // ||c||_inf^2 / (c^T G c) = 1/G independent of c.
  CHECK(estimate_S_H(hs, rep) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("S_H is invariant under rescaling the basis") {
  const double scale = 3.0;
  const auto hs1 = HypothesisSpace::constant(3.0);
  const auto hs2 = HypothesisSpace::custom(
      {[scale](double) { return scale; }}, 3.0, {"scaled-constant"});
  CoercivityReport r1;
  r1.G = MatrixXd::Constant(1, 1, 0.5);
  r1.M = MatrixXd::Constant(1, 1, 2.0);
  r1.c_hat = 0.25;
  r1.c_min = VectorXd::Constant(1, 1.0);
  CoercivityReport r2 = r1;
  r2.G *= scale * scale;
  r2.M *= scale * scale;
  CHECK(estimate_S_H(hs1, r1) == doctest::Approx(estimate_S_H(hs2, r2)).epsilon(1e-9));
}

TEST_CASE("S_H dominates the ratio of any sampled direction") {
  const auto hs = HypothesisSpace::hats(4, 2.0);
  auto rng = make_stream(13, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto p = Potential::pure_power(2.0);
  const auto uv = sample_stationary_gaussian(p, 3, 1, 50000, 29);
  CoercivityReport rep = estimate_I_infty(hs, uv, 29);
  REQUIRE(rep.c_hat > 0);
  const double S = estimate_S_H(hs, rep);
  for (int t = 0; t < 50; ++t) {
    VectorXd c(4);
    for (int i = 0; i < 4; ++i) c[i] = normal(rng);
    const double quad = c.dot(rep.G * c);
    if (quad <= 0) continue;
    const double ratio = hs.sup_norm(c) * hs.sup_norm(c) / quad;
    CHECK(S >= ratio - 1e-6 * ratio);
  }
}

TEST_CASE("S_H requires a positive coercivity estimate") {
  const auto hs = HypothesisSpace::constant(3.0);
  CoercivityReport rep;
  rep.G = MatrixXd::Constant(1, 1, -0.5);
  rep.M = MatrixXd::Constant(1, 1, 1.0);
  rep.c_hat = -0.5;
  rep.c_min = VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(estimate_S_H(hs, rep), DomainError);
}

TEST_CASE("time_threshold closed form and monotonicity") {
  const auto [tc, tmin] = time_threshold(1.0, 1.0, 3, 2.0);
  CHECK(tc == doctest::Approx(std::sqrt(24.0)).epsilon(1e-12));
  CHECK(tmin == doctest::Approx(5 * std::sqrt(24.0)).epsilon(1e-12));
  const auto [tc2, tmin2] = time_threshold(2.0, 1.0, 3, 2.0);
  CHECK(tc2 > tc);
  CHECK(tmin2 > tmin);
  CHECK_THROWS_AS(time_threshold(1.0, 1.0, 3, 0.0), DomainError);
  CHECK_THROWS_AS(time_threshold(1.0, 1.0, 3, -1.0), DomainError);
  CHECK_THROWS_AS(time_threshold(0.0, 1.0, 3, 2.0), DomainError);
  CHECK_THROWS_AS(time_threshold(1.0, 0.0, 3, 2.0), DomainError);
  CHECK_THROWS_AS(time_threshold(1.0, 1.0, 1, 2.0), DomainError);
}

namespace {

// Independent quadrature oracle for the norm_star series: trapezoid on a
// dense log-lambda grid with a Simpson inner integral, truncated at the same
// even k range as the implementation.
double norm_star_oracle(const std::function<double(double)>& h, double R_max,
                        double a, double gamma, int k_max) {
  auto inner = [&](double lambda, int k) {
    const int n = 4001;
    const double du = R_max / (n - 1);
    double acc = 0;
    for (int i = 0; i < n; ++i) {
      const double u = i * du;
      const double f =
          h(u) * std::exp(-lambda * u * u) * std::pow(u, k - 1);
      acc += (i == 0 || i == n - 1) ? f : (i % 2 ? 4 * f : 2 * f);
    }
    return acc * du / 3.0;
  };
  double total = 0;
  for (int k = 2; k <= k_max; k += 2) {
    double lgfact = 0;
    for (int m = 2; m <= k; ++m) lgfact += std::log(m);
    const int ns = 6001;
    const double s_lo = -30, s_hi = 8, ds = (s_hi - s_lo) / (ns - 1);
    double term = 0;
    for (int i = 0; i < ns; ++i) {
      const double s = s_lo + i * ds;
      const double lambda = std::exp(s);
      const double inner_sq = std::pow(2 * inner(lambda, k), 2);
      const double log_w = -lambda * a + (k - 1) * (std::log(2.0) + s) +
                           std::log(static_cast<double>(k)) - lgfact -
                           (gamma + 1) * s + s;  // + s from d lambda = e^s ds
      const double f = inner_sq * std::exp(log_w);
      term += (i == 0 || i == ns - 1) ? 0.5 * f : f;
    }
    total += term * ds;
  }
  return total;
}

}  // namespace

TEST_CASE("norm_star of the zero function is zero") {
  const auto res = norm_star([](double) { return 0.0; }, 2.0, 0.0, 0.5);
  CHECK(res.value == doctest::Approx(0.0));
}

TEST_CASE("norm_star odd terms vanish by parity") {
  const auto res =
      norm_star([](double u) { return std::exp(-u); }, 3.0, 0.5, 0.5);
  REQUIRE(res.terms.size() >= 4);
  for (std::size_t k = 1; k <= res.terms.size(); ++k)
    if (k % 2 == 1) CHECK(res.terms[k - 1] == doctest::Approx(0.0));
  CHECK(res.value > 0);
  CHECK(res.tail_bound >= 0);
}

TEST_CASE("norm_star matches an independent quadrature") {
  auto h = [](double u) { return u * std::exp(-u * u); };
  NormStarSpec spec;
  const auto res = norm_star(h, 4.0, 0.0, 0.5, spec);
  const double want = norm_star_oracle(h, 4.0, 0.0, 0.5, spec.k_max);
  CHECK(res.value == doctest::Approx(want).epsilon(1e-4));

  const auto res2 = norm_star(h, 4.0, 0.7, 0.3, spec);
  const double want2 = norm_star_oracle(h, 4.0, 0.7, 0.3, spec.k_max);
  CHECK(res2.value == doctest::Approx(want2).epsilon(1e-4));
}

TEST_CASE("norm_star scales quadratically in h") {
  auto h = [](double u) { return std::exp(-u * u); };
  auto h2 = [](double u) { return 3.0 * std::exp(-u * u); };
  const auto a = norm_star(h, 3.0, 0.2, 0.5);
  const auto b = norm_star(h2, 3.0, 0.2, 0.5);
  CHECK(b.value == doctest::Approx(9.0 * a.value).epsilon(1e-10));
}

TEST_CASE("sample_stationary_gaussian rejects non-quadratic potentials") {
  CHECK_THROWS_AS(sample_stationary_gaussian(
                      Potential::power_shifted(1.0, 1.5, 0.9), 3, 1, 100, 1),
                  DomainError);
}
