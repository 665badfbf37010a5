#include <benchmark/benchmark.h>

#include <random>

#include "ipslab/coercivity.hpp"
#include "ipslab/dynamics.hpp"
#include "ipslab/pdkernels.hpp"
#include "ipslab/rng.hpp"

using namespace ipslab;
using Eigen::VectorXd;

namespace {

VectorXd random_state(int n, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = normal(rng);
  return x;
}

void bm_drift_relative(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const auto frame = build_frame(N, 2);
  const auto p = Potential::power_shifted(1.0, 1.5, 0.9);
  const VectorXd r = random_state((N - 1) * 2, 42);
  for (auto _ : state)
    benchmark::DoNotOptimize(drift_relative(frame, p, r));
  state.SetComplexityN(N);
}
BENCHMARK(bm_drift_relative)->RangeMultiplier(2)->Range(4, 64)->Complexity();

void bm_simulate_steps(benchmark::State& state) {
  SystemSpec spec;
  spec.N = static_cast<int>(state.range(0));
  spec.d = 1;
  spec.potential = Potential::pure_power(2.0);
  spec.dt = 0.01;
  spec.T = 1.0;
  spec.n_paths = 16;
  spec.seed = 1;
  spec.initial = InitialCondition::gaussian(VectorXd::Zero(spec.N - 1), 1.0);
  spec.snapshot_times = {1.0};
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate(spec, Layout::Relative));
  state.SetItemsProcessed(state.iterations() * spec.n_paths * 100);
}
BENCHMARK(bm_simulate_steps)->Arg(3)->Arg(8)->Arg(16);

void bm_gram_eigensolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Kernel k = k_radial([](double r) { return std::exp(-r * r); }, "gauss");
  auto rng = make_stream(7, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<VectorXd> pts(n, VectorXd(3));
  for (auto& pt : pts)
    for (int i = 0; i < 3; ++i) pt[i] = normal(rng);
  for (auto _ : state) {
    const Eigen::MatrixXd G = gram(k, pts);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    benchmark::DoNotOptimize(es.eigenvalues());
  }
}
BENCHMARK(bm_gram_eigensolve)->Arg(30)->Arg(60)->Arg(120);

void bm_estimate_I_infty(benchmark::State& state) {
  const auto p = Potential::pure_power(2.0);
  const auto uv = sample_stationary_gaussian(p, 3, 1, state.range(0), 3);
  const auto hs = HypothesisSpace::hats(8, 2.5);
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_I_infty(hs, uv, 3));
}
BENCHMARK(bm_estimate_I_infty)->Arg(10000)->Arg(40000);

}  // namespace

BENCHMARK_MAIN();
