#include "ipslab/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "ipslab/errors.hpp"
#include "ipslab/rng.hpp"

namespace ipslab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

RelativeFrame build_frame(int N, int d) {
  if (N < 2) throw ConfigError("build_frame: N must be >= 2");
  if (d < 1) throw ConfigError("build_frame: d must be >= 1");
  RelativeFrame f;
  f.N = N;
  f.d = d;
  const int m = N - 1;
  f.A = MatrixXd::Zero(m * d, m * d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      f.A.block(i * d, j * d, d, d) =
          (i == j ? 2.0 : 1.0) * MatrixXd::Identity(d, d);

  // S[i][j] block (1-based i,j): sqrt(1/(j(j+1))) below the diagonal,
  // sqrt((i+1)/i) on it; then S S^T = A exactly.
  MatrixXd Sb = MatrixXd::Zero(m, m);
  for (int i = 1; i <= m; ++i) {
    for (int j = 1; j < i; ++j)
      Sb(i - 1, j - 1) = std::sqrt(1.0 / (static_cast<double>(j) * (j + 1)));
    Sb(i - 1, i - 1) = std::sqrt((i + 1.0) / i);
  }
  MatrixXd Sb_inv =
      Sb.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(m, m));
  f.S = MatrixXd::Zero(m * d, m * d);
  f.S_inv = MatrixXd::Zero(m * d, m * d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= i; ++j) {
      f.S.block(i * d, j * d, d, d) = Sb(i, j) * MatrixXd::Identity(d, d);
      f.S_inv.block(i * d, j * d, d, d) = Sb_inv(i, j) * MatrixXd::Identity(d, d);
    }
  return f;
}

double hamiltonian(const RelativeFrame& frame, const Potential& p,
                   const VectorXd& r) {
  const int m = frame.N - 1, d = frame.d;
  if (r.size() != m * d) throw DomainError("hamiltonian: state dimension mismatch");
  double h = 0;
  for (int i = 0; i < m; ++i) h += p.value(r.segment(i * d, d).norm());
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      h += p.value((r.segment(i * d, d) - r.segment(j * d, d)).norm());
  return h / frame.N;
}

VectorXd grad_hamiltonian(const RelativeFrame& frame, const Potential& p,
                          const VectorXd& r) {
  const int m = frame.N - 1, d = frame.d;
  if (r.size() != m * d)
    throw DomainError("grad_hamiltonian: state dimension mismatch");
  VectorXd g = VectorXd::Zero(m * d);
  for (int i = 0; i < m; ++i)
    g.segment(i * d, d) += p.phi_times(r.segment(i * d, d));
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const VectorXd f = p.phi_times(r.segment(i * d, d) - r.segment(j * d, d));
      g.segment(i * d, d) += f;
      g.segment(j * d, d) -= f;
    }
  return g / frame.N;
}

VectorXd drift_full(const Potential& p, int N, int d, const VectorXd& X) {
  if (X.size() != N * d) throw DomainError("drift_full: state dimension mismatch");
  VectorXd out = VectorXd::Zero(N * d);
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      const VectorXd f = p.phi_times(X.segment(j * d, d) - X.segment(i * d, d));
      out.segment(i * d, d) += f;
      out.segment(j * d, d) -= f;
    }
  return out / N;
}

VectorXd drift_relative(const RelativeFrame& frame, const Potential& p,
                        const VectorXd& r) {
  const int m = frame.N - 1, d = frame.d;
  if (r.size() != m * d)
    throw DomainError("drift_relative: state dimension mismatch");
  // b_i = (1/N)[2 phi(r_1i) r_1i + sum_{j != i}(phi(r_1j) r_1j + phi(r_ji) r_ji)]
  // with r_ji = r_1i - r_1j; the drift is -b, and b = A grad H.
  VectorXd sum_own = VectorXd::Zero(d);
  for (int j = 0; j < m; ++j) sum_own += p.phi_times(r.segment(j * d, d));
  VectorXd b = VectorXd::Zero(m * d);
  for (int i = 0; i < m; ++i) {
    const VectorXd ri = r.segment(i * d, d);
    VectorXd bi = p.phi_times(ri) + sum_own;
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      bi += p.phi_times(ri - r.segment(j * d, d));
    }
    b.segment(i * d, d) = bi;
  }
  return -b / frame.N;
}

InitialCondition InitialCondition::point(VectorXd x) {
  InitialCondition ic;
  ic.kind = Kind::Point;
  ic.x0 = std::move(x);
  return ic;
}

InitialCondition InitialCondition::gaussian(VectorXd mean, double sigma) {
  InitialCondition ic;
  ic.kind = Kind::Gaussian;
  ic.mean = std::move(mean);
  ic.sigma = sigma;
  return ic;
}

InitialCondition InitialCondition::stationary_bootstrap(double burn_in) {
  InitialCondition ic;
  ic.kind = Kind::StationaryBootstrap;
  ic.bootstrap_burn_in = burn_in;
  return ic;
}

void SystemSpec::validate() const {
  if (N < 2) throw ConfigError("system: N must be >= 2");
  if (d < 1) throw ConfigError("system: d must be >= 1");
  if (!(dt > 0)) throw ConfigError("system: dt must be > 0");
  if (!(T > 0)) throw ConfigError("system: T must be > 0");
  if (T < dt) throw ConfigError("system: T must be >= dt");
  if (n_paths < 1) throw ConfigError("system: n_paths must be >= 1");
  if (threads < 1) throw ConfigError("system: threads must be >= 1");
  if (!(moment_s > 2)) throw ConfigError("system: moment_s must be > 2");
  if (initial.kind == InitialCondition::Kind::Gaussian && !(initial.sigma > 0))
    throw ConfigError("system: Gaussian initial condition needs sigma > 0");
  for (std::size_t i = 0; i + 1 < snapshot_times.size(); ++i)
    if (snapshot_times[i] >= snapshot_times[i + 1])
      throw ConfigError("system: snapshot_times must be strictly increasing");
  for (double t : snapshot_times)
    if (t < 0 || t > T + 1e-9)
      throw ConfigError("system: snapshot_times must lie in [0, T]");
}

int Ensemble::time_index(double t, double tol) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= tol) return static_cast<int>(i);
  std::ostringstream os;
  os << "time_index: t = " << t << " not among the stored snapshots";
  throw DomainError(os.str());
}

VectorXd full_to_relative(int N, int d, const VectorXd& X) {
  if (X.size() != N * d)
    throw DomainError("full_to_relative: state dimension mismatch");
  VectorXd r((N - 1) * d);
  for (int j = 1; j < N; ++j)
    r.segment((j - 1) * d, d) = X.segment(j * d, d) - X.segment(0, d);
  return r;
}

VectorXd relative_to_Y(const RelativeFrame& frame, const VectorXd& r) {
  if (r.size() != frame.S.rows())
    throw DomainError("relative_to_Y: state dimension mismatch");
  return frame.S_inv * r;
}

VectorXd Y_to_relative(const RelativeFrame& frame, const VectorXd& y) {
  if (y.size() != frame.S.rows())
    throw DomainError("Y_to_relative: state dimension mismatch");
  return frame.S * y;
}

std::optional<MatrixXd> stationary_gaussian_cov(const Potential& p, int N, int d) {
  // Quadratic Phi = c r^2 (+ const) is the only family with a Gaussian
  // stationary relative law; per dimension the covariance is (I + J)/(4c).
  double c;
  if (p.family() == PotentialFamily::PurePower && p.gamma() == 2.0) {
    c = 1.0;
  } else if (p.family() == PotentialFamily::PowerShifted && p.theta() == 2.0 &&
             p.gamma() == 1.0) {
    c = 1.0;
  } else {
    return std::nullopt;
  }
  const int m = N - 1;
  MatrixXd cov = MatrixXd::Zero(m * d, m * d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double v = (i == j ? 2.0 : 1.0) / (4.0 * c);
      cov.block(i * d, j * d, d, d) = v * MatrixXd::Identity(d, d);
    }
  return cov;
}

namespace {

int state_dim(Layout layout, int N, int d) {
  return layout == Layout::FullSpace ? N * d : (N - 1) * d;
}

// Per-path initial state. `warm_starts` (from a burn-in run or an exact
// stationary sampler) overrides the InitialCondition when non-empty.
VectorXd draw_initial(const SystemSpec& spec, Layout layout,
                      const RelativeFrame& frame,
                      const Eigen::LLT<MatrixXd>* stat_chol,
                      std::mt19937_64& rng) {
  const int dim = state_dim(layout, spec.N, spec.d);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (spec.initial.kind) {
    case InitialCondition::Kind::Point: {
      if (spec.initial.x0.size() != dim)
        throw ConfigError("initial: point state has wrong dimension");
      return spec.initial.x0;
    }
    case InitialCondition::Kind::Gaussian: {
      VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = spec.initial.sigma * normal(rng);
      if (spec.initial.mean.size() == dim)
        x += spec.initial.mean;
      else if (spec.initial.mean.size() != 0)
        throw ConfigError("initial: Gaussian mean has wrong dimension");
      return x;
    }
    case InitialCondition::Kind::StationaryBootstrap: {
      if (!stat_chol)
        throw NumericError("initial: missing stationary sampler");
      VectorXd z(frame.S.rows());
      for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
      VectorXd r = stat_chol->matrixL() * z;
      if (layout == Layout::Relative) return r;
      if (layout == Layout::YCoords) return frame.S_inv * r;
      // FullSpace: pin particle 1 at the origin; the center of mass is free
      // Brownian motion and has no stationary law.
      VectorXd X = VectorXd::Zero(spec.N * spec.d);
      for (int j = 1; j < spec.N; ++j)
        X.segment(j * spec.d, spec.d) = -r.segment((j - 1) * spec.d, spec.d);
      return X;
    }
  }
  throw ConfigError("initial: unknown kind");
}

Ensemble integrate(const SystemSpec& spec, Layout layout,
                   const RelativeFrame& frame,
                   const std::vector<VectorXd>& warm_starts,
                   const Eigen::LLT<MatrixXd>* stat_chol) {
  const int dim = state_dim(layout, spec.N, spec.d);
  const long n_steps = std::lround(spec.T / spec.dt);
  if (std::abs(n_steps * spec.dt - spec.T) > 1e-9 * std::max(1.0, spec.T))
    throw ConfigError("simulate: T must be an integer multiple of dt");

  std::vector<long> snap_steps;
  std::vector<double> snap_times;
  if (spec.snapshot_times.empty()) {
    snap_steps.resize(n_steps + 1);
    snap_times.resize(n_steps + 1);
    for (long s = 0; s <= n_steps; ++s) {
      snap_steps[s] = s;
      snap_times[s] = s * spec.dt;
    }
  } else {
    for (double t : spec.snapshot_times) {
      const long s = std::lround(t / spec.dt);
      if (std::abs(s * spec.dt - t) > 1e-9 * std::max(1.0, spec.T))
        throw ConfigError("simulate: snapshot times must align with the dt grid");
      snap_steps.push_back(s);
      snap_times.push_back(s * spec.dt);
    }
  }
  const int n_times = static_cast<int>(snap_steps.size());

  Ensemble ens;
  ens.layout = layout;
  ens.N = spec.N;
  ens.d = spec.d;
  ens.dim = dim;
  ens.times = snap_times;
  ens.n_paths = spec.n_paths;
  ens.seed = spec.seed;
  ens.dt = spec.dt;
  ens.data.assign(static_cast<std::size_t>(spec.n_paths) * n_times * dim, 0.0);
  ens.diverged_at.assign(spec.n_paths, -1);

  const double sqrt_dt = std::sqrt(spec.dt);
  std::atomic<int> divergences{0};
  std::atomic<long> next_path{0};

  auto worker = [&]() {
    VectorXd x(dim), noise(dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      const long pth = next_path.fetch_add(1);
      if (pth >= spec.n_paths) return;
      auto rng = make_stream(spec.seed, static_cast<std::uint64_t>(pth));
      x = warm_starts.empty()
              ? draw_initial(spec, layout, frame, stat_chol, rng)
              : warm_starts[pth];
      std::size_t cursor = 0;
      bool dead = false;
      auto record = [&](long step) {
        while (cursor < snap_steps.size() && snap_steps[cursor] == step) {
          double* dst = ens.data.data() +
                        (static_cast<std::size_t>(pth) * n_times + cursor) * dim;
          Eigen::Map<VectorXd>(dst, dim) = x;
          ++cursor;
        }
      };
      record(0);
      for (long step = 0; step < n_steps && cursor < snap_steps.size(); ++step) {
        if (!dead) {
          VectorXd drift;
          switch (layout) {
            case Layout::FullSpace:
              drift = drift_full(spec.potential, spec.N, spec.d, x);
              break;
            case Layout::Relative:
              drift = drift_relative(frame, spec.potential, x);
              break;
            case Layout::YCoords:
              drift = -frame.S.transpose() *
                      grad_hamiltonian(frame, spec.potential, frame.S * x);
              break;
          }
          if (spec.zero_noise) {
            x += spec.dt * drift;
          } else {
            for (int i = 0; i < dim; ++i) noise[i] = normal(rng);
            // Relative coordinates carry correlated noise S dW.
            if (layout == Layout::Relative)
              x += spec.dt * drift + sqrt_dt * (frame.S * noise);
            else
              x += spec.dt * drift + sqrt_dt * noise;
          }
          if (!x.allFinite()) {
            dead = true;
            ens.diverged_at[pth] = static_cast<int>(step + 1);
            divergences.fetch_add(1);
            x.setConstant(std::numeric_limits<double>::quiet_NaN());
          }
        }
        record(step + 1);
      }
    }
  };

  const int n_threads = std::min(spec.threads, spec.n_paths);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  ens.divergence_count = divergences.load();
  if (ens.divergence_count == spec.n_paths)
    throw NumericError(
        "simulate: every path diverged; reduce dt or check the potential");
  return ens;
}

}  // namespace

Ensemble simulate(const SystemSpec& spec, Layout layout) {
  spec.validate();
  const RelativeFrame frame = build_frame(spec.N, spec.d);

  if (spec.initial.kind == InitialCondition::Kind::StationaryBootstrap) {
    auto cov = stationary_gaussian_cov(spec.potential, spec.N, spec.d);
    if (cov) {
      Eigen::LLT<MatrixXd> llt(*cov);
      if (llt.info() != Eigen::Success)
        throw NumericError("simulate: stationary covariance not SPD");
      return integrate(spec, layout, frame, {}, &llt);
    }
    // No exact sampler: burn the chain in from a unit Gaussian and start the
    // main run from the burn-in endpoints.
    SystemSpec burn = spec;
    burn.T = spec.initial.bootstrap_burn_in;
    burn.initial = InitialCondition::gaussian(VectorXd(), 1.0);
    burn.snapshot_times = {burn.T};
    std::uint64_t s = spec.seed ^ 0xb5297a4d1f85a3c7ULL;
    burn.seed = splitmix64(s);
    Ensemble warm = integrate(burn, layout, frame, {}, nullptr);
    const int last = static_cast<int>(warm.times.size()) - 1;
    std::vector<VectorXd> starts(spec.n_paths);
    for (int pth = 0; pth < spec.n_paths; ++pth)
      starts[pth] = warm.state(pth, last);
    return integrate(spec, layout, frame, starts, nullptr);
  }
  return integrate(spec, layout, frame, {}, nullptr);
}

Ensemble to_relative(const Ensemble& full, const RelativeFrame& frame) {
  if (full.layout != Layout::FullSpace)
    throw DomainError("to_relative: source ensemble is not in full coordinates");
  if (full.N != frame.N || full.d != frame.d)
    throw DomainError("to_relative: frame does not match the ensemble");
  Ensemble out;
  out.layout = Layout::Relative;
  out.N = full.N;
  out.d = full.d;
  out.dim = (full.N - 1) * full.d;
  out.times = full.times;
  out.n_paths = full.n_paths;
  out.seed = full.seed;
  out.dt = full.dt;
  out.diverged_at = full.diverged_at;
  out.divergence_count = full.divergence_count;
  const int n_times = static_cast<int>(full.times.size());
  out.data.resize(static_cast<std::size_t>(full.n_paths) * n_times * out.dim);
  for (int pth = 0; pth < full.n_paths; ++pth)
    for (int ti = 0; ti < n_times; ++ti) {
      const VectorXd r = full_to_relative(full.N, full.d, full.state(pth, ti));
      double* dst = out.data.data() +
                    (static_cast<std::size_t>(pth) * n_times + ti) * out.dim;
      Eigen::Map<VectorXd>(dst, out.dim) = r;
    }
  return out;
}

}  // namespace ipslab
