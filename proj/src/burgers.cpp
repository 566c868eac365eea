#include "fdst/burgers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "fdst/spectral.hpp"
#include "fdst/special.hpp"

namespace fdst {

void MaternConfig::validate() const {
  if (!(variance > 0.0) || !(lengthscale > 0.0) || !(nu > 0.0)) {
    throw std::invalid_argument("Matern variance, lengthscale and smoothness must be positive");
  }
}

void BurgersConfig::validate() const {
  if (!is_power_of_two(n)) throw std::invalid_argument("grid size n must be a power of two");
  if (T_model < 1) throw std::invalid_argument("T_model must be at least 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (gamma_mode == GammaMode::kRandomUniform) {
    if (!(gamma_lo >= 0.0) || !(gamma_hi >= gamma_lo)) {
      throw std::invalid_argument("gamma range must satisfy 0 <= lo <= hi");
    }
  } else if (!(gamma_fixed >= 0.0)) {
    throw std::invalid_argument("fixed gamma must be nonnegative");
  }
  if (dt_sim < 0.0) throw std::invalid_argument("dt_sim must be nonnegative");
  if (dt_sim > 0.0) {
    const double ratio = delta / dt_sim;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
      throw std::invalid_argument("delta must be an integer multiple of dt_sim");
    }
    if (gamma_max() * dt_sim / (ds() * ds()) > 0.5) {
      throw std::invalid_argument("dt_sim violates the diffusive stability bound");
    }
  }
  ic.validate();
}

std::vector<double> Dataset::gammas() const {
  std::vector<double> g;
  g.reserve(instances.size());
  for (const auto& inst : instances) g.push_back(inst.gamma);
  return g;
}

double matern_chordal_cov(double s, double s_prime, const MaternConfig& cfg) {
  if (!std::isfinite(s) || !std::isfinite(s_prime)) {
    throw std::invalid_argument("matern_chordal_cov: non-finite position");
  }
  const double c = std::sin(std::numbers::pi * std::abs(s - s_prime)) / std::numbers::pi;
  const double x = std::sqrt(2.0 * cfg.nu) * std::abs(c) / cfg.lengthscale;
  if (x == 0.0) return cfg.variance;
  return cfg.variance * std::pow(2.0, 1.0 - cfg.nu) / std::tgamma(cfg.nu) * std::pow(x, cfg.nu) *
         bessel_k(cfg.nu, x);
}

std::vector<double> sample_initial_condition(const MaternConfig& cfg, std::size_t n,
                                             CounterRng& rng) {
  if (!is_power_of_two(n)) throw std::invalid_argument("grid size n must be a power of two");
  std::vector<cplx> row(n);
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = matern_chordal_cov(0.0, static_cast<double>(j) / static_cast<double>(n), cfg);
  }
  fft_inplace(row, false);
  double lmax = 0.0;
  for (const auto& l : row) lmax = std::max(lmax, l.real());
  std::vector<cplx> spec(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = row[k].real();
    if (lam < -1e-8 * lmax) throw std::runtime_error("covariance not PSD on grid");
    const double a = rng.normal();
    const double b = rng.normal();
    spec[k] = std::sqrt(std::max(lam, 0.0)) * cplx{a, b};
  }
  // Re(sqrt(n) * ifft(sqrt(lambda) * (a + ib))) has covariance exactly the
  // circulant matrix built from `row`.
  fft_inplace(spec, true);
  const double scale = std::sqrt(static_cast<double>(n));
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = scale * spec[j].real();
  return u;
}

std::vector<double> sample_initial_condition(const MaternConfig& cfg, std::size_t n,
                                             std::uint64_t seed) {
  CounterRng rng(seed);
  return sample_initial_condition(cfg, n, rng);
}

std::vector<double> burgers_step(std::span<const double> u, double gamma, double dt, double ds,
                                 AdvectionScheme scheme, std::size_t step_index) {
  const std::size_t n = u.size();
  std::vector<double> out(n);
  const double adv = dt / ds;
  const double dif = gamma * dt / (ds * ds);
  for (std::size_t i = 0; i < n; ++i) {
    const double um = u[(i + n - 1) % n];
    const double up = u[(i + 1) % n];
    const double ui = u[i];
    const double advection = scheme == AdvectionScheme::kFlux ? 0.5 * (ui * ui - um * um)
                                                              : ui * (ui - um);
    out[i] = ui - adv * advection + dif * (up - 2.0 * ui + um);
    if (!std::isfinite(out[i])) throw SimulationDiverged(step_index);
  }
  return out;
}

double stable_dt(const BurgersConfig& cfg, double max_abs_u0) {
  const double ds = cfg.ds();
  double dt = 0.25 * ds / (max_abs_u0 + 1e-6);
  if (cfg.gamma_max() > 0.0) dt = std::min(dt, 0.25 * ds * ds / cfg.gamma_max());
  const double steps = std::ceil(cfg.delta / dt - 1e-12);
  return cfg.delta / steps;
}

FieldSeries simulate_from(const BurgersConfig& cfg, std::span<const double> u0, double gamma) {
  if (u0.size() != cfg.n) throw std::invalid_argument("initial condition length must equal n");
  double umax = 0.0;
  for (double v : u0) umax = std::max(umax, std::abs(v));
  const double dt = cfg.dt_sim > 0.0 ? cfg.dt_sim : stable_dt(cfg, umax);
  const auto per_frame = static_cast<std::size_t>(std::llround(cfg.delta / dt));

  FieldSeries fs;
  fs.values = RealTensor({cfg.T_model, cfg.n});
  fs.gamma = gamma;
  fs.delta = cfg.delta;
  fs.n = cfg.n;

  std::vector<double> u(u0.begin(), u0.end());
  std::size_t step = 0;
  for (std::size_t frame = 0; frame < cfg.T_model; ++frame) {
    for (std::size_t j = 0; j < per_frame; ++j) {
      u = burgers_step(u, gamma, dt, cfg.ds(), cfg.scheme, step++);
    }
    std::copy(u.begin(), u.end(), fs.values.storage().begin() + frame * cfg.n);
  }
  return fs;
}

FieldSeries simulate_instance(const BurgersConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CounterRng rng(seed);
  const double gamma = cfg.gamma_mode == GammaMode::kFixed
                           ? cfg.gamma_fixed
                           : rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
  const auto u0 = sample_initial_condition(cfg.ic, cfg.n, rng);
  return simulate_from(cfg, u0, gamma);
}

Dataset generate_dataset(const BurgersConfig& cfg, std::size_t N, std::uint64_t seed,
                         std::size_t n_test, unsigned threads) {
  if (N < 1) throw std::invalid_argument("dataset needs at least one instance");
  if (n_test > N) throw std::invalid_argument("test split larger than dataset");
  cfg.validate();
  Dataset ds;
  ds.T = cfg.T_model;
  ds.n = cfg.n;
  ds.delta = cfg.delta;
  ds.seed = seed;
  ds.instances.resize(N);

  const CounterRng root(seed);
  auto run = [&](std::size_t i) { ds.instances[i] = simulate_instance(cfg, root.split(i).next_u64()); };
  threads = std::max(1u, threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < N; ++i) run(i);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < N; i += threads) run(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (std::size_t i = 0; i < N; ++i) {
    (i < N - n_test ? ds.train_ids : ds.test_ids).push_back(i);
  }
  return ds;
}

}  // namespace fdst
