#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdst/rng.hpp"
#include "fdst/tensor.hpp"

namespace fdst {

struct MaternConfig {
  double variance = 1.0;
  double lengthscale = 1.0;
  double nu = 2.0;

  void validate() const;
};

enum class GammaMode { kRandomUniform, kFixed };

/// How the u u_s term is differenced. Both use the backward (upwind for u > 0)
/// stencil; the flux form differences u^2/2 and conserves sum(u) exactly.
enum class AdvectionScheme { kFlux, kNonConservative };

struct BurgersConfig {
  std::size_t n = 256;
  /// Simulator step; 0 selects a stable step automatically.
  double dt_sim = 0.0;
  std::size_t T_model = 10;
  double delta = 0.1;
  GammaMode gamma_mode = GammaMode::kRandomUniform;
  double gamma_lo = 0.05;
  double gamma_hi = 0.7;
  double gamma_fixed = 0.4;
  AdvectionScheme scheme = AdvectionScheme::kFlux;
  MaternConfig ic;
  std::uint64_t seed = 0;

  double ds() const { return 1.0 / static_cast<double>(n); }
  double gamma_max() const { return gamma_mode == GammaMode::kFixed ? gamma_fixed : gamma_hi; }
  void validate() const;
};

struct FieldSeries {
  RealTensor values;  // T_model x n
  double gamma = 0.0;
  double delta = 0.0;
  std::size_t n = 0;

  std::size_t frames() const { return values.extent(0); }
  std::span<const double> frame(std::size_t t) const {
    return values.data().subspan(t * n, n);
  }
};

struct Dataset {
  std::vector<FieldSeries> instances;
  std::size_t T = 0;
  std::size_t n = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;

  std::vector<double> gammas() const;
};

class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(std::size_t step)
      : std::runtime_error("simulation diverged at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Matern covariance evaluated at the chordal distance c = sin(pi |s - s'|) / pi
/// between two points on a circle of unit circumference.
double matern_chordal_cov(double s, double s_prime, const MaternConfig& cfg);

std::vector<double> sample_initial_condition(const MaternConfig& cfg, std::size_t n,
                                             CounterRng& rng);
std::vector<double> sample_initial_condition(const MaternConfig& cfg, std::size_t n,
                                             std::uint64_t seed);

/// One explicit Euler step with periodic wrap. kNonConservative is the
/// textbook u_i (u_i - u_{i-1}) upwind form.
std::vector<double> burgers_step(std::span<const double> u, double gamma, double dt, double ds,
                                 AdvectionScheme scheme = AdvectionScheme::kNonConservative,
                                 std::size_t step_index = 0);

/// Stable simulator step for the given initial amplitude, rounded down so that
/// delta / dt is an integer.
double stable_dt(const BurgersConfig& cfg, double max_abs_u0);

FieldSeries simulate_instance(const BurgersConfig& cfg, std::uint64_t seed);
/// Same as above but with an explicit initial condition and gamma.
FieldSeries simulate_from(const BurgersConfig& cfg, std::span<const double> u0, double gamma);

/// Instances are seeded from (seed, i); the last `n_test` form the test split.
Dataset generate_dataset(const BurgersConfig& cfg, std::size_t N, std::uint64_t seed,
                         std::size_t n_test = 0, unsigned threads = 1);

}  // namespace fdst
