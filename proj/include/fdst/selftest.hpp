#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace fdst {

struct CheckResult {
  std::string suite;
  std::string property;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct FftCheckOptions {
  std::size_t max_log2 = 10;
  std::size_t trials = 100;
  double tol = 1e-10;
  std::uint64_t seed = 1;
};

/// Largest relative error max|fft - dft| / max|dft| over all sizes and trials.
double fft_max_relative_error(const FftCheckOptions& opt);

struct GradcheckOptions {
  std::size_t n = 16;
  std::size_t dv = 3;
  std::size_t layers = 2;
  std::size_t tau = 2;
  std::size_t h = 1;
  std::size_t modes_space = 4;
  std::size_t modes_time = 2;
  std::size_t hidden = 6;
  double step = 1e-5;
  double tol = 1e-4;
  /// Components whose analytic and numeric magnitudes are both below this
  /// are not compared.
  double floor = 1e-8;
};

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // block name and index of the worst component
  std::size_t checked = 0;
  bool passed = false;
};

/// Analytic gradient of the composed window NLL (mean operator, stddev
/// network, covariance, Cholesky likelihood) against central differences
/// on every parameter of a tiny random model.
GradcheckReport gradcheck_composed_nll(std::uint64_t seed, const GradcheckOptions& opt = {});

struct GreenCheckReport {
  double max_abs_err = 0.0;  // closed form vs quadrature
  double max_decay_rel_err = 0.0;
};

GreenCheckReport green_check(std::uint64_t seed, std::size_t cases = 3, std::size_t offsets = 21);

/// Largest |metric - loop oracle| over random fixtures.
double metric_oracle_max_diff(std::uint64_t seed, std::size_t fixtures);

struct SelftestOptions {
  std::set<std::string> suites;  // empty = all of fft, gradcheck, green, metrics
  bool fault_backward = false;
  std::size_t gradcheck_seeds = 2;
  std::size_t fft_trials = 100;
};

std::vector<CheckResult> run_selftest(const SelftestOptions& opt);
std::string format_results(const std::vector<CheckResult>& results);

}  // namespace fdst
