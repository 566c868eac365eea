#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdst/fno.hpp"
#include "fdst/tensor.hpp"

namespace fdst {

inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kJitterFactor = 1e-6;
inline constexpr int kJitterRetries = 3;
/// The squared exponential evaluated at wrapped distances stops being positive
/// definite on the unit circle once the range grows past about 0.1.
inline constexpr double kAlphaRangeMax = 0.1;

/// Error-model parameters: a one-hidden-layer tanh network mapping the latest
/// frame to per-location standard deviations, plus the correlation range.
struct CovParams {
  RealTensor W1;  // hidden x n
  RealTensor b1;  // hidden
  RealTensor W2;  // n x hidden
  RealTensor b2;  // n
  double alpha_r = 0.1;

  std::size_t n() const { return W1.extent(1); }
  std::size_t hidden() const { return W1.extent(0); }

  static CovParams zeros(std::size_t n, std::size_t hidden);
  void for_each_block(const std::function<void(const std::string&, std::span<double>)>& fn);
  void for_each_block(
      const std::function<void(const std::string&, std::span<const double>)>& fn) const;
};

CovParams init_cov_params(std::size_t n, std::size_t hidden, double alpha_r,
                          std::uint64_t seed);

struct StddevTape {
  std::vector<double> input;
  std::vector<double> hidden;  // tanh outputs
  std::vector<double> pre;     // softplus arguments
};

/// softplus(W2 tanh(W1 y + b1) + b2) + kSigmaFloor.
std::vector<double> stddev_field(std::span<const double> y_k, const CovParams& alpha,
                                 StddevTape* tape = nullptr);

/// Gradient of a loss with respect to the network weights, given d loss / d sigma.
CovParams stddev_backward(const StddevTape& tape, const CovParams& alpha,
                          std::span<const double> grad_sigma);

/// Sigma_ij = s_i s_j exp(-d_ij^2 / (2 a^2)) on the periodic grid, plus
/// jitter_factor * mean(s^2) on the diagonal.
RealTensor build_covariance(std::span<const double> sigma, double alpha_r,
                            double jitter_factor = kJitterFactor);

/// In-place lower Cholesky factor; returns false if not positive definite.
bool cholesky(RealTensor& a);

/// 0.5 [r' Sigma^{-1} r + log det Sigma + n log 2 pi] via Cholesky. If the
/// factorization fails, extra diagonal jitter 1e-6 * mean(diag) is escalated
/// tenfold up to three times before giving up.
double gaussian_nll(std::span<const double> y, std::span<const double> mu,
                    const RealTensor& Sigma);

struct NllResult {
  double nll = 0.0;
  std::vector<double> grad_mu;
  std::vector<double> grad_sigma;
  double grad_alpha_r = 0.0;
  double jitter_factor = kJitterFactor;
};

/// NLL of y under Gau(mu, build_covariance(sigma, alpha_r)) and its gradients
/// with respect to mu, sigma and alpha_r, including the jitter's dependence
/// on sigma.
NllResult nll_sigma_gradients(std::span<const double> y, std::span<const double> mu,
                              std::span<const double> sigma, double alpha_r);

struct NllGradients {
  double nll = 0.0;
  std::vector<double> grad_mu;
  CovParams grad_alpha;
};

/// Full error-model gradient: sigma comes from stddev_field(y_k, alpha).
NllGradients nll_gradients(std::span<const double> y, std::span<const double> mu,
                           std::span<const double> y_k, const CovParams& alpha);

struct ForecastDist {
  std::vector<double> mean;
  std::vector<double> sigma;
  std::optional<RealTensor> cov;
};

ForecastDist forecast_distribution(const HistoryWindow& w, const FnoParams& theta,
                                   const CovParams& alpha, const FnoConfig& cfg,
                                   bool keep_cov = true);

/// Pointwise marginal intervals mean +- z sigma.
std::pair<std::vector<double>, std::vector<double>> prediction_interval(
    const ForecastDist& dist, double level = 0.95);

/// Minimum-image distance between grid points i and j on [0, 1).
double grid_distance(std::size_t i, std::size_t j, std::size_t n);

}  // namespace fdst
