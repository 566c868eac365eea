#include "fdst/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fdst/rng.hpp"
#include "fdst/special.hpp"

namespace fdst {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Solves L L' x = b in place given the lower factor.
void cholesky_solve(const RealTensor& L, std::span<double> b) {
  const std::size_t n = L.extent(0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b[i];
    for (std::size_t k = 0; k < i; ++k) acc -= L.at(i, k) * b[k];
    b[i] = acc / L.at(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= L.at(k, i) * b[k];
    b[i] = acc / L.at(i, i);
  }
}

// Inverse of L L' from its factor.
RealTensor cholesky_inverse(const RealTensor& L) {
  const std::size_t n = L.extent(0);
  // Linv, lower triangular
  RealTensor Linv({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    Linv.at(j, j) = 1.0 / L.at(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = j; k < i; ++k) acc -= L.at(i, k) * Linv.at(k, j);
      Linv.at(i, j) = acc / L.at(i, i);
    }
  }
  RealTensor inv({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (std::size_t k = i; k < n; ++k) acc += Linv.at(k, i) * Linv.at(k, j);
      inv.at(i, j) = acc;
      inv.at(j, i) = acc;
    }
  }
  return inv;
}

double mean_diagonal(const RealTensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.extent(0); ++i) s += a.at(i, i);
  return s / static_cast<double>(a.extent(0));
}

}  // namespace

CovParams CovParams::zeros(std::size_t n, std::size_t hidden) {
  CovParams p;
  p.W1 = RealTensor({hidden, n});
  p.b1 = RealTensor({hidden});
  p.W2 = RealTensor({n, hidden});
  p.b2 = RealTensor({n});
  p.alpha_r = 0.0;
  return p;
}

void CovParams::for_each_block(
    const std::function<void(const std::string&, std::span<double>)>& fn) {
  fn("W1", W1.data());
  fn("b1", b1.data());
  fn("W2", W2.data());
  fn("b2", b2.data());
  fn("alpha_r", std::span<double>(&alpha_r, 1));
}

void CovParams::for_each_block(
    const std::function<void(const std::string&, std::span<const double>)>& fn) const {
  const_cast<CovParams*>(this)->for_each_block(
      [&](const std::string& name, std::span<double> xs) { fn(name, xs); });
}

CovParams init_cov_params(std::size_t n, std::size_t hidden, double alpha_r,
                          std::uint64_t seed) {
  if (!(alpha_r > 0.0)) throw std::invalid_argument("alpha_r must be positive");
  CovParams p = CovParams::zeros(n, hidden);
  CounterRng rng(seed);
  const double a = std::sqrt(6.0 / static_cast<double>(n + hidden));
  for (auto& x : p.W1.storage()) x = rng.uniform(-a, a);
  for (auto& x : p.W2.storage()) x = rng.uniform(-a, a);
  p.alpha_r = alpha_r;
  return p;
}

double grid_distance(std::size_t i, std::size_t j, std::size_t n) {
  const std::size_t diff = i > j ? i - j : j - i;
  return static_cast<double>(std::min(diff, n - diff)) / static_cast<double>(n);
}

std::vector<double> stddev_field(std::span<const double> y_k, const CovParams& alpha,
                                 StddevTape* tape) {
  const std::size_t n = alpha.n();
  const std::size_t H = alpha.hidden();
  if (y_k.size() != n) throw std::invalid_argument("stddev_field: input length");
  std::vector<double> hid(H);
  for (std::size_t r = 0; r < H; ++r) {
    double acc = alpha.b1[r];
    for (std::size_t c = 0; c < n; ++c) acc += alpha.W1.at(r, c) * y_k[c];
    hid[r] = std::tanh(acc);
  }
  std::vector<double> pre(n);
  std::vector<double> sigma(n);
  for (std::size_t r = 0; r < n; ++r) {
    double acc = alpha.b2[r];
    for (std::size_t c = 0; c < H; ++c) acc += alpha.W2.at(r, c) * hid[c];
    pre[r] = acc;
    sigma[r] = softplus(acc) + kSigmaFloor;
  }
  if (!all_finite(sigma)) throw std::runtime_error("stddev_field: non-finite output");
  if (tape) {
    tape->input.assign(y_k.begin(), y_k.end());
    tape->hidden = std::move(hid);
    tape->pre = std::move(pre);
  }
  return sigma;
}

CovParams stddev_backward(const StddevTape& tape, const CovParams& alpha,
                          std::span<const double> grad_sigma) {
  const std::size_t n = alpha.n();
  const std::size_t H = alpha.hidden();
  CovParams g = CovParams::zeros(n, H);
  std::vector<double> gh(H, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double ga = grad_sigma[r] * logistic(tape.pre[r]);
    g.b2[r] = ga;
    for (std::size_t c = 0; c < H; ++c) {
      g.W2.at(r, c) = ga * tape.hidden[c];
      gh[c] += alpha.W2.at(r, c) * ga;
    }
  }
  for (std::size_t r = 0; r < H; ++r) {
    const double gpre = gh[r] * (1.0 - tape.hidden[r] * tape.hidden[r]);
    g.b1[r] = gpre;
    for (std::size_t c = 0; c < n; ++c) g.W1.at(r, c) = gpre * tape.input[c];
  }
  return g;
}

RealTensor build_covariance(std::span<const double> sigma, double alpha_r, double jitter_factor) {
  const std::size_t n = sigma.size();
  if (!(alpha_r > 0.0)) throw std::invalid_argument("alpha_r must be positive");
  double mean_sq = 0.0;
  for (double s : sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("sigma must be strictly positive");
    mean_sq += s * s;
  }
  mean_sq /= static_cast<double>(n);
  RealTensor cov({n, n});
  const double inv2a2 = 1.0 / (2.0 * alpha_r * alpha_r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double d = grid_distance(i, j, n);
      const double v = sigma[i] * sigma[j] * std::exp(-d * d * inv2a2);
      cov.at(i, j) = v;
      cov.at(j, i) = v;
    }
    cov.at(i, i) = sigma[i] * sigma[i] + jitter_factor * mean_sq;
  }
  return cov;
}

bool cholesky(RealTensor& a) {
  const std::size_t n = a.extent(0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a.at(j, k) * a.at(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    a.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = a.at(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= a.at(i, k) * a.at(j, k);
      a.at(i, j) = acc / ljj;
    }
    for (std::size_t i = 0; i < j; ++i) a.at(i, j) = 0.0;
  }
  return true;
}

double gaussian_nll(std::span<const double> y, std::span<const double> mu,
                    const RealTensor& Sigma) {
  const std::size_t n = y.size();
  if (mu.size() != n || Sigma.shape() != std::vector<std::size_t>{n, n}) {
    throw std::invalid_argument("gaussian_nll: dimension mismatch");
  }
  const double base = kJitterFactor * mean_diagonal(Sigma);
  RealTensor L;
  bool ok = false;
  for (int attempt = 0; attempt <= kJitterRetries && !ok; ++attempt) {
    L = Sigma;
    if (attempt > 0) {
      const double extra = base * std::pow(10.0, attempt);
      for (std::size_t i = 0; i < n; ++i) L.at(i, i) += extra;
    }
    ok = cholesky(L);
  }
  if (!ok) throw std::runtime_error("covariance not PD");
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = y[i] - mu[i];
  // forward substitution only: r' Sigma^{-1} r = |L^{-1} r|^2
  double quad = 0.0;
  double logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = z[i];
    for (std::size_t k = 0; k < i; ++k) acc -= L.at(i, k) * z[k];
    z[i] = acc / L.at(i, i);
    quad += z[i] * z[i];
    logdet += 2.0 * std::log(L.at(i, i));
  }
  return 0.5 * (quad + logdet + static_cast<double>(n) * kLog2Pi);
}

NllResult nll_sigma_gradients(std::span<const double> y, std::span<const double> mu,
                              std::span<const double> sigma, double alpha_r) {
  const std::size_t n = y.size();
  if (mu.size() != n || sigma.size() != n) {
    throw std::invalid_argument("nll_sigma_gradients: dimension mismatch");
  }
  NllResult res;
  RealTensor L;
  bool ok = false;
  for (int attempt = 0; attempt <= kJitterRetries && !ok; ++attempt) {
    res.jitter_factor = kJitterFactor * std::pow(10.0, attempt);
    L = build_covariance(sigma, alpha_r, res.jitter_factor);
    ok = cholesky(L);
  }
  if (!ok) throw std::runtime_error("covariance not PD");

  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = y[i] - mu[i];
  const std::vector<double> r = a;
  cholesky_solve(L, a);
  double quad = 0.0;
  double logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quad += r[i] * a[i];
    logdet += 2.0 * std::log(L.at(i, i));
  }
  res.nll = 0.5 * (quad + logdet + static_cast<double>(n) * kLog2Pi);

  res.grad_mu.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.grad_mu[i] = -a[i];

  // G = dNLL/dSigma = (Sigma^{-1} - a a') / 2
  const RealTensor inv = cholesky_inverse(L);
  res.grad_sigma.assign(n, 0.0);
  const double inv2a2 = 1.0 / (2.0 * alpha_r * alpha_r);
  const double a3 = alpha_r * alpha_r * alpha_r;
  double trace_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double G = 0.5 * (inv.at(i, j) - a[i] * a[j]);
      const double d = grid_distance(i, j, n);
      const double rho = std::exp(-d * d * inv2a2);
      res.grad_sigma[i] += 2.0 * G * sigma[j] * rho;
      res.grad_alpha_r += G * sigma[i] * sigma[j] * rho * d * d / a3;
      if (i == j) trace_g += G;
    }
  }
  // diagonal jitter = c * mean(sigma^2)
  const double jscale = res.jitter_factor * 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) res.grad_sigma[k] += trace_g * jscale * sigma[k];
  return res;
}

NllGradients nll_gradients(std::span<const double> y, std::span<const double> mu,
                           std::span<const double> y_k, const CovParams& alpha) {
  StddevTape tape;
  const auto sigma = stddev_field(y_k, alpha, &tape);
  auto res = nll_sigma_gradients(y, mu, sigma, alpha.alpha_r);
  NllGradients out;
  out.nll = res.nll;
  out.grad_mu = std::move(res.grad_mu);
  out.grad_alpha = stddev_backward(tape, alpha, res.grad_sigma);
  out.grad_alpha.alpha_r = res.grad_alpha_r;
  return out;
}

ForecastDist forecast_distribution(const HistoryWindow& w, const FnoParams& theta,
                                   const CovParams& alpha, const FnoConfig& cfg, bool keep_cov) {
  ForecastDist dist;
  dist.mean = fno_forward(w, theta, cfg);
  const auto sd = stddev_field(w.last_frame(), alpha);
  RealTensor cov = build_covariance(sd, alpha.alpha_r);
  dist.sigma.resize(sd.size());
  for (std::size_t i = 0; i < sd.size(); ++i) dist.sigma[i] = std::sqrt(cov.at(i, i));
  if (keep_cov) dist.cov = std::move(cov);
  return dist;
}

std::pair<std::vector<double>, std::vector<double>> prediction_interval(const ForecastDist& dist,
                                                                        double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("invalid level");
  const double z = normal_quantile(0.5 + 0.5 * level);
  std::vector<double> lo(dist.mean.size());
  std::vector<double> hi(dist.mean.size());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    lo[i] = dist.mean[i] - z * dist.sigma[i];
    hi[i] = dist.mean[i] + z * dist.sigma[i];
  }
  return {std::move(lo), std::move(hi)};
}

}  // namespace fdst
