#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fdst/likelihood.hpp"
#include "fdst/rng.hpp"
#include "fdst/special.hpp"

using namespace fdst;

namespace {

std::vector<double> normals(std::size_t n, CounterRng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

CovParams random_cov(std::size_t n, std::size_t hidden, std::uint64_t seed) {
  CovParams a = CovParams::zeros(n, hidden);
  CounterRng rng(seed);
  for (auto* t : {&a.W1, &a.b1, &a.W2, &a.b2}) {
    for (auto& x : t->storage()) x = 0.4 * rng.normal();
  }
  a.alpha_r = 0.08;
  return a;
}

// Gaussian elimination with partial pivoting: returns log|det A| and solves A x = b.
double dense_logdet_solve(std::vector<std::vector<double>> a, std::vector<double>& b) {
  const std::size_t n = a.size();
  double logdet = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    logdet += std::log(std::abs(a[c][c]));
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    for (std::size_t k = c + 1; k < n; ++k) b[c] -= a[c][k] * b[k];
    b[c] /= a[c][c];
  }
  return logdet;
}

double nll_of(std::span<const double> y, std::span<const double> mu, std::span<const double> yk,
              const CovParams& a) {
  const auto s = stddev_field(yk, a);
  return gaussian_nll(y, mu, build_covariance(s, a.alpha_r));
}

}  // namespace

TEST_CASE("stddev_field constant, positive and against a two-layer oracle") {
  const std::size_t n = 16, hidden = 5;
  const CovParams zero = CovParams::zeros(n, hidden);
  const std::vector<double> y(n, 0.3);
  for (double s : stddev_field(y, zero)) CHECK(s == doctest::Approx(std::log(2.0) + 1e-4));

  const CovParams a = random_cov(n, hidden, 3);
  CounterRng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    for (double s : stddev_field(normals(n, rng, 3.0), a)) CHECK(s > 0.0);
  }
  const auto yk = normals(n, rng);
  const auto got = stddev_field(yk, a);
  for (std::size_t i = 0; i < n; ++i) {
    double pre = a.b2[i];
    for (std::size_t j = 0; j < hidden; ++j) {
      double z = a.b1[j];
      for (std::size_t k = 0; k < n; ++k) z += a.W1.at(j, k) * yk[k];
      pre += a.W2.at(i, j) * std::tanh(z);
    }
    CHECK(got[i] == doctest::Approx(std::log1p(std::exp(pre)) + 1e-4).epsilon(1e-13));
  }
}

TEST_CASE("build_covariance diagonal, short range limit and factorization") {
  const std::vector<double> s = {0.5, 1.0, 2.0, 1.5};
  const auto S = build_covariance(s, 0.2);
  const double mean_sq = (0.25 + 1.0 + 4.0 + 2.25) / 4.0;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(S.at(i, i) == doctest::Approx(s[i] * s[i] + 1e-6 * mean_sq).epsilon(1e-15));
    for (std::size_t j = 0; j < 4; ++j) CHECK(S.at(i, j) == S.at(j, i));
  }
  // opposite points on the circle are a quarter turn apart either way
  CHECK(S.at(0, 2) == doctest::Approx(0.5 * 2.0 * std::exp(-0.25 / (2 * 0.04))).epsilon(1e-14));
  CHECK(S.at(0, 3) == S.at(0, 3));
  CHECK(S.at(0, 3) == doctest::Approx(0.5 * 1.5 * std::exp(-0.0625 / 0.08)).epsilon(1e-14));

  const auto T = build_covariance(s, 1e-9);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i != j) CHECK(T.at(i, j) < 1e-12 * s[i] * s[j]);
    }
  }

  CounterRng rng(5);
  int factored = 0;
  for (int d = 0; d < 100; ++d) {
    std::vector<double> sig(64);
    for (auto& x : sig) x = rng.uniform(0.01, 3.0);
    auto C = build_covariance(sig, rng.uniform(0.005, kAlphaRangeMax));
    // the NLL path escalates jitter when needed, so count through it
    const std::vector<double> zero(64, 0.0);
    if (std::isfinite(gaussian_nll(zero, zero, C))) ++factored;
  }
  CHECK(factored == 100);
}

TEST_CASE("cholesky reconstructs its input") {
  CounterRng rng(6);
  const std::size_t n = 10;
  RealTensor B({n, n});
  for (auto& x : B.storage()) x = rng.normal();
  RealTensor A({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += B.at(i, k) * B.at(j, k);
      A.at(i, j) = s;
    }
  }
  RealTensor L = A;
  REQUIRE(cholesky(L));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= std::min(i, j); ++k) s += L.at(i, k) * L.at(j, k);
      CHECK(std::abs(s - A.at(i, j)) < 1e-10);
    }
  }
  RealTensor neg({2, 2}, std::vector<double>{1.0, 2.0, 2.0, 1.0});
  CHECK_FALSE(cholesky(neg));
}

TEST_CASE("gaussian_nll closed forms and dense oracle") {
  RealTensor I2({2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  const std::vector<double> z2 = {0.3, -0.2};
  CHECK(gaussian_nll(z2, z2, I2) == doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(gaussian_nll(z2, z2, I2) == doctest::Approx(1.8379).epsilon(1e-4));
  RealTensor one({1, 1}, 1.0);
  const std::vector<double> y1 = {1.0}, m1 = {0.0};
  CHECK(gaussian_nll(y1, m1, one) == doctest::Approx(1.4189).epsilon(1e-4));

  const std::size_t n = 8;
  CounterRng rng(7);
  std::vector<double> sig(n);
  for (auto& s : sig) s = rng.uniform(0.3, 2.0);
  const auto S = build_covariance(sig, 0.1);
  const auto y = normals(n, rng), mu = normals(n, rng);
  std::vector<std::vector<double>> dense(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dense[i][j] = S.at(i, j);
  }
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - mu[i];
  std::vector<double> x = r;
  const double logdet = dense_logdet_solve(dense, x);
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) quad += r[i] * x[i];
  const double want = 0.5 * (quad + logdet + n * std::log(2.0 * std::numbers::pi));
  CHECK(gaussian_nll(y, mu, S) == doctest::Approx(want).epsilon(1e-9));

  // permuting everything together leaves the value unchanged
  const std::vector<std::size_t> perm = {3, 0, 7, 1, 6, 2, 5, 4};
  std::vector<double> yp(n), mp(n);
  RealTensor Sp({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    yp[i] = y[perm[i]];
    mp[i] = mu[perm[i]];
    for (std::size_t j = 0; j < n; ++j) Sp.at(i, j) = S.at(perm[i], perm[j]);
  }
  CHECK(gaussian_nll(yp, mp, Sp) == doctest::Approx(gaussian_nll(y, mu, S)).epsilon(1e-12));

  RealTensor bad({2, 2}, std::vector<double>{1.0, 0.0, 0.0, -1.0});
  CHECK_THROWS_WITH(gaussian_nll(z2, z2, bad), "covariance not PD");
}

TEST_CASE("nll gradients agree with central differences") {
  const std::size_t n = 16;
  CounterRng rng(8);
  CovParams a = random_cov(n, 6, 9);
  const auto y = normals(n, rng), mu = normals(n, rng), yk = normals(n, rng);

  const auto same = nll_gradients(mu, mu, yk, a);
  for (double g : same.grad_mu) CHECK(g == 0.0);

  const auto g = nll_gradients(y, mu, yk, a);
  CHECK(g.nll == doctest::Approx(nll_of(y, mu, yk, a)).epsilon(1e-12));
  const double h = 1e-5;
  for (std::size_t i = 0; i < n; ++i) {
    auto up = mu, dn = mu;
    up[i] += h;
    dn[i] -= h;
    const double fd = (nll_of(y, up, yk, a) - nll_of(y, dn, yk, a)) / (2 * h);
    CHECK(std::abs(fd - g.grad_mu[i]) <= 1e-6 * std::max(std::abs(g.grad_mu[i]), 1e-3));
  }

  std::vector<std::span<const double>> grads;
  g.grad_alpha.for_each_block([&](const std::string&, std::span<const double> xs) { grads.push_back(xs); });
  std::vector<std::span<double>> blocks;
  CovParams probe = a;
  probe.for_each_block([&](const std::string&, std::span<double> xs) { blocks.push_back(xs); });
  REQUIRE(blocks.size() == grads.size());
  double worst = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double x0 = blocks[b][i];
      blocks[b][i] = x0 + h;
      const double up = nll_of(y, mu, yk, probe);
      blocks[b][i] = x0 - h;
      const double dn = nll_of(y, mu, yk, probe);
      blocks[b][i] = x0;
      const double fd = (up - dn) / (2 * h);
      if (std::abs(grads[b][i]) > 1e-8) {
        worst = std::max(worst, std::abs(fd - grads[b][i]) / std::abs(grads[b][i]));
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("forecast distribution composes the pieces") {
  FnoConfig c;
  c.n = 16;
  c.dv = 4;
  c.layers = 1;
  c.modes_space = 4;
  c.modes_time = 2;
  const auto theta = init_params(c, 3);
  const auto alpha = random_cov(c.n, 4, 4);
  HistoryWindow w;
  w.frames = RealTensor({c.frames(), c.n});
  CounterRng rng(5);
  for (auto& x : w.frames.storage()) x = rng.normal();
  const auto d = forecast_distribution(w, theta, alpha, c);
  CHECK(d.mean == fno_forward(w, theta, c));
  const auto again = forecast_distribution(w, theta, alpha, c);
  CHECK(d.sigma == again.sigma);
  REQUIRE(d.cov.has_value());
  for (std::size_t i = 0; i < c.n; ++i) {
    CHECK(d.sigma[i] > 0.0);
    CHECK(d.sigma[i] == doctest::Approx(std::sqrt(d.cov->at(i, i))).epsilon(1e-15));
  }
}

TEST_CASE("prediction intervals use the normal quantile") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.05) == doctest::Approx(-1.6448536269514729).epsilon(1e-9));
  ForecastDist d;
  d.mean = {0.0, 1.0};
  d.sigma = {1.0, 0.5};
  const auto [lo, hi] = prediction_interval(d, 0.95);
  CHECK(lo[0] == doctest::Approx(-1.96).epsilon(1e-3));
  CHECK(hi[0] == doctest::Approx(1.96).epsilon(1e-3));
  CHECK(hi[1] - lo[1] == doctest::Approx(2 * 1.959964 * 0.5).epsilon(1e-6));
  CHECK_THROWS(prediction_interval(d, 1.0));
  CHECK_THROWS(prediction_interval(d, 0.0));
}

TEST_CASE("interval coverage on correlated Gaussian draws") {
  const std::size_t n = 10, draws = 10000;
  std::vector<double> sig(n);
  for (std::size_t i = 0; i < n; ++i) sig[i] = 0.5 + 0.1 * i;
  RealTensor L = build_covariance(sig, 0.08);
  ForecastDist d;
  d.mean.assign(n, 0.25);
  for (std::size_t i = 0; i < n; ++i) d.sigma.push_back(std::sqrt(L.at(i, i)));
  REQUIRE(cholesky(L));
  const auto [lo, hi] = prediction_interval(d);
  CounterRng rng(11);
  std::size_t inside = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    const auto z = normals(n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      double x = d.mean[i];
      for (std::size_t j = 0; j <= i; ++j) x += L.at(i, j) * z[j];
      inside += (x >= lo[i] && x <= hi[i]);
    }
  }
  const double cov = static_cast<double>(inside) / (n * draws);
  CHECK(std::abs(cov - 0.95) < 0.005);
}
