#include "fdst/green_ide.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fdst {

namespace {

void check_kernel_args(double tau, const GammaParams& p) {
  if (!(tau > 0.0) || !(p.gamma2 > 0.0)) throw std::invalid_argument("degenerate kernel");
}

double simpson_real_part(double r, double tau, const GammaParams& p, double kmax,
                         std::size_t nodes) {
  // nodes is odd; the integrand's real part is cos(k (r - g1 tau)) exp(-g2 tau k^2)
  const double h = 2.0 * kmax / static_cast<double>(nodes - 1);
  const double shift = r - p.gamma1 * tau;
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double k = -kmax + h * static_cast<double>(i);
    const double f = std::cos(k * shift) * std::exp(-p.gamma2 * tau * k * k);
    const double w = (i == 0 || i == nodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  return acc * h / 3.0 / (2.0 * std::numbers::pi);
}

}  // namespace

double periodic_offset(double a, double b) {
  double d = a - b;
  d -= std::floor(d + 0.5);
  return d;
}

double green_kernel(std::span<const double> r, double tau, const GammaParams& p) {
  check_kernel_args(tau, p);
  const double d = static_cast<double>(r.size());
  double sq = 0.0;
  for (double ri : r) {
    const double e = ri - tau * p.gamma1;
    sq += e * e;
  }
  return std::pow(4.0 * std::numbers::pi * p.gamma2 * tau, -0.5 * d) *
         std::exp(-sq / (4.0 * p.gamma2 * tau));
}

double green_kernel(double r, double tau, const GammaParams& p) {
  return green_kernel(std::span<const double>(&r, 1), tau, p);
}

double green_kernel_quadrature(double r, double tau, const GammaParams& p) {
  check_kernel_args(tau, p);
  const double kmax = 8.0 / std::sqrt(p.gamma2 * tau);
  std::size_t nodes = 4097;
  double prev = simpson_real_part(r, tau, p, kmax, nodes);
  for (int round = 0; round < 12; ++round) {
    nodes = 2 * nodes - 1;
    const double cur = simpson_real_part(r, tau, p, kmax, nodes);
    if (std::abs(cur - prev) < 1e-9) return cur;
    prev = cur;
  }
  throw std::runtime_error("green_kernel_quadrature did not converge");
}

Propagator build_propagator(std::size_t n, double h_delta, const GammaParams& p) {
  check_kernel_args(h_delta, p);
  const double spacing = 1.0 / static_cast<double>(n);
  if (std::sqrt(2.0 * p.gamma2 * h_delta) < 2.0 * spacing) {
    throw std::invalid_argument("kernel narrower than grid");
  }
  Propagator prop;
  prop.matrix = RealTensor({n, n});
  prop.h_delta = h_delta;
  prop.spacing = spacing;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double r = periodic_offset(static_cast<double>(i) * spacing,
                                       static_cast<double>(j) * spacing);
      prop.matrix.at(i, j) = green_kernel(r, h_delta, p) * spacing;
    }
  }
  return prop;
}

double Propagator::row_sum_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n(); ++j) s += matrix.at(i, j);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

std::vector<double> ide_forecast(std::span<const double> y, const Propagator& prop) {
  const std::size_t n = prop.n();
  if (y.size() != n) throw std::invalid_argument("ide_forecast: dimension mismatch");
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += prop.matrix.at(i, j) * y[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace fdst
