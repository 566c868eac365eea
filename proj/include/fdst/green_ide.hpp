#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fdst/tensor.hpp"

namespace fdst {

struct GammaParams {
  double gamma1 = 0.0;  // advection velocity
  double gamma2 = 1.0;  // diffusivity, > 0
};

/// Discretized Green's function on the periodic grid {0, 1/n, ...}.
struct Propagator {
  RealTensor matrix;  // n x n
  double h_delta = 0.0;
  double spacing = 0.0;

  std::size_t n() const { return matrix.extent(0); }
  /// Largest |row sum - 1|.
  double row_sum_defect() const;
};

/// Advection-diffusion Green's function in d dimensions:
/// (4 pi g2 tau)^{-d/2} exp(-|r - tau g1 1|^2 / (4 g2 tau)).
double green_kernel(std::span<const double> r, double tau, const GammaParams& p);
double green_kernel(double r, double tau, const GammaParams& p);

/// Same kernel (d = 1) from its Fourier integral
/// (1/2pi) int exp(i k r - i g1 tau k - g2 tau k^2) dk, evaluated with composite
/// Simpson on |k| <= 8/sqrt(g2 tau), doubling nodes until successive values
/// agree to 1e-9.
double green_kernel_quadrature(double r, double tau, const GammaParams& p);

/// Entries g(s_i - s_j, h_delta) * (1/n) with minimum-image distances. Throws
/// if the kernel standard deviation sqrt(2 g2 h_delta) is below two cells.
Propagator build_propagator(std::size_t n, double h_delta, const GammaParams& p);

std::vector<double> ide_forecast(std::span<const double> y, const Propagator& prop);

/// Signed periodic offset (a - b) wrapped into [-1/2, 1/2).
double periodic_offset(double a, double b);

}  // namespace fdst
