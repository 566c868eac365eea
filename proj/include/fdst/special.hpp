#pragma once

namespace fdst {

double bessel_k0(double x);
double bessel_k1(double x);
/// K_2 from the upward recurrence K_2 = K_0 + (2/x) K_1.
double bessel_k2(double x);
/// Modified Bessel function of the second kind for arbitrary order nu >= 0.
double bessel_k(double nu, double x);

/// Standard normal quantile. Rational approximation refined by one Halley
/// step against erfc; absolute error well below 1e-8 on (0, 1).
double normal_quantile(double p);
double normal_cdf(double x);

double softplus(double x);
/// Derivative of softplus, i.e. the logistic function.
double logistic(double x);

}  // namespace fdst
