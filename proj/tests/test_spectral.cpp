#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fdst/rng.hpp"
#include "fdst/spectral.hpp"

using namespace fdst;

namespace {

// Independent double loop, written without sharing code with dft_naive.
std::vector<cplx> loop_dft(const std::vector<cplx>& x, int sign) {
  const std::size_t m = x.size();
  std::vector<cplx> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t j = 0; j < m; ++j) {
      const long double ang = sign * 2.0L * std::numbers::pi_v<long double> *
                              static_cast<long double>((k * j) % m) / static_cast<long double>(m);
      re += x[j].real() * std::cos(ang) - x[j].imag() * std::sin(ang);
      im += x[j].real() * std::sin(ang) + x[j].imag() * std::cos(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

std::vector<cplx> random_signal(std::size_t m, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<cplx> x(m);
  for (auto& z : x) z = {rng.normal(), rng.normal()};
  return x;
}

double max_rel(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double d = 0.0, s = 1e-12;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a[i] - b[i]));
    s = std::max(s, std::abs(b[i]));
  }
  return d / s;
}

}  // namespace

TEST_CASE("dft_naive on constant and delta signals") {
  const std::vector<cplx> ones(4, 1.0);
  const auto c = dft_naive(ones);
  CHECK(std::abs(c[0] - cplx(4.0)) < 1e-14);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(c[k]) < 1e-14);

  const std::vector<cplx> delta = {1.0, 0.0, 0.0, 0.0};
  for (const auto& z : dft_naive(delta)) CHECK(std::abs(z - cplx(1.0)) < 1e-14);
  CHECK_THROWS_WITH(dft_naive(std::vector<cplx>{}), "empty signal");
}

TEST_CASE("dft_naive agrees with an independent loop for length 8") {
  const auto x = random_signal(8, 3);
  CHECK(max_rel(dft_naive(x), loop_dft(x, -1)) < 1e-14);
}

TEST_CASE("fft matches the loop oracle at length 1024") {
  const auto x = random_signal(1024, 5);
  CHECK(max_rel(fft(x), loop_dft(x, -1)) < 1e-10);
}

TEST_CASE("fft rejects lengths that are not powers of two") {
  CHECK_THROWS_WITH(fft(std::vector<cplx>(6)), "fft size must be 2^q");
  CHECK_THROWS_WITH(ifft(std::vector<cplx>(12)), "fft size must be 2^q");
}

TEST_CASE("ifft of a DC spike is constant and round trips hold") {
  const std::vector<cplx> spike = {4.0, 0.0, 0.0, 0.0};
  for (const auto& z : ifft(spike)) CHECK(std::abs(z - cplx(1.0)) < 1e-14);
  const auto x = random_signal(64, 9);
  const auto y = fft(ifft(x));
  const auto z = ifft(fft(x));
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(y[i] - x[i]) < 1e-10);
    CHECK(std::abs(z[i] - x[i]) < 1e-10);
  }
}

TEST_CASE("Parseval, linearity and shift theorem") {
  const std::size_t m = 128;
  const auto x = random_signal(m, 11);
  const auto y = random_signal(m, 12);
  const auto X = fft(x);
  const auto Y = fft(y);
  double ex = 0.0, eX = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ex += std::norm(x[i]);
    eX += std::norm(X[i]);
  }
  CHECK(std::abs(ex - eX / m) < 1e-9 * ex);

  const cplx a(0.3, -1.2), b(2.0, 0.5);
  std::vector<cplx> lin(m);
  for (std::size_t i = 0; i < m; ++i) lin[i] = a * x[i] + b * y[i];
  const auto L = fft(lin);
  for (std::size_t k = 0; k < m; ++k) CHECK(std::abs(L[k] - (a * X[k] + b * Y[k])) < 1e-10 * 50);

  const std::size_t shift = 7;
  std::vector<cplx> xs(m);
  for (std::size_t i = 0; i < m; ++i) xs[(i + shift) % m] = x[i];
  const auto XS = fft(xs);
  for (std::size_t k = 0; k < m; ++k) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * shift) / m;
    CHECK(std::abs(XS[k] - X[k] * std::polar(1.0, ang)) < 1e-9);
  }
}

TEST_CASE("fft_nd on a constant tensor and against nested loops") {
  ComplexTensor c({4, 4}, cplx(1.0));
  const std::size_t both[] = {0, 1};
  const auto C = fft_nd(c, both);
  CHECK(std::abs(C[0] - cplx(16.0)) < 1e-13);
  for (std::size_t i = 1; i < 16; ++i) CHECK(std::abs(C[i]) < 1e-13);

  const auto flat = random_signal(64, 21);
  ComplexTensor t({8, 8}, flat);
  const auto T = fft_nd(t, both);
  const std::size_t rev[] = {1, 0};
  const auto T2 = fft_nd(t, rev);
  // rows then columns with the loop oracle
  std::vector<cplx> stage(64);
  for (std::size_t r = 0; r < 8; ++r) {
    std::vector<cplx> row(flat.begin() + r * 8, flat.begin() + r * 8 + 8);
    const auto R = loop_dft(row, -1);
    for (std::size_t j = 0; j < 8; ++j) stage[r * 8 + j] = R[j];
  }
  std::vector<cplx> expect(64);
  for (std::size_t j = 0; j < 8; ++j) {
    std::vector<cplx> col(8);
    for (std::size_t r = 0; r < 8; ++r) col[r] = stage[r * 8 + j];
    const auto Cc = loop_dft(col, -1);
    for (std::size_t r = 0; r < 8; ++r) expect[r * 8 + j] = Cc[r];
  }
  CHECK(max_rel(T.storage(), expect) < 1e-10);
  CHECK(max_rel(T2.storage(), T.storage()) < 1e-10);
  const auto back = ifft_nd(T, both);
  CHECK(max_rel(back.storage(), flat) < 1e-10);
}

TEST_CASE("rfft_last_axis keeps the half spectrum and inverts") {
  RealTensor c({1, 4}, 2.5);
  const auto C = rfft_last_axis(c);
  REQUIRE(C.extent(1) == 3);
  CHECK(std::abs(C[0] - cplx(10.0)) < 1e-14);
  CHECK(std::abs(C[1]) < 1e-14);
  CHECK(std::abs(C[2]) < 1e-14);

  CounterRng rng(31);
  RealTensor x({3, 8});
  for (auto& v : x.storage()) v = rng.normal();
  const auto X = rfft_last_axis(x);
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<cplx> row(8);
    for (std::size_t j = 0; j < 8; ++j) row[j] = x.at(r, j);
    const auto full = loop_dft(row, -1);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(X.at(r, k) - full[k]) < 1e-12);
  }
  const auto y = irfft_last_axis(X, 8);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-10);
  CHECK(last_irfft_imag_residue() < 1e-10);
}

TEST_CASE("power-of-two helpers") {
  CHECK(is_power_of_two(1));
  CHECK(is_power_of_two(1024));
  CHECK_FALSE(is_power_of_two(0));
  CHECK_FALSE(is_power_of_two(12));
  CHECK(next_power_of_two(5) == 8);
  CHECK(next_power_of_two(8) == 8);
  CHECK(next_power_of_two(1) == 1);
}
