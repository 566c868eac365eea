#include "fdst/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fdst {

namespace {

thread_local double g_last_imag_residue = 0.0;

void require_power_of_two(std::size_t n) {
  if (!is_power_of_two(n)) throw std::invalid_argument("fft size must be 2^q");
}

// Twiddles exp(-2 pi i k / n) for k < n/2, each computed directly rather than by
// recurrence. Cached per thread and per size.
const std::vector<cplx>& twiddles(std::size_t n) {
  thread_local std::vector<std::vector<cplx>> cache(64);
  auto& w = cache[static_cast<std::size_t>(std::countr_zero(n))];
  if (w.size() != n / 2) {
    w.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      w[k] = {std::cos(a), std::sin(a)};
    }
  }
  return w;
}

template <typename Access>
void radix2(std::size_t n, bool inverse, Access&& at) {
  if (n <= 1) return;
  const unsigned bits = static_cast<unsigned>(std::countr_zero(n));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (unsigned b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    if (i < r) std::swap(at(i), at(r));
  }
  const auto& w = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t j = 0; j < half; ++j) {
        cplx tw = w[j * step];
        if (inverse) tw = std::conj(tw);
        cplx& a = at(start + j);
        cplx& b = at(start + j + half);
        const cplx t = b * tw;
        b = a - t;
        a = a + t;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) at(i) *= scale;
  }
}

ComplexTensor transform_axes(const ComplexTensor& t, std::span<const std::size_t> axes,
                             bool inverse) {
  ComplexTensor out = t;
  auto& buf = out.storage();
  for (auto axis : axes) {
    if (axis >= t.rank()) throw std::invalid_argument("fft axis out of range");
    const std::size_t m = t.extent(axis);
    require_power_of_two(m);
    const std::size_t stride = t.stride(axis);
    const std::size_t block = stride * m;
    for (std::size_t outer = 0; outer < buf.size(); outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        fft_strided(buf, outer + inner, stride, m, inverse);
      }
    }
  }
  return out;
}

}  // namespace

void FreqGrid::validate() const {
  if (m.size() != m_tilde.size()) throw std::invalid_argument("FreqGrid axis count mismatch");
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (m_tilde[j] < 1 || m_tilde[j] > m[j]) {
      throw std::invalid_argument("retained modes must satisfy 1 <= m_tilde <= m");
    }
    require_power_of_two(m[j]);
  }
}

bool is_power_of_two(std::size_t n) { return n != 0 && std::has_single_bit(n); }

std::size_t next_power_of_two(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double v) { return std::isfinite(v); });
}

bool all_finite(std::span<const cplx> xs) {
  return std::all_of(xs.begin(), xs.end(), [](const cplx& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

std::vector<cplx> dft_naive(std::span<const cplx> x) {
  if (x.empty()) throw std::invalid_argument("empty signal");
  const std::size_t m = x.size();
  std::vector<cplx> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < m; ++j) {
      // reduce k*j mod m first so the angle stays small and exact
      const double a = -2.0 * std::numbers::pi * static_cast<double>((k * j) % m) /
                       static_cast<double>(m);
      acc += x[j] * cplx{std::cos(a), std::sin(a)};
    }
    out[k] = acc;
  }
  return out;
}

void fft_inplace(std::span<cplx> x, bool inverse) {
  require_power_of_two(x.size());
  radix2(x.size(), inverse, [&](std::size_t i) -> cplx& { return x[i]; });
}

void fft_strided(std::vector<cplx>& buf, std::size_t offset, std::size_t stride,
                 std::size_t count, bool inverse) {
  require_power_of_two(count);
  radix2(count, inverse, [&](std::size_t i) -> cplx& { return buf[offset + i * stride]; });
}

std::vector<cplx> fft(std::span<const cplx> x) {
  std::vector<cplx> out(x.begin(), x.end());
  fft_inplace(out, false);
  return out;
}

std::vector<cplx> ifft(std::span<const cplx> x) {
  std::vector<cplx> out(x.begin(), x.end());
  fft_inplace(out, true);
  return out;
}

ComplexTensor fft_nd(const ComplexTensor& t, std::span<const std::size_t> axes) {
  return transform_axes(t, axes, false);
}

ComplexTensor ifft_nd(const ComplexTensor& t, std::span<const std::size_t> axes) {
  return transform_axes(t, axes, true);
}

ComplexTensor to_complex(const RealTensor& t) {
  std::vector<cplx> data(t.data().begin(), t.data().end());
  return ComplexTensor(t.shape(), std::move(data));
}

ComplexTensor rfft_last_axis(const RealTensor& t) {
  if (t.rank() == 0) throw std::invalid_argument("empty signal");
  const std::size_t m = t.shape().back();
  require_power_of_two(m);
  const std::size_t half = m / 2 + 1;
  const std::size_t rows = t.size() / m;
  auto shape = t.shape();
  shape.back() = half;
  ComplexTensor out(shape);
  std::vector<cplx> row(m);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) row[j] = t[r * m + j];
    fft_inplace(row, false);
    for (std::size_t k = 0; k < half; ++k) out[r * half + k] = row[k];
  }
  return out;
}

RealTensor irfft_last_axis(const ComplexTensor& t, std::size_t m) {
  require_power_of_two(m);
  const std::size_t half = m / 2 + 1;
  if (t.rank() == 0 || t.shape().back() != half) {
    throw std::invalid_argument("half spectrum length must be m/2+1");
  }
  const std::size_t rows = t.size() / half;
  auto shape = t.shape();
  shape.back() = m;
  RealTensor out(shape);
  std::vector<cplx> row(m);
  double residue = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      row[k] = k < half ? t[r * half + k] : std::conj(t[r * half + (m - k)]);
    }
    fft_inplace(row, true);
    for (std::size_t j = 0; j < m; ++j) {
      out[r * m + j] = row[j].real();
      residue = std::max(residue, std::abs(row[j].imag()));
    }
  }
  g_last_imag_residue = residue;
  return out;
}

double last_irfft_imag_residue() { return g_last_imag_residue; }

}  // namespace fdst
