#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fdst/tensor.hpp"

namespace fdst {

/// Per-axis grid sizes and the number of retained Fourier modes on each axis.
struct FreqGrid {
  std::vector<std::size_t> m;
  std::vector<std::size_t> m_tilde;

  void validate() const;
};

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

/// Direct O(m^2) transform U(k) = sum_x u(x) exp(-2 pi i k x / m).
std::vector<cplx> dft_naive(std::span<const cplx> x);

/// Radix-2 Cooley-Tukey. Forward is unnormalized; inverse carries 1/m.
std::vector<cplx> fft(std::span<const cplx> x);
std::vector<cplx> ifft(std::span<const cplx> x);

/// In-place variants; `inverse` applies the conjugate twiddles and 1/m.
void fft_inplace(std::span<cplx> x, bool inverse = false);

/// Strided in-place transform of `count` elements starting at `offset`.
void fft_strided(std::vector<cplx>& buf, std::size_t offset, std::size_t stride,
                 std::size_t count, bool inverse);

ComplexTensor fft_nd(const ComplexTensor& t, std::span<const std::size_t> axes);
ComplexTensor ifft_nd(const ComplexTensor& t, std::span<const std::size_t> axes);

/// Half spectrum of the last axis: keeps m/2+1 modes.
ComplexTensor rfft_last_axis(const RealTensor& t);

/// Inverse of rfft_last_axis. `m` is the full length of the last axis,
/// since m/2+1 modes do not determine it uniquely.
RealTensor irfft_last_axis(const ComplexTensor& t, std::size_t m);

/// Largest |imag| seen by the most recent irfft_last_axis call on this thread.
double last_irfft_imag_residue();

ComplexTensor to_complex(const RealTensor& t);

}  // namespace fdst
