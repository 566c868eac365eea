#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdst/tensor.hpp"

namespace fdst {

struct FnoConfig {
  std::size_t d = 1;
  std::size_t tau = 4;
  std::size_t h = 5;
  double delta = 0.1;
  std::size_t n = 64;
  std::size_t dv = 16;
  std::size_t layers = 3;
  std::size_t modes_space = 16;
  std::size_t modes_time = 4;

  std::size_t frames() const { return tau + 1; }
  /// Time extent after zero padding to a power of two.
  std::size_t time_pad() const;
  std::size_t kept_space() const { return 2 * modes_space; }
  void validate() const;
  /// Everything except the dv > d + 2 width rule, so tiny networks can be
  /// built for derivative checks.
  void validate_shapes() const;
  bool operator==(const FnoConfig&) const = default;
};

struct FnoLayer {
  RealTensor A;     // dv x dv
  RealTensor b;     // dv
  ComplexTensor F;  // dv x dv x (2 modes_space) x modes_time
};

/// Trainable operator parameters. Also used to hold their gradients.
struct FnoParams {
  RealTensor H_P;  // dv x (d + 2), columns act on (s, t, Y)
  RealTensor b_P;  // dv
  std::vector<FnoLayer> layers;
  RealTensor h_Q;  // dv
  double b_Q = 0.0;

  /// Same shapes, all zero.
  static FnoParams zeros(const FnoConfig& cfg);

  /// Visits every parameter block as a flat real span. Complex tensors are
  /// exposed as interleaved (re, im) pairs. Order is fixed.
  void for_each_block(const std::function<void(const std::string&, std::span<double>)>& fn);
  void for_each_block(
      const std::function<void(const std::string&, std::span<const double>)>& fn) const;
  std::size_t parameter_count() const;
};

struct HistoryWindow {
  RealTensor frames;           // (tau + 1) x n
  std::vector<double> target;  // n, empty when forecasting
  std::size_t instance = 0;
  std::size_t k = 0;  // 1-based index of the last conditioning frame

  std::span<const double> last_frame() const {
    const std::size_t n = frames.extent(1);
    return frames.data().subspan((frames.extent(0) - 1) * n, n);
  }
};

/// Per-layer spectral data and activations kept for the reverse pass.
struct FnoTape {
  RealTensor input;                 // (tau + 1) x n
  std::vector<RealTensor> act;      // act[0] = lift, act[l] = layer l output
  std::vector<ComplexTensor> spec;  // spec[l] = retained spectrum of act[l]
  double imag_residue = 0.0;
  bool valid = false;
};

struct FnoGradients {
  FnoParams params;
  RealTensor input;  // d loss / d frames
};

RealTensor lift(const RealTensor& frames, const RealTensor& H_P, const RealTensor& b_P,
                const FnoConfig& cfg);
RealTensor local_linear(const RealTensor& v, const RealTensor& A, const RealTensor& b);

/// Truncated spectral multiplication over (time, space) for a dv x (tau+1) x n
/// tensor. Time is zero padded to time_pad(); the first modes_time real-FFT
/// modes and the modes_space lowest positive and negative spatial modes are
/// kept. `spectrum_out`, if given, receives the retained input spectrum
/// (dv x modes_time x 2 modes_space). `imag_residue`, if given, receives the
/// largest imaginary part left after inverting the conjugate-symmetric rows.
RealTensor spectral_conv(const RealTensor& v, const ComplexTensor& F, const FnoConfig& cfg,
                         ComplexTensor* spectrum_out = nullptr, double* imag_residue = nullptr);

/// Adjoint of spectral_conv with respect to its input and weights.
void spectral_conv_backward(const RealTensor& grad_out, const ComplexTensor& spectrum,
                            const ComplexTensor& F, const FnoConfig& cfg, RealTensor& grad_in,
                            ComplexTensor& grad_F);

/// Spatial frequency of retained slot j (0 <= j < 2 modes_space).
std::size_t kept_space_frequency(std::size_t j, const FnoConfig& cfg);

/// Forecast for the target frame: projected field at the last time index.
std::vector<double> fno_forward(const RealTensor& frames, const FnoParams& theta,
                                const FnoConfig& cfg, FnoTape* tape = nullptr);
std::vector<double> fno_forward(const HistoryWindow& w, const FnoParams& theta,
                                const FnoConfig& cfg, FnoTape* tape = nullptr);

FnoGradients fno_backward(const FnoTape& tape, const FnoParams& theta, const FnoConfig& cfg,
                          std::span<const double> upstream);

FnoParams init_params(const FnoConfig& cfg, std::uint64_t seed);

/// Test hook: when set, fno_backward returns a deliberately wrong gradient.
void set_backward_fault(bool enabled);

}  // namespace fdst
