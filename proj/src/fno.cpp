#include "fdst/fno.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fdst/rng.hpp"
#include "fdst/spectral.hpp"

namespace fdst {

namespace {

std::atomic<bool> g_backward_fault{false};

// exp(sign * 2 pi i k t / m)
cplx unit_root(std::size_t k, std::size_t t, std::size_t m, double sign) {
  const double a = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % m) /
                   static_cast<double>(m);
  return {std::cos(a), std::sin(a)};
}

// Weight of half-spectrum mode k in a length-m real inverse transform.
double half_spectrum_weight(std::size_t k, std::size_t m) {
  return (k == 0 || 2 * k == m) ? 1.0 : 2.0;
}

bool hermitian_row(std::size_t k, std::size_t m) { return k == 0 || 2 * k == m; }

void check_shape(const RealTensor& t, std::initializer_list<std::size_t> shape, const char* what) {
  if (t.shape() != std::vector<std::size_t>(shape)) {
    throw std::invalid_argument(std::string("shape mismatch: ") + what);
  }
}

std::span<double> as_reals(std::span<cplx> xs) {
  return {reinterpret_cast<double*>(xs.data()), xs.size() * 2};
}

}  // namespace

std::size_t FnoConfig::time_pad() const { return next_power_of_two(frames()); }

void FnoConfig::validate() const {
  if (dv <= d + 2) throw std::invalid_argument("channel width dv must exceed d + 2");
  validate_shapes();
}

void FnoConfig::validate_shapes() const {
  if (d != 1) throw std::invalid_argument("only one spatial dimension is supported");
  if (dv < 1) throw std::invalid_argument("channel width dv must be positive");
  if (!is_power_of_two(n)) throw std::invalid_argument("grid size n must be a power of two");
  if (layers < 1) throw std::invalid_argument("at least one layer is required");
  if (h < 1) throw std::invalid_argument("forecast horizon h must be at least 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (modes_space < 1 || modes_space > n / 2) {
    throw std::invalid_argument("modes_space must lie in [1, n/2]");
  }
  const std::size_t max_time = std::min(frames(), time_pad() / 2 + 1);
  if (modes_time < 1 || modes_time > max_time) {
    throw std::invalid_argument("modes_time must lie in [1, min(tau+1, pad/2+1)]");
  }
}

FnoParams FnoParams::zeros(const FnoConfig& cfg) {
  FnoParams p;
  p.H_P = RealTensor({cfg.dv, cfg.d + 2});
  p.b_P = RealTensor({cfg.dv});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.layers.push_back({RealTensor({cfg.dv, cfg.dv}), RealTensor({cfg.dv}),
                        ComplexTensor({cfg.dv, cfg.dv, cfg.kept_space(), cfg.modes_time})});
  }
  p.h_Q = RealTensor({cfg.dv});
  p.b_Q = 0.0;
  return p;
}

void FnoParams::for_each_block(
    const std::function<void(const std::string&, std::span<double>)>& fn) {
  fn("H_P", H_P.data());
  fn("b_P", b_P.data());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto tag = std::to_string(l);
    fn("A_W." + tag, layers[l].A.data());
    fn("b_W." + tag, layers[l].b.data());
    fn("F_K." + tag, as_reals(layers[l].F.data()));
  }
  fn("h_Q", h_Q.data());
  fn("b_Q", std::span<double>(&b_Q, 1));
}

void FnoParams::for_each_block(
    const std::function<void(const std::string&, std::span<const double>)>& fn) const {
  const_cast<FnoParams*>(this)->for_each_block(
      [&](const std::string& name, std::span<double> xs) { fn(name, xs); });
}

std::size_t FnoParams::parameter_count() const {
  std::size_t total = 0;
  for_each_block([&](const std::string&, std::span<const double> xs) { total += xs.size(); });
  return total;
}

std::size_t kept_space_frequency(std::size_t j, const FnoConfig& cfg) {
  return j < cfg.modes_space ? j : cfg.n - cfg.kept_space() + j;
}

RealTensor lift(const RealTensor& frames, const RealTensor& H_P, const RealTensor& b_P,
                const FnoConfig& cfg) {
  const std::size_t P = cfg.frames();
  const std::size_t n = cfg.n;
  const std::size_t dv = cfg.dv;
  check_shape(frames, {P, n}, "history frames");
  check_shape(H_P, {dv, cfg.d + 2}, "H_P");
  check_shape(b_P, {dv}, "b_P");
  RealTensor v({dv, P, n});
  for (std::size_t c = 0; c < dv; ++c) {
    const double hs = H_P.at(c, 0);
    const double ht = H_P.at(c, 1);
    const double hy = H_P.at(c, 2);
    for (std::size_t t = 0; t < P; ++t) {
      const double tc = static_cast<double>(t) * cfg.delta;
      for (std::size_t s = 0; s < n; ++s) {
        const double sc = static_cast<double>(s) / static_cast<double>(n);
        v.at(c, t, s) = hs * sc + ht * tc + hy * frames.at(t, s) + b_P[c];
      }
    }
  }
  return v;
}

RealTensor local_linear(const RealTensor& v, const RealTensor& A, const RealTensor& b) {
  if (v.rank() != 3) throw std::invalid_argument("shape mismatch: activation must be rank 3");
  const std::size_t dv = v.extent(0);
  const std::size_t pts = v.extent(1) * v.extent(2);
  check_shape(A, {dv, dv}, "A_W");
  check_shape(b, {dv}, "b_W");
  RealTensor out(v.shape());
  const double* in = v.data().data();
  double* o = out.data().data();
  for (std::size_t r = 0; r < dv; ++r) {
    double* orow = o + r * pts;
    for (std::size_t x = 0; x < pts; ++x) orow[x] = b[r];
    for (std::size_t c = 0; c < dv; ++c) {
      const double a = A.at(r, c);
      const double* irow = in + c * pts;
      for (std::size_t x = 0; x < pts; ++x) orow[x] += a * irow[x];
    }
  }
  return out;
}

RealTensor spectral_conv(const RealTensor& v, const ComplexTensor& F, const FnoConfig& cfg,
                         ComplexTensor* spectrum_out, double* imag_residue) {
  const std::size_t dv = cfg.dv;
  const std::size_t P = cfg.frames();
  const std::size_t n = cfg.n;
  const std::size_t Tp = cfg.time_pad();
  const std::size_t mt = cfg.modes_time;
  const std::size_t ms = cfg.kept_space();
  if (cfg.modes_space > n / 2 || mt > Tp / 2 + 1) {
    throw std::invalid_argument("mode counts exceed grid");
  }
  check_shape(v, {dv, P, n}, "spectral_conv input");
  if (F.shape() != std::vector<std::size_t>{dv, dv, ms, mt}) {
    throw std::invalid_argument("shape mismatch: F_K");
  }

  // Forward: real FFT along (zero padded) time, restricted to the first mt
  // modes, then full FFT along space.
  ComplexTensor X({dv, mt, ms});
  std::vector<cplx> row(n);
  for (std::size_t c = 0; c < dv; ++c) {
    for (std::size_t kt = 0; kt < mt; ++kt) {
      std::fill(row.begin(), row.end(), cplx{});
      for (std::size_t t = 0; t < P; ++t) {
        const cplx w = unit_root(kt, t, Tp, -1.0);
        for (std::size_t s = 0; s < n; ++s) row[s] += w * v.at(c, t, s);
      }
      fft_inplace(row, false);
      for (std::size_t j = 0; j < ms; ++j) X.at(c, kt, j) = row[kept_space_frequency(j, cfg)];
    }
  }

  // Mode-wise channel mixing.
  ComplexTensor Y({dv, mt, ms});
  for (std::size_t o = 0; o < dv; ++o) {
    for (std::size_t i = 0; i < dv; ++i) {
      for (std::size_t j = 0; j < ms; ++j) {
        for (std::size_t kt = 0; kt < mt; ++kt) {
          Y.at(o, kt, j) += F[((o * dv + i) * ms + j) * mt + kt] * X.at(i, kt, j);
        }
      }
    }
  }

  // Inverse. Rows whose time frequency is its own conjugate are projected onto
  // conjugate-symmetric spatial spectra so the 2-D inverse is real.
  RealTensor out({dv, P, n});
  std::vector<cplx> full(n);
  double residue = 0.0;
  for (std::size_t o = 0; o < dv; ++o) {
    for (std::size_t kt = 0; kt < mt; ++kt) {
      std::fill(full.begin(), full.end(), cplx{});
      for (std::size_t j = 0; j < ms; ++j) full[kept_space_frequency(j, cfg)] = Y.at(o, kt, j);
      if (hermitian_row(kt, Tp)) {
        std::vector<cplx> sym(n);
        for (std::size_t k = 0; k < n; ++k) {
          sym[k] = 0.5 * (full[k] + std::conj(full[(n - k) % n]));
        }
        full.swap(sym);
      }
      fft_inplace(full, true);
      const double weight = half_spectrum_weight(kt, Tp) / static_cast<double>(Tp);
      if (hermitian_row(kt, Tp)) {
        for (const auto& z : full) residue = std::max(residue, std::abs(z.imag()));
      }
      for (std::size_t t = 0; t < P; ++t) {
        const cplx w = unit_root(kt, t, Tp, 1.0);
        for (std::size_t s = 0; s < n; ++s) out.at(o, t, s) += weight * (full[s] * w).real();
      }
    }
  }
  if (spectrum_out) *spectrum_out = std::move(X);
  if (imag_residue) *imag_residue = residue;
  return out;
}

void spectral_conv_backward(const RealTensor& grad_out, const ComplexTensor& spectrum,
                            const ComplexTensor& F, const FnoConfig& cfg, RealTensor& grad_in,
                            ComplexTensor& grad_F) {
  const std::size_t dv = cfg.dv;
  const std::size_t P = cfg.frames();
  const std::size_t n = cfg.n;
  const std::size_t Tp = cfg.time_pad();
  const std::size_t mt = cfg.modes_time;
  const std::size_t ms = cfg.kept_space();

  // Adjoint of the inverse transform: time half-spectrum weights, then the
  // spatial inverse adjoint (forward FFT scaled by 1/n).
  ComplexTensor gY({dv, mt, ms});
  std::vector<cplx> row(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < dv; ++o) {
    for (std::size_t kt = 0; kt < mt; ++kt) {
      std::fill(row.begin(), row.end(), cplx{});
      const double weight = half_spectrum_weight(kt, Tp) / static_cast<double>(Tp);
      for (std::size_t t = 0; t < P; ++t) {
        const cplx w = weight * unit_root(kt, t, Tp, -1.0);
        for (std::size_t s = 0; s < n; ++s) row[s] += w * grad_out.at(o, t, s);
      }
      fft_inplace(row, false);
      for (std::size_t j = 0; j < ms; ++j) {
        gY.at(o, kt, j) = row[kept_space_frequency(j, cfg)] * inv_n;
      }
    }
  }

  ComplexTensor gX({dv, mt, ms});
  for (std::size_t o = 0; o < dv; ++o) {
    for (std::size_t i = 0; i < dv; ++i) {
      for (std::size_t j = 0; j < ms; ++j) {
        for (std::size_t kt = 0; kt < mt; ++kt) {
          const std::size_t idx = ((o * dv + i) * ms + j) * mt + kt;
          const cplx g = gY.at(o, kt, j);
          grad_F[idx] += g * std::conj(spectrum.at(i, kt, j));
          gX.at(i, kt, j) += std::conj(F[idx]) * g;
        }
      }
    }
  }

  // Adjoint of the forward transform: n * ifft in space, then the real part of
  // the conjugate time kernel.
  for (std::size_t i = 0; i < dv; ++i) {
    for (std::size_t kt = 0; kt < mt; ++kt) {
      std::fill(row.begin(), row.end(), cplx{});
      for (std::size_t j = 0; j < ms; ++j) row[kept_space_frequency(j, cfg)] = gX.at(i, kt, j);
      fft_inplace(row, true);
      for (std::size_t t = 0; t < P; ++t) {
        const cplx w = static_cast<double>(n) * unit_root(kt, t, Tp, 1.0);
        for (std::size_t s = 0; s < n; ++s) grad_in.at(i, t, s) += (row[s] * w).real();
      }
    }
  }
}

std::vector<double> fno_forward(const RealTensor& frames, const FnoParams& theta,
                                const FnoConfig& cfg, FnoTape* tape) {
  const std::size_t P = cfg.frames();
  const std::size_t n = cfg.n;
  const std::size_t dv = cfg.dv;
  if (theta.layers.size() != cfg.layers) throw std::invalid_argument("shape mismatch: layers");
  check_shape(theta.h_Q, {dv}, "h_Q");

  RealTensor v = lift(frames, theta.H_P, theta.b_P, cfg);
  if (tape) {
    tape->input = frames;
    tape->act.clear();
    tape->spec.clear();
    tape->imag_residue = 0.0;
    tape->act.push_back(v);
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const auto& layer = theta.layers[l];
    ComplexTensor spectrum;
    double residue = 0.0;
    RealTensor z = local_linear(v, layer.A, layer.b);
    const RealTensor k = spectral_conv(v, layer.F, cfg, tape ? &spectrum : nullptr, &residue);
    for (std::size_t x = 0; x < z.size(); ++x) {
      const double pre = z[x] + k[x];
      z[x] = pre > 0.0 ? pre : 0.0;
    }
    if (!all_finite(z.data())) throw std::runtime_error("forward overflow");
    v = std::move(z);
    if (tape) {
      tape->spec.push_back(std::move(spectrum));
      tape->act.push_back(v);
      tape->imag_residue = std::max(tape->imag_residue, residue);
    }
  }

  std::vector<double> out(n, theta.b_Q);
  for (std::size_t c = 0; c < dv; ++c) {
    for (std::size_t s = 0; s < n; ++s) out[s] += theta.h_Q[c] * v.at(c, P - 1, s);
  }
  if (!all_finite(out)) throw std::runtime_error("forward overflow");
  if (tape) tape->valid = true;
  return out;
}

std::vector<double> fno_forward(const HistoryWindow& w, const FnoParams& theta,
                                const FnoConfig& cfg, FnoTape* tape) {
  return fno_forward(w.frames, theta, cfg, tape);
}

FnoGradients fno_backward(const FnoTape& tape, const FnoParams& theta, const FnoConfig& cfg,
                          std::span<const double> upstream) {
  if (!tape.valid || tape.act.size() != cfg.layers + 1) {
    throw std::logic_error("fno_backward: missing forward cache");
  }
  const std::size_t P = cfg.frames();
  const std::size_t n = cfg.n;
  const std::size_t dv = cfg.dv;
  if (upstream.size() != n) throw std::invalid_argument("fno_backward: upstream length");

  FnoGradients g{FnoParams::zeros(cfg), RealTensor({P, n})};

  // projection
  const RealTensor& vL = tape.act.back();
  RealTensor gv({dv, P, n});
  for (std::size_t s = 0; s < n; ++s) g.params.b_Q += upstream[s];
  for (std::size_t c = 0; c < dv; ++c) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      acc += upstream[s] * vL.at(c, P - 1, s);
      gv.at(c, P - 1, s) = theta.h_Q[c] * upstream[s];
    }
    g.params.h_Q[c] = acc;
  }

  const std::size_t pts = P * n;
  for (std::size_t l = cfg.layers; l-- > 0;) {
    const RealTensor& out = tape.act[l + 1];
    const RealTensor& in = tape.act[l];
    auto& gl = g.params.layers[l];
    // ReLU; subgradient 0 at the kink
    for (std::size_t x = 0; x < gv.size(); ++x) {
      if (!(out[x] > 0.0)) gv[x] = 0.0;
    }
    RealTensor gin({dv, P, n});
    for (std::size_t r = 0; r < dv; ++r) {
      const double* gz = gv.data().data() + r * pts;
      double bsum = 0.0;
      for (std::size_t x = 0; x < pts; ++x) bsum += gz[x];
      gl.b[r] = bsum;
      for (std::size_t c = 0; c < dv; ++c) {
        const double* vin = in.data().data() + c * pts;
        double* gi = gin.data().data() + c * pts;
        const double a = theta.layers[l].A.at(r, c);
        double acc = 0.0;
        for (std::size_t x = 0; x < pts; ++x) {
          acc += gz[x] * vin[x];
          gi[x] += a * gz[x];
        }
        gl.A.at(r, c) = acc;
      }
    }
    spectral_conv_backward(gv, tape.spec[l], theta.layers[l].F, cfg, gin, gl.F);
    gv = std::move(gin);
  }

  // lift
  for (std::size_t c = 0; c < dv; ++c) {
    double gs = 0.0, gt = 0.0, gy = 0.0, gb = 0.0;
    for (std::size_t t = 0; t < P; ++t) {
      const double tc = static_cast<double>(t) * cfg.delta;
      for (std::size_t s = 0; s < n; ++s) {
        const double gvx = gv.at(c, t, s);
        const double sc = static_cast<double>(s) / static_cast<double>(n);
        gs += gvx * sc;
        gt += gvx * tc;
        gy += gvx * tape.input.at(t, s);
        gb += gvx;
        g.input.at(t, s) += theta.H_P.at(c, 2) * gvx;
      }
    }
    g.params.H_P.at(c, 0) = gs;
    g.params.H_P.at(c, 1) = gt;
    g.params.H_P.at(c, 2) = gy;
    g.params.b_P[c] = gb;
  }

  if (g_backward_fault.load()) {
    for (auto& layer : g.params.layers) {
      for (std::size_t i = 0; i < layer.A.size(); ++i) layer.A[i] = -layer.A[i] + 0.5;
    }
  }
  return g;
}

FnoParams init_params(const FnoConfig& cfg, std::uint64_t seed) {
  cfg.validate_shapes();
  FnoParams p = FnoParams::zeros(cfg);
  CounterRng rng(seed);
  auto glorot = [&](RealTensor& w, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : w.storage()) x = rng.uniform(-a, a);
  };
  glorot(p.H_P, cfg.d + 2, cfg.dv);
  const double modes = static_cast<double>(cfg.kept_space() * cfg.modes_time);
  const double scale = 1.0 / (static_cast<double>(cfg.dv) * std::sqrt(modes));
  for (auto& layer : p.layers) {
    glorot(layer.A, cfg.dv, cfg.dv);
    for (auto& z : layer.F.storage()) {
      const double re = rng.normal();
      const double im = rng.normal();
      z = cplx{re, im} * (scale / std::numbers::sqrt2);
    }
  }
  glorot(p.h_Q, cfg.dv, 1);
  return p;
}

void set_backward_fault(bool enabled) { g_backward_fault.store(enabled); }

}  // namespace fdst
