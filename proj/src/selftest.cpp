#include "fdst/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "fdst/eval.hpp"
#include "fdst/fno.hpp"
#include "fdst/green_ide.hpp"
#include "fdst/likelihood.hpp"
#include "fdst/rng.hpp"
#include "fdst/spectral.hpp"
#include "fdst/train.hpp"

namespace fdst {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double window_nll(const HistoryWindow& w, const FnoParams& theta, const CovParams& alpha,
                  const FnoConfig& cfg) {
  const auto mu = fno_forward(w, theta, cfg);
  const auto sd = stddev_field(w.last_frame(), alpha);
  return gaussian_nll(w.target, mu, build_covariance(sd, alpha.alpha_r));
}

// Smooth random periodic field: a few low sines with random phase.
std::vector<double> random_field(std::size_t n, CounterRng& rng) {
  std::vector<double> u(n, 0.0);
  for (int m = 1; m <= 3; ++m) {
    const double a = rng.normal() / m;
    const double ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += a * std::sin(2.0 * std::numbers::pi * m * static_cast<double>(i) / n + ph);
    }
  }
  return u;
}

}  // namespace

double fft_max_relative_error(const FftCheckOptions& opt) {
  CounterRng rng(opt.seed);
  double worst = 0.0;
  for (std::size_t q = 0; q <= opt.max_log2; ++q) {
    const std::size_t m = std::size_t{1} << q;
    for (std::size_t t = 0; t < opt.trials; ++t) {
      std::vector<cplx> x(m);
      for (auto& z : x) z = {rng.normal(), rng.normal()};
      const auto a = fft(x);
      const auto b = dft_naive(x);
      double diff = 0.0;
      double scale = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        diff = std::max(diff, std::abs(a[k] - b[k]));
        scale = std::max(scale, std::abs(b[k]));
      }
      worst = std::max(worst, diff / scale);
    }
  }
  return worst;
}

GradcheckReport gradcheck_composed_nll(std::uint64_t seed, const GradcheckOptions& opt) {
  FnoConfig cfg;
  cfg.n = opt.n;
  cfg.dv = opt.dv;
  cfg.layers = opt.layers;
  cfg.tau = opt.tau;
  cfg.h = opt.h;
  cfg.modes_space = opt.modes_space;
  cfg.modes_time = opt.modes_time;
  cfg.validate_shapes();

  CounterRng rng(seed);
  FnoParams theta = init_params(cfg, rng.next_u64());
  for (auto& layer : theta.layers) {
    for (auto& x : layer.b.storage()) x = 0.1 * rng.normal();
  }
  theta.b_Q = 0.1 * rng.normal();
  CovParams alpha = init_cov_params(cfg.n, opt.hidden, 0.08, rng.next_u64());
  for (auto& x : alpha.b1.storage()) x = 0.1 * rng.normal();
  for (auto& x : alpha.b2.storage()) x = -1.0 + 0.2 * rng.normal();

  HistoryWindow w;
  w.frames = RealTensor({cfg.frames(), cfg.n});
  for (std::size_t j = 0; j < cfg.frames(); ++j) {
    const auto f = random_field(cfg.n, rng);
    std::copy(f.begin(), f.end(), w.frames.storage().begin() + j * cfg.n);
  }
  w.target = random_field(cfg.n, rng);

  const auto obj = window_objective(w, theta, alpha, cfg, Stage::kNll);
  GradcheckReport rep;

  auto compare = [&](const std::string& name, std::size_t i, double analytic, double numeric) {
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag <= opt.floor) return;
    const double rel = std::abs(analytic - numeric) / mag;
    ++rep.checked;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst = name + "[" + std::to_string(i) + "]";
    }
  };

  {
    std::vector<std::pair<std::string, std::span<const double>>> grads;
    obj.g_theta.for_each_block(
        [&](const std::string& name, std::span<const double> g) { grads.emplace_back(name, g); });
    std::size_t b = 0;
    FnoParams probe = theta;
    std::vector<std::pair<std::string, std::span<double>>> blocks;
    probe.for_each_block(
        [&](const std::string& name, std::span<double> p) { blocks.emplace_back(name, p); });
    for (auto& [name, p] : blocks) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double x0 = p[i];
        p[i] = x0 + opt.step;
        const double up = window_nll(w, probe, alpha, cfg);
        p[i] = x0 - opt.step;
        const double dn = window_nll(w, probe, alpha, cfg);
        p[i] = x0;
        compare(name, i, grads[b].second[i], (up - dn) / (2.0 * opt.step));
      }
      ++b;
    }
  }
  {
    std::vector<std::pair<std::string, std::span<const double>>> grads;
    obj.g_alpha.for_each_block(
        [&](const std::string& name, std::span<const double> g) { grads.emplace_back(name, g); });
    std::size_t b = 0;
    CovParams probe = alpha;
    std::vector<std::pair<std::string, std::span<double>>> blocks;
    probe.for_each_block(
        [&](const std::string& name, std::span<double> p) { blocks.emplace_back(name, p); });
    for (auto& [name, p] : blocks) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double x0 = p[i];
        p[i] = x0 + opt.step;
        const double up = window_nll(w, theta, probe, cfg);
        p[i] = x0 - opt.step;
        const double dn = window_nll(w, theta, probe, cfg);
        p[i] = x0;
        compare(name, i, grads[b].second[i], (up - dn) / (2.0 * opt.step));
      }
      ++b;
    }
  }
  rep.passed = rep.checked > 0 && rep.max_rel_err < opt.tol;
  return rep;
}

GreenCheckReport green_check(std::uint64_t seed, std::size_t cases, std::size_t offsets) {
  CounterRng rng(seed);
  GreenCheckReport rep;
  for (std::size_t c = 0; c < cases; ++c) {
    const GammaParams p{rng.uniform(-1.0, 1.0), rng.uniform(0.05, 0.7)};
    const double tau = rng.uniform(0.1, 1.0);
    for (std::size_t i = 0; i < offsets; ++i) {
      const double r = -0.5 + static_cast<double>(i) / static_cast<double>(offsets - 1);
      const double err =
          std::abs(green_kernel(r, tau, p) - green_kernel_quadrature(r, tau, p));
      rep.max_abs_err = std::max(rep.max_abs_err, err);
    }
    // Mode-one decay: keep the kernel well inside the unit period so the
    // unwrapped kernel matches the periodic one.
    const std::size_t n = 128;
    const double hdelta = rng.uniform(0.002, 0.01) / p.gamma2;
    const auto prop = build_propagator(n, hdelta, p);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / n);
    }
    const auto out = ide_forecast(u, prop);
    std::vector<cplx> z(out.begin(), out.end());
    const double amp = 2.0 * std::abs(fft(z)[1]) / static_cast<double>(n);
    const double expect =
        std::exp(-4.0 * std::numbers::pi * std::numbers::pi * p.gamma2 * hdelta);
    rep.max_decay_rel_err = std::max(rep.max_decay_rel_err, std::abs(amp - expect) / expect);
  }
  return rep;
}

double metric_oracle_max_diff(std::uint64_t seed, std::size_t fixtures) {
  CounterRng rng(seed);
  double worst = 0.0;
  for (std::size_t f = 0; f < fixtures; ++f) {
    const std::size_t inst = 1 + rng.next_u64() % 5;
    const std::size_t wins = 1 + rng.next_u64() % 3;
    const std::size_t n = 1 + rng.next_u64() % 16;
    const std::size_t total = inst * wins * n;
    std::vector<double> y(total), m(total), lo(total), hi(total);
    for (std::size_t i = 0; i < total; ++i) {
      y[i] = rng.normal();
      m[i] = rng.normal();
      const double half = std::abs(rng.normal());
      lo[i] = m[i] - half;
      hi[i] = m[i] + half;
    }
    double se = 0.0, cov = 0.0, wid = 0.0;
    for (std::size_t a = 0; a < inst; ++a) {
      for (std::size_t b = 0; b < wins; ++b) {
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t i = (a * wins + b) * n + s;
          se += (m[i] - y[i]) * (m[i] - y[i]);
          cov += (lo[i] <= y[i] && y[i] <= hi[i]) ? 1.0 : 0.0;
          wid += hi[i] - lo[i];
        }
      }
    }
    const double N = static_cast<double>(total);
    worst = std::max(worst, std::abs(mspe(y, m) - se / N));
    worst = std::max(worst, std::abs(picp(y, lo, hi) - cov / N));
    worst = std::max(worst, std::abs(mpiw(lo, hi) - wid / N));
  }
  return worst;
}

std::vector<CheckResult> run_selftest(const SelftestOptions& opt) {
  auto wanted = [&](const char* s) { return opt.suites.empty() || opt.suites.count(s) > 0; };
  std::vector<CheckResult> out;

  if (wanted("fft")) {
    const auto t0 = Clock::now();
    FftCheckOptions fo;
    fo.trials = opt.fft_trials;
    const double err = fft_max_relative_error(fo);
    out.push_back({"fft", "fft matches dft_naive for m = 1..1024", err < fo.tol,
                   "max rel err " + fmt("%.3g", err), seconds_since(t0)});
  }
  if (wanted("gradcheck")) {
    set_backward_fault(opt.fault_backward);
    for (std::size_t s = 0; s < opt.gradcheck_seeds; ++s) {
      const auto t0 = Clock::now();
      CheckResult r{"gradcheck", "fno_backward and NLL gradients vs central differences", false,
                    "", 0.0};
      try {
        const auto rep = gradcheck_composed_nll(100 + s);
        r.passed = rep.passed;
        r.detail = "seed " + std::to_string(100 + s) + ", max rel err " +
                   fmt("%.3g", rep.max_rel_err) + " at " + rep.worst;
      } catch (const std::exception& e) {
        r.detail = e.what();
      }
      r.seconds = seconds_since(t0);
      out.push_back(std::move(r));
    }
    set_backward_fault(false);
  }
  if (wanted("green")) {
    const auto t0 = Clock::now();
    const auto rep = green_check(7);
    const double el = seconds_since(t0);
    out.push_back({"green", "closed-form kernel vs Fourier quadrature", rep.max_abs_err < 1e-6,
                   "max abs err " + fmt("%.3g", rep.max_abs_err), el});
    out.push_back({"green", "sine mode decays as exp(-4 pi^2 g2 h delta)",
                   rep.max_decay_rel_err < 0.02,
                   "max rel err " + fmt("%.3g", rep.max_decay_rel_err), 0.0});
  }
  if (wanted("metrics")) {
    const auto t0 = Clock::now();
    const double diff = metric_oracle_max_diff(11, 50);
    out.push_back({"metrics", "mspe/picp/mpiw equal loop oracles", diff == 0.0,
                   "max diff " + fmt("%.3g", diff), seconds_since(t0)});
  }
  return out;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  char buf[512];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s  %-9s  %-55s  %-40s  %6.2fs\n", r.passed ? "PASS" : "FAIL",
                  r.suite.c_str(), r.property.c_str(), r.detail.c_str(), r.seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace fdst
