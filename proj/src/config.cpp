#include "fdst/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fdst/io.hpp"
#include "fdst/spectral.hpp"

namespace fdst {

std::string ConfigError::format(const std::string& source, std::size_t line,
                                const std::string& key, const std::string& what) {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  if (!key.empty()) out += ": key '" + key + "'";
  return out + ": " + what;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const auto it = entries_.find(key);
    throw ConfigError(source_, it == entries_.end() ? 0 : it->second.line, key, what);
  }

  void size(const std::string& key, std::size_t& out, std::size_t lo, std::size_t hi) {
    const auto* e = get(key);
    if (!e) return;
    std::uint64_t v = 0;
    const auto& s = e->value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an unsigned integer");
    if (v < lo || v > hi) {
      fail(key, "value " + s + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = static_cast<std::size_t>(v);
  }

  void u64(const std::string& key, std::uint64_t& out) {
    const auto* e = get(key);
    if (!e) return;
    const auto& s = e->value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an unsigned integer");
  }

  // Open lower bound when lo_open is set.
  void real(const std::string& key, double& out, double lo, double hi, bool lo_open) {
    const auto* e = get(key);
    if (!e) return;
    double v = 0.0;
    const auto& s = e->value;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      fail(key, "expected a finite real number");
    }
    if ((lo_open ? !(v > lo) : !(v >= lo)) || !(v <= hi)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "value %s outside %c%g, %g]", s.c_str(), lo_open ? '(' : '[',
                    lo, hi);
      fail(key, buf);
    }
    out = v;
  }

  std::optional<std::string> text(const std::string& key) {
    const auto* e = get(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  void reject_unknown() const {
    for (const auto& [key, e] : entries_) {
      if (!seen_.count(key)) throw ConfigError(source_, e.line, key, "unknown key");
    }
  }

 private:
  const Entry* get(const std::string& key) {
    seen_.insert(key);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> seen_;
};

std::string fmt_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  std::map<std::string, Entry> entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "", "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, lineno, "", "empty key");
    if (value.empty()) throw ConfigError(source, lineno, key, "empty value");
    if (entries.count(key)) throw ConfigError(source, lineno, key, "duplicate key");
    entries[key] = {value, lineno};
  }

  RunConfig c;
  Reader r(source, std::move(entries));
  constexpr std::size_t kBig = std::size_t{1} << 20;
  constexpr double kHuge = 1e300;

  r.size("grid.n", c.data.n, 4, 2048);
  if (!is_power_of_two(c.data.n)) r.fail("grid.n", "must be a power of two");
  r.size("data.instances", c.instances, 1, kBig);
  r.size("data.test_instances", c.test_instances, 0, kBig);
  if (c.test_instances >= c.instances) r.fail("data.test_instances", "must be below data.instances");
  r.size("data.T", c.data.T_model, 2, 100000);
  r.real("data.delta", c.data.delta, 0.0, kHuge, true);
  r.real("data.dt_sim", c.data.dt_sim, 0.0, kHuge, false);
  if (auto mode = r.text("data.gamma_mode")) {
    if (*mode == "random_uniform") {
      c.data.gamma_mode = GammaMode::kRandomUniform;
    } else if (*mode == "fixed") {
      c.data.gamma_mode = GammaMode::kFixed;
    } else {
      r.fail("data.gamma_mode", "expected random_uniform or fixed");
    }
  }
  r.real("data.gamma_lo", c.data.gamma_lo, 0.0, kHuge, false);
  r.real("data.gamma_hi", c.data.gamma_hi, 0.0, kHuge, false);
  if (c.data.gamma_hi < c.data.gamma_lo) r.fail("data.gamma_hi", "must not be below data.gamma_lo");
  r.real("data.gamma_fixed", c.data.gamma_fixed, 0.0, kHuge, false);
  if (auto scheme = r.text("data.scheme")) {
    if (*scheme == "flux") {
      c.data.scheme = AdvectionScheme::kFlux;
    } else if (*scheme == "nonconservative") {
      c.data.scheme = AdvectionScheme::kNonConservative;
    } else {
      r.fail("data.scheme", "expected flux or nonconservative");
    }
  }
  r.real("ic.variance", c.data.ic.variance, 0.0, kHuge, true);
  r.real("ic.lengthscale", c.data.ic.lengthscale, 0.0, kHuge, true);
  r.real("ic.nu", c.data.ic.nu, 0.0, 50.0, true);

  r.size("model.dv", c.model.dv, 4, 1024);
  r.size("model.layers", c.model.layers, 1, 64);
  r.size("model.modes_space", c.model.modes_space, 1, 1024);
  r.size("model.modes_time", c.model.modes_time, 1, 1024);
  r.size("model.tau", c.model.tau, 0, 1024);
  r.size("model.h", c.model.h, 1, 100000);
  r.size("cov.hidden", c.train.cov_hidden, 1, 4096);
  r.real("cov.alpha_r_init", c.train.alpha_r_init, 0.0, kAlphaRangeMax, true);
  r.real("train.lr", c.train.lr, 0.0, 10.0, true);
  r.real("train.lr_min", c.train.lr_min, 0.0, 10.0, false);
  r.real("train.holdout", c.train.holdout, 0.0, 0.99, false);
  if (c.train.lr_min > c.train.lr) r.fail("train.lr_min", "must not exceed train.lr");
  r.size("train.batch", c.train.batch, 1, kBig);
  r.size("train.first_k", c.train.first_k, 0, kBig);
  r.size("train.epochs", c.train.epochs, 0, kBig);
  r.size("train.warmup_mse_epochs", c.train.warmup_mse_epochs, 0, kBig);
  r.real("train.grad_clip", c.train.grad_clip, 0.0, kHuge, true);
  r.real("eval.level", c.level, 0.0, 1.0, true);
  if (!(c.level < 1.0)) r.fail("eval.level", "must be below 1");
  r.u64("seed", c.seed);
  r.reject_unknown();

  c.model.n = c.data.n;
  c.model.delta = c.data.delta;
  c.data.seed = c.seed;
  c.train.seed = c.seed;
  if (c.model.modes_space > c.model.n / 2) r.fail("model.modes_space", "must not exceed grid.n / 2");
  if (c.model.tau + 1 + c.model.h > c.data.T_model) {
    r.fail("model.h", "model.tau + 1 + model.h must not exceed data.T");
  }
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    r.fail("model.modes_time", e.what());
  }
  try {
    c.data.validate();
  } catch (const std::invalid_argument& e) {
    r.fail("data.dt_sim", e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "grid.n = " << data.n << "\n"
     << "data.instances = " << instances << "\n"
     << "data.test_instances = " << test_instances << "\n"
     << "data.T = " << data.T_model << "\n"
     << "data.delta = " << fmt_real(data.delta) << "\n"
     << "data.dt_sim = " << fmt_real(data.dt_sim) << "\n"
     << "data.gamma_mode = "
     << (data.gamma_mode == GammaMode::kFixed ? "fixed" : "random_uniform") << "\n"
     << "data.gamma_lo = " << fmt_real(data.gamma_lo) << "\n"
     << "data.gamma_hi = " << fmt_real(data.gamma_hi) << "\n"
     << "data.gamma_fixed = " << fmt_real(data.gamma_fixed) << "\n"
     << "data.scheme = " << (data.scheme == AdvectionScheme::kFlux ? "flux" : "nonconservative")
     << "\n"
     << "ic.variance = " << fmt_real(data.ic.variance) << "\n"
     << "ic.lengthscale = " << fmt_real(data.ic.lengthscale) << "\n"
     << "ic.nu = " << fmt_real(data.ic.nu) << "\n"
     << "model.dv = " << model.dv << "\n"
     << "model.layers = " << model.layers << "\n"
     << "model.modes_space = " << model.modes_space << "\n"
     << "model.modes_time = " << model.modes_time << "\n"
     << "model.tau = " << model.tau << "\n"
     << "model.h = " << model.h << "\n"
     << "cov.hidden = " << train.cov_hidden << "\n"
     << "cov.alpha_r_init = " << fmt_real(train.alpha_r_init) << "\n"
     << "train.lr = " << fmt_real(train.lr) << "\n"
     << "train.lr_min = " << fmt_real(train.lr_min) << "\n"
     << "train.holdout = " << fmt_real(train.holdout) << "\n"
     << "train.batch = " << train.batch << "\n"
     << "train.first_k = " << train.first_k << "\n"
     << "train.epochs = " << train.epochs << "\n"
     << "train.warmup_mse_epochs = " << train.warmup_mse_epochs << "\n"
     << "train.grad_clip = " << fmt_real(train.grad_clip) << "\n"
     << "eval.level = " << fmt_real(level) << "\n"
     << "seed = " << seed << "\n";
  return os.str();
}

}  // namespace fdst
