#include "fdst/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fdst/io.hpp"
#include "fdst/rng.hpp"
#include "fdst/special.hpp"

namespace fdst {

namespace {

using json = nlohmann::json;

constexpr char kCheckpointMagic[8] = {'F', 'D', 'S', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename P>
std::vector<std::span<double>> blocks_of(P& p) {
  std::vector<std::span<double>> out;
  p.for_each_block([&](const std::string&, std::span<double> xs) { out.push_back(xs); });
  return out;
}

template <typename P>
std::vector<std::span<const double>> blocks_of(const P& p) {
  std::vector<std::span<const double>> out;
  p.for_each_block([&](const std::string&, std::span<const double> xs) { out.push_back(xs); });
  return out;
}

template <typename P>
void add_scaled(P& acc, const P& g, double scale) {
  auto a = blocks_of(acc);
  const auto b = blocks_of(g);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k].size(); ++i) a[k][i] += scale * b[k][i];
  }
}

template <typename P>
double squared_norm(const P& p) {
  double s = 0.0;
  for (auto blk : blocks_of(p)) {
    for (double x : blk) s += x * x;
  }
  return s;
}

template <typename P>
void scale_all(P& p, double s) {
  for (auto blk : blocks_of(p)) {
    for (double& x : blk) x *= s;
  }
}

template <typename P>
void apply_adam(P& param, const P& grad, P& m, P& v, std::uint64_t step, const TrainConfig& cfg) {
  auto pb = blocks_of(param);
  const auto gb = blocks_of(grad);
  auto mb = blocks_of(m);
  auto vb = blocks_of(v);
  for (std::size_t k = 0; k < pb.size(); ++k) adam_update(pb[k], gb[k], mb[k], vb[k], step, cfg);
}

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

json fno_to_json(const FnoConfig& c) {
  return {{"d", c.d},   {"tau", c.tau},       {"h", c.h},
          {"delta", c.delta}, {"n", c.n},     {"dv", c.dv},
          {"layers", c.layers}, {"modes_space", c.modes_space}, {"modes_time", c.modes_time}};
}

FnoConfig fno_from_json(const json& j) {
  FnoConfig c;
  c.d = j.at("d").get<std::size_t>();
  c.tau = j.at("tau").get<std::size_t>();
  c.h = j.at("h").get<std::size_t>();
  c.delta = j.at("delta").get<double>();
  c.n = j.at("n").get<std::size_t>();
  c.dv = j.at("dv").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.modes_space = j.at("modes_space").get<std::size_t>();
  c.modes_time = j.at("modes_time").get<std::size_t>();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"lr_min", c.lr_min},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"warmup_mse_epochs", c.warmup_mse_epochs},
          {"grad_clip", c.grad_clip},
          {"cov_hidden", c.cov_hidden},
          {"alpha_r_init", c.alpha_r_init},
          {"holdout", c.holdout},
          {"first_k", c.first_k}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.lr_min = j.at("lr_min").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.batch = j.at("batch").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.warmup_mse_epochs = j.at("warmup_mse_epochs").get<std::size_t>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.cov_hidden = j.at("cov_hidden").get<std::size_t>();
  c.alpha_r_init = j.at("alpha_r_init").get<double>();
  c.holdout = j.at("holdout").get<double>();
  c.first_k = j.at("first_k").get<std::size_t>();
  return c;
}

// Visits parameter tensors with their natural types; scalars become {1} tensors.
template <typename Fn>
void visit_tensors(FnoParams& p, const std::string& prefix, Fn&& fn) {
  fn(prefix + "H_P", p.H_P);
  fn(prefix + "b_P", p.b_P);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto tag = "." + std::to_string(l);
    fn(prefix + "A_W" + tag, p.layers[l].A);
    fn(prefix + "b_W" + tag, p.layers[l].b);
    fn(prefix + "F_K" + tag, p.layers[l].F);
  }
  fn(prefix + "h_Q", p.h_Q);
  fn(prefix + "b_Q", p.b_Q);
}

template <typename Fn>
void visit_tensors(CovParams& p, const std::string& prefix, Fn&& fn) {
  fn(prefix + "W1", p.W1);
  fn(prefix + "b1", p.b1);
  fn(prefix + "W2", p.W2);
  fn(prefix + "b2", p.b2);
  fn(prefix + "alpha_r", p.alpha_r);
}

template <typename Fn>
void visit_checkpoint(Checkpoint& ck, Fn&& fn) {
  visit_tensors(ck.theta, "theta.", fn);
  visit_tensors(ck.alpha, "alpha.", fn);
  visit_tensors(ck.adam.m_theta, "adam.m.theta.", fn);
  visit_tensors(ck.adam.v_theta, "adam.v.theta.", fn);
  visit_tensors(ck.adam.m_alpha, "adam.m.alpha.", fn);
  visit_tensors(ck.adam.v_alpha, "adam.v.alpha.", fn);
}

struct BlockWriter {
  std::ostream& os;
  std::vector<std::string>* names = nullptr;
  void operator()(const std::string& name, RealTensor& t) const { note(name), write_fdst1(os, t); }
  void operator()(const std::string& name, ComplexTensor& t) const { note(name), write_fdst1(os, t); }
  void operator()(const std::string& name, double& x) const {
    note(name);
    write_fdst1(os, RealTensor({1}, std::vector<double>{x}));
  }
  void note(const std::string& name) const {
    if (names) names->push_back(name);
  }
};

struct BlockReader {
  std::istream& is;
  void operator()(const std::string& name, RealTensor& t) const {
    auto r = read_fdst1_real(is);
    if (r.shape() != t.shape()) throw IoError("checkpoint block " + name + " has wrong shape");
    t = std::move(r);
  }
  void operator()(const std::string& name, ComplexTensor& t) const {
    auto r = read_fdst1_complex(is);
    if (r.shape() != t.shape()) throw IoError("checkpoint block " + name + " has wrong shape");
    t = std::move(r);
  }
  void operator()(const std::string& name, double& x) const {
    auto r = read_fdst1_real(is);
    if (r.size() != 1) throw IoError("checkpoint block " + name + " has wrong shape");
    x = r[0];
  }
};

// Per-location RMS of the mean-map residuals, mapped through softplus^{-1} so
// the error model starts at the scale of the warmed-up residuals.
void calibrate_sigma_offset(const std::vector<HistoryWindow>& windows, const FnoParams& theta,
                            CovParams& alpha, const FnoConfig& cfg) {
  const std::size_t n = cfg.n;
  std::vector<double> ss(n, 0.0);
  for (const auto& w : windows) {
    const auto mu = fno_forward(w, theta, cfg);
    for (std::size_t i = 0; i < n; ++i) ss[i] += (w.target[i] - mu[i]) * (w.target[i] - mu[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double rms = std::sqrt(ss[i] / static_cast<double>(windows.size()));
    const double target = std::max(rms - kSigmaFloor, 1e-12);
    alpha.b2[i] = softplus_inverse(target);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train.lr must be positive");
  if (!(lr_min >= 0.0) || lr_min > lr) throw std::invalid_argument("train.lr_min must lie in [0, lr]");
  if (!(holdout >= 0.0 && holdout < 1.0)) throw std::invalid_argument("train.holdout must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
  if (batch < 1) throw std::invalid_argument("train.batch must be at least 1");
  if (!(grad_clip > 0.0)) throw std::invalid_argument("grad_clip must be positive");
  if (cov_hidden < 1) throw std::invalid_argument("cov.hidden must be at least 1");
  if (!(alpha_r_init > 0.0 && alpha_r_init <= kAlphaRangeMax)) {
    throw std::invalid_argument("cov.alpha_r_init must lie in (0, 0.1]");
  }
}

AdamState AdamState::zeros(const FnoConfig& fno, std::size_t n, std::size_t hidden) {
  AdamState s;
  s.m_theta = FnoParams::zeros(fno);
  s.v_theta = FnoParams::zeros(fno);
  s.m_alpha = CovParams::zeros(n, hidden);
  s.v_alpha = CovParams::zeros(n, hidden);
  return s;
}

std::vector<HistoryWindow> make_windows_from(const Dataset& ds, std::size_t tau, std::size_t h,
                                             std::size_t k_min,
                                             std::span<const std::size_t> ids) {
  if (ds.T <= tau + h) throw std::invalid_argument("series too short");
  k_min = std::max(k_min, tau + 1);
  std::vector<HistoryWindow> out;
  const std::size_t n = ds.n;
  for (auto id : ids) {
    const auto& inst = ds.instances.at(id);
    // k is the 1-based index of the last conditioning frame
    for (std::size_t k = k_min; k + h <= ds.T; ++k) {
      HistoryWindow w;
      w.frames = RealTensor({tau + 1, n});
      for (std::size_t j = 0; j <= tau; ++j) {
        const auto src = inst.frame(k - tau - 1 + j);
        std::copy(src.begin(), src.end(), w.frames.storage().begin() + j * n);
      }
      const auto tgt = inst.frame(k + h - 1);
      w.target.assign(tgt.begin(), tgt.end());
      w.instance = id;
      w.k = k;
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<HistoryWindow> make_windows(const Dataset& ds, std::size_t tau, std::size_t h,
                                        std::span<const std::size_t> ids) {
  return make_windows_from(ds, tau, h, tau + 1, ids);
}

std::vector<HistoryWindow> make_windows(const Dataset& ds, std::size_t tau, std::size_t h) {
  std::vector<std::size_t> ids(ds.instances.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return make_windows(ds, tau, h, ids);
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.lr_min == 0.0 || cfg.epochs <= 1) return cfg.lr;
  const double frac = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const TrainConfig& cfg) {
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

double adam_step(FnoParams& theta, CovParams& alpha, const FnoParams& g_theta,
                 const CovParams& g_alpha, AdamState& state, const TrainConfig& cfg,
                 bool alpha_frozen) {
  const double norm = std::sqrt(squared_norm(g_theta) + (alpha_frozen ? 0.0 : squared_norm(g_alpha)));
  FnoParams gt = g_theta;
  CovParams ga = g_alpha;
  if (norm > cfg.grad_clip) {
    const double s = cfg.grad_clip / norm;
    scale_all(gt, s);
    scale_all(ga, s);
  }
  if (!std::isfinite(squared_norm(gt)) || (!alpha_frozen && !std::isfinite(squared_norm(ga)))) {
    throw std::runtime_error("non-finite gradient");
  }
  ++state.step;
  apply_adam(theta, gt, state.m_theta, state.v_theta, state.step, cfg);
  if (!alpha_frozen) {
    apply_adam(alpha, ga, state.m_alpha, state.v_alpha, state.step, cfg);
    if (!(alpha.alpha_r > 0.0)) alpha.alpha_r = 1e-6;
    alpha.alpha_r = std::min(alpha.alpha_r, kAlphaRangeMax);
  }
  return norm;
}

WindowObjective window_objective(const HistoryWindow& w, const FnoParams& theta,
                                 const CovParams& alpha, const FnoConfig& cfg, Stage stage) {
  const std::size_t n = cfg.n;
  if (w.target.size() != n) throw std::invalid_argument("window has no target");
  FnoTape tape;
  const auto mu = fno_forward(w, theta, cfg, &tape);
  WindowObjective out;
  for (std::size_t i = 0; i < n; ++i) out.mse += (mu[i] - w.target[i]) * (mu[i] - w.target[i]);
  out.mse /= static_cast<double>(n);

  if (stage == Stage::kMse) {
    std::vector<double> up(n);
    for (std::size_t i = 0; i < n; ++i) up[i] = 2.0 * (mu[i] - w.target[i]) / static_cast<double>(n);
    out.g_theta = fno_backward(tape, theta, cfg, up).params;
    out.g_alpha = CovParams::zeros(alpha.n(), alpha.hidden());
    const auto sd = stddev_field(w.last_frame(), alpha);
    out.nll = gaussian_nll(w.target, mu, build_covariance(sd, alpha.alpha_r));
    return out;
  }
  auto ng = nll_gradients(w.target, mu, w.last_frame(), alpha);
  out.nll = ng.nll;
  out.g_theta = fno_backward(tape, theta, cfg, ng.grad_mu).params;
  out.g_alpha = std::move(ng.grad_alpha);
  return out;
}

std::string EpochRecord::to_json_line() const {
  json j = {{"epoch", epoch}, {"step", step},     {"nll", nll},
            {"mse", mse},     {"wallclock_s", wallclock_s}, {"stage", stage}};
  if (holdout_nll) j["holdout_nll"] = *holdout_nll;
  return j.dump();
}

TrainResult train(const Dataset& ds, const FnoConfig& fno_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch, const std::optional<Checkpoint>& resume) {
  fno_cfg.validate();
  cfg.validate();
  if (ds.n != fno_cfg.n) throw std::invalid_argument("config mismatch: dataset grid differs");
  std::vector<std::size_t> ids = ds.train_ids;
  if (ids.empty()) {
    ids.resize(ds.instances.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  }
  std::vector<std::size_t> held;
  if (cfg.holdout > 0.0) {
    const auto k = static_cast<std::size_t>(std::ceil(cfg.holdout * static_cast<double>(ids.size())));
    if (k >= ids.size()) throw std::invalid_argument("train.holdout leaves no training instances");
    held.assign(ids.end() - static_cast<std::ptrdiff_t>(k), ids.end());
    ids.resize(ids.size() - k);
  }
  const std::size_t k_min = std::max(cfg.first_k, fno_cfg.tau + 1);
  const std::vector<HistoryWindow> windows = make_windows_from(ds, fno_cfg.tau, fno_cfg.h, k_min, ids);
  const std::vector<HistoryWindow> held_windows =
      held.empty() ? std::vector<HistoryWindow>{}
                   : make_windows_from(ds, fno_cfg.tau, fno_cfg.h, k_min, held);
  if (windows.empty()) throw std::invalid_argument("dataset has no training windows");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  std::size_t start_epoch = 0;
  if (resume) {
    if (!(resume->fno == fno_cfg)) throw std::invalid_argument("config mismatch");
    ck = *resume;
    ck.train = cfg;
    start_epoch = resume->epoch;
  } else {
    ck.fno = fno_cfg;
    ck.train = cfg;
    ck.theta = init_params(fno_cfg, CounterRng(cfg.seed).split(1).next_u64());
    ck.alpha = init_cov_params(fno_cfg.n, cfg.cov_hidden, cfg.alpha_r_init,
                               CounterRng(cfg.seed).split(2).next_u64());
    ck.adam = AdamState::zeros(fno_cfg, fno_cfg.n, cfg.cov_hidden);
  }

  FnoParams best_theta = ck.theta;
  CovParams best_alpha = ck.alpha;
  bool have_best = false;
  result.log.best_nll = std::numeric_limits<double>::infinity();

  const unsigned threads = std::max(1u, cfg.threads);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(windows.size());

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const Stage stage = epoch < cfg.warmup_mse_epochs ? Stage::kMse : Stage::kNll;
    TrainConfig step_cfg = cfg;
    step_cfg.lr = scheduled_lr(cfg, epoch);
    if (stage == Stage::kNll && epoch == cfg.warmup_mse_epochs && !(resume && start_epoch > epoch)) {
      calibrate_sigma_offset(windows, ck.theta, ck.alpha, fno_cfg);
    }
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng shuffle = CounterRng(cfg.seed).split(1000 + epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.next_u64() % i]);
    }

    double nll_sum = 0.0;
    double mse_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t count = std::min(cfg.batch, order.size() - start);
      std::vector<WindowObjective> slots(count);
      auto work = [&](std::size_t b) {
        slots[b] = window_objective(windows[order[start + b]], ck.theta, ck.alpha, fno_cfg, stage);
      };
      if (threads == 1 || count == 1) {
        for (std::size_t b = 0; b < count; ++b) work(b);
      } else {
        std::vector<std::exception_ptr> errors(threads);
        {
          std::vector<std::jthread> pool;
          for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
              try {
                for (std::size_t b = t; b < count; b += threads) work(b);
              } catch (...) {
                errors[t] = std::current_exception();
              }
            });
          }
        }
        for (auto& e : errors) {
          if (e) std::rethrow_exception(e);
        }
      }
      // fixed-order reduction keeps results independent of the thread count
      FnoParams g_theta = FnoParams::zeros(fno_cfg);
      CovParams g_alpha = CovParams::zeros(fno_cfg.n, cfg.cov_hidden);
      const double inv = 1.0 / static_cast<double>(count);
      for (const auto& s : slots) {
        add_scaled(g_theta, s.g_theta, inv);
        add_scaled(g_alpha, s.g_alpha, inv);
        nll_sum += s.nll;
        mse_sum += s.mse;
      }
      try {
        adam_step(ck.theta, ck.alpha, g_theta, g_alpha, ck.adam, step_cfg, stage == Stage::kMse);
      } catch (const std::runtime_error&) {
        throw TrainingDiverged(epoch, ck.adam.step);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = ck.adam.step;
    rec.nll = nll_sum / static_cast<double>(windows.size());
    rec.mse = mse_sum / static_cast<double>(windows.size());
    rec.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.stage = stage == Stage::kMse ? "mse" : "nll";
    if (!std::isfinite(rec.nll) || !std::isfinite(rec.mse)) throw TrainingDiverged(epoch, rec.step);
    double score = rec.nll;
    if (stage == Stage::kNll && !held_windows.empty()) {
      score = 0.0;
      for (const auto& w : held_windows) {
        const auto dist = forecast_distribution(w, ck.theta, ck.alpha, fno_cfg, true);
        score += gaussian_nll(w.target, dist.mean, *dist.cov);
      }
      score /= static_cast<double>(held_windows.size());
      result.log.holdout_nll.push_back(score);
      rec.holdout_nll = score;
    }
    result.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    ck.epoch = epoch + 1;

    if (stage == Stage::kNll && score < result.log.best_nll) {
      result.log.best_nll = score;
      result.log.best_epoch = epoch;
      best_theta = ck.theta;
      best_alpha = ck.alpha;
      have_best = true;
    }
  }
  if (have_best) {
    ck.theta = std::move(best_theta);
    ck.alpha = std::move(best_alpha);
  }
  return result;
}

void save_checkpoint(const Checkpoint& ck_in, const std::filesystem::path& path) {
  Checkpoint ck = ck_in;
  std::ostringstream blocks(std::ios::binary);
  std::vector<std::string> names;
  visit_checkpoint(ck, BlockWriter{blocks, &names});
  json header = {{"format", "fdst-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"fno", fno_to_json(ck.fno)},
                 {"train", train_to_json(ck.train)},
                 {"epoch", ck.epoch},
                 {"adam_step", ck.adam.step},
                 {"cov", {{"n", ck.alpha.n()}, {"hidden", ck.alpha.hidden()}}},
                 {"blocks", names}};
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_u64(os, text.size());
  os << text << blocks.str();
  if (!os) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<FnoConfig>& expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw IoError("corrupt magic");
  }
  if (read_u32(is) != kCheckpointVersion) throw IoError("checkpoint version mismatch");
  const auto len = read_u64(is);
  if (len > (1u << 24)) throw IoError("checkpoint header too large");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw IoError("truncated checkpoint header");

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    if (header.at("version").get<std::uint32_t>() != kCheckpointVersion) {
      throw IoError("checkpoint version mismatch");
    }
    ck.fno = fno_from_json(header.at("fno"));
    ck.train = train_from_json(header.at("train"));
    ck.epoch = header.at("epoch").get<std::size_t>();
    ck.adam.step = header.at("adam_step").get<std::uint64_t>();
    const auto cov_n = header.at("cov").at("n").get<std::size_t>();
    const auto cov_hidden = header.at("cov").at("hidden").get<std::size_t>();
    ck.fno.validate();
    ck.theta = FnoParams::zeros(ck.fno);
    ck.alpha = CovParams::zeros(cov_n, cov_hidden);
    const auto step = ck.adam.step;
    ck.adam = AdamState::zeros(ck.fno, cov_n, cov_hidden);
    ck.adam.step = step;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid checkpoint config: ") + e.what());
  }
  if (expected && !(*expected == ck.fno)) throw std::invalid_argument("config mismatch");
  visit_checkpoint(ck, BlockReader{is});
  return ck;
}

}  // namespace fdst
