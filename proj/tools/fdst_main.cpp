// fdst: simulate Burgers data, train the FNO forecaster, forecast, evaluate.
//
// Exit codes: 0 ok, 1 selftest failure, 2 usage or config, 3 I/O,
// 4 numerical divergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdst/burgers.hpp"
#include "fdst/config.hpp"
#include "fdst/eval.hpp"
#include "fdst/io.hpp"
#include "fdst/likelihood.hpp"
#include "fdst/selftest.hpp"
#include "fdst/train.hpp"

namespace fs = std::filesystem;
using namespace fdst;

namespace {

constexpr int kOk = 0;
constexpr int kSelftestFailed = 1;
constexpr int kUsage = 2;
constexpr int kIo = 3;
constexpr int kDiverged = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

RunConfig load_config(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) {
    rc.seed = *c.seed;
    rc.data.seed = *c.seed;
    rc.train.seed = *c.seed;
  }
  rc.train.threads = c.threads;
  return rc;
}

int cmd_simulate(const Common& c) {
  if (c.out.empty()) throw UsageError("simulate needs --out DIR");
  const RunConfig rc = load_config(c);
  const Dataset ds =
      generate_dataset(rc.data, rc.instances, rc.seed, rc.test_instances, c.threads);
  write_dataset(c.out, ds);
  std::printf("wrote %zu instances (%zu x %zu) to %s\n", ds.instances.size(), ds.T, ds.n,
              c.out.c_str());
  return kOk;
}

void check_dataset_matches(const RunConfig& rc, const Dataset& ds) {
  if (ds.n != rc.model.n) {
    throw UsageError("config mismatch: grid.n = " + std::to_string(rc.model.n) +
                     " but dataset has n = " + std::to_string(ds.n));
  }
  if (std::abs(ds.delta - rc.model.delta) > 1e-12 * ds.delta) {
    throw UsageError("config mismatch: data.delta differs from dataset metadata");
  }
  if (ds.T < rc.model.tau + 1 + rc.model.h) {
    throw UsageError("config mismatch: dataset has T = " + std::to_string(ds.T) +
                     ", too short for model.tau + 1 + model.h");
  }
}

int cmd_train(const Common& c, const std::string& resume, std::string log_path) {
  if (c.data.empty() || c.out.empty()) throw UsageError("train needs --data DIR and --out PATH");
  const RunConfig rc = load_config(c);
  const Dataset ds = read_dataset(c.data);
  check_dataset_matches(rc, ds);
  if (ds.train_ids.empty()) throw UsageError("dataset has an empty training split");

  std::optional<Checkpoint> start;
  if (!resume.empty()) start = load_checkpoint(resume, rc.model);

  if (log_path.empty()) log_path = c.out + ".log.jsonl";
  std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open log for writing: " + log_path);

  auto result = train(ds, rc.model, rc.train, [&](const EpochRecord& rec) {
    log << rec.to_json_line() << "\n";
    log.flush();
    std::fprintf(stderr, "epoch %zu  step %llu  %s  nll %.6g  mse %.6g\n", rec.epoch,
                 static_cast<unsigned long long>(rec.step), rec.stage.c_str(), rec.nll, rec.mse);
  }, start);
  save_checkpoint(result.checkpoint, c.out);
  std::printf("saved checkpoint %s (epoch %zu, step %llu)\n", c.out.c_str(),
              result.checkpoint.epoch, static_cast<unsigned long long>(result.checkpoint.adam.step));
  return kOk;
}

int cmd_forecast(const Common& c, const std::string& ckpt, std::size_t instance, std::size_t k,
                 double level) {
  if (ckpt.empty() || c.data.empty() || c.out.empty()) {
    throw UsageError("forecast needs --checkpoint, --data and --out");
  }
  const Checkpoint ck = load_checkpoint(ckpt);
  const Dataset ds = read_dataset(c.data);
  if (ds.n != ck.fno.n) throw UsageError("config mismatch: checkpoint grid differs from dataset");
  if (instance >= ds.instances.size()) {
    throw UsageError("--instance must lie in [0, " + std::to_string(ds.instances.size() - 1) + "]");
  }
  const std::size_t k_lo = ck.fno.tau + 1;
  const std::size_t k_hi = ds.T >= ck.fno.h ? ds.T - ck.fno.h : 0;
  if (k < k_lo || k > k_hi) {
    throw UsageError("--k must lie in [" + std::to_string(k_lo) + ", " + std::to_string(k_hi) +
                     "]");
  }
  const std::size_t one[1] = {instance};
  auto windows = make_windows_from(ds, ck.fno.tau, ck.fno.h, k, one);
  const HistoryWindow& w = windows.front();
  const auto dist = forecast_distribution(w, ck.theta, ck.alpha, ck.fno, false);
  const auto [lo, hi] = prediction_interval(dist, level);

  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  const std::size_t n = ds.n;
  save_tensor(dir / "mean.fdst", RealTensor({n}, dist.mean));
  save_tensor(dir / "sigma.fdst", RealTensor({n}, dist.sigma));
  save_tensor(dir / "lower.fdst", RealTensor({n}, lo));
  save_tensor(dir / "upper.fdst", RealTensor({n}, hi));
  nlohmann::json j = {{"instance", instance},
                      {"k", k},
                      {"h", ck.fno.h},
                      {"target_frame", k + ck.fno.h},
                      {"level", level},
                      {"n", n},
                      {"files", {"mean.fdst", "sigma.fdst", "lower.fdst", "upper.fdst"}}};
  write_text_file(dir / "forecast.json", j.dump(2) + "\n");
  std::printf("wrote forecast for instance %zu, k = %zu to %s\n", instance, k, dir.c_str());
  return kOk;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& ckpts, bool with_ide,
                 std::size_t h_flag, double level) {
  if (c.data.empty()) throw UsageError("evaluate needs --data DIR");
  const Dataset ds = read_dataset(c.data);
  if (ds.test_ids.empty()) throw UsageError("dataset has no test split");

  std::vector<Forecaster> models;
  std::size_t h = h_flag;
  for (const auto& p : ckpts) {
    const Checkpoint ck = load_checkpoint(p);
    if (ck.fno.n != ds.n) throw UsageError("config mismatch: " + p + " grid differs from dataset");
    if (h != 0 && ck.fno.h != h) throw UsageError("checkpoints disagree on the horizon h");
    h = ck.fno.h;
    models.push_back(fno_model(fs::path(p).stem().string(), ck, level));
  }
  if (h == 0) throw UsageError("evaluate needs --checkpoint or --horizon");
  models.push_back(persistence_model());
  if (with_ide) models.push_back(ide_model(h, ds.delta));

  EvalConfig ec{h, level, c.threads};
  const auto report = evaluate(models, ds, ds.test_ids, ec);
  std::cout << report.to_table();
  if (!c.out.empty()) write_text_file(c.out, report.to_json());
  return kOk;
}

int cmd_selftest(const SelftestOptions& opt) {
  const auto results = run_selftest(opt);
  std::cout << format_results(results);
  bool ok = true;
  for (const auto& r : results) {
    if (!r.passed) {
      ok = false;
      std::cerr << "selftest failed: " << r.property << "\n";
    }
  }
  return ok ? kOk : kSelftestFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FNO-based spatio-temporal forecasting toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "run configuration (key = value lines)");
    sub->add_option("--data", common.data, "dataset directory");
    sub->add_option("--out", common.out, "output path");
    sub->add_option("--seed", common.seed, "override the configured seed");
    sub->add_option("--threads", common.threads, "worker threads (1 = deterministic path)")
        ->check(CLI::Range(1u, 1024u));
  };

  auto* sim = app.add_subcommand("simulate", "generate a Burgers dataset");
  add_common(sim);

  auto* tr = app.add_subcommand("train", "fit the FNO mean map and error model");
  add_common(tr);
  std::string resume, log_path;
  tr->add_option("--resume", resume, "continue from this checkpoint");
  tr->add_option("--log", log_path, "training log (default <out>.log.jsonl)");

  auto* fc = app.add_subcommand("forecast", "h-step forecast for one window");
  add_common(fc);
  std::string ckpt;
  std::size_t instance = 0, k = 0;
  double level = 0.95;
  fc->add_option("--checkpoint", ckpt)->required();
  fc->add_option("--instance", instance)->required();
  fc->add_option("--k", k, "1-based index of the last conditioning frame")->required();
  fc->add_option("--level", level)->check(CLI::Range(1e-9, 1.0 - 1e-9));

  auto* ev = app.add_subcommand("evaluate", "score models on the test split");
  add_common(ev);
  std::vector<std::string> ckpts;
  bool no_ide = false;
  std::size_t h_flag = 0;
  ev->add_option("--checkpoint", ckpts, "trained checkpoint (repeatable)");
  ev->add_flag("--no-ide", no_ide, "skip the Green's-function baseline");
  ev->add_option("--horizon", h_flag, "horizon when no checkpoint is given");
  ev->add_option("--level", level)->check(CLI::Range(1e-9, 1.0 - 1e-9));

  SelftestOptions st_opt;
  std::vector<std::string> suites;
  auto* st = app.add_subcommand("selftest", "run the built-in property suites");
  st->add_option("--suite", suites, "fft, gradcheck, green or metrics (repeatable)");
  st->add_flag("--fault-backward", st_opt.fault_backward, "inject a wrong fno_backward gradient");

  auto* gc = app.add_subcommand("gradcheck", "selftest gradient suite only");
  std::size_t gc_seeds = 5;
  gc->add_option("--seeds", gc_seeds)->check(CLI::Range(1, 1000));
  bool gc_fault = false;
  gc->add_flag("--fault-backward", gc_fault);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*tr) return cmd_train(common, resume, log_path);
    if (*fc) return cmd_forecast(common, ckpt, instance, k, level);
    if (*ev) return cmd_evaluate(common, ckpts, !no_ide, h_flag, level);
    if (*st) {
      for (const auto& s : suites) {
        if (s != "fft" && s != "gradcheck" && s != "green" && s != "metrics") {
          throw UsageError("unknown suite '" + s + "'");
        }
        st_opt.suites.insert(s);
      }
      return cmd_selftest(st_opt);
    }
    if (*gc) {
      SelftestOptions o;
      o.suites = {"gradcheck"};
      o.gradcheck_seeds = gc_seeds;
      o.fault_backward = gc_fault;
      return cmd_selftest(o);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const SimulationDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kDiverged;
  }
  return kUsage;
}
