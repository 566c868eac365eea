#include "fdst/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fdst/green_ide.hpp"
#include "fdst/likelihood.hpp"

namespace fdst {

namespace {

void check_interval(std::span<const double> lower, std::span<const double> upper) {
  if (lower.size() != upper.size()) throw std::invalid_argument("shape mismatch");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) throw std::invalid_argument("interval inversion");
  }
}

}  // namespace

void MetricAccumulator::add(std::span<const double> truth, std::span<const double> forecast) {
  if (truth.size() != forecast.size()) throw std::invalid_argument("shape mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = forecast[i] - truth[i];
    sq_err += e * e;
  }
  points += truth.size();
}

void MetricAccumulator::add_interval(std::span<const double> truth, std::span<const double> lower,
                                     std::span<const double> upper) {
  if (truth.size() != lower.size()) throw std::invalid_argument("shape mismatch");
  check_interval(lower, upper);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (lower[i] <= truth[i] && truth[i] <= upper[i]) covered += 1.0;
    width += upper[i] - lower[i];
  }
  interval_points += truth.size();
}

double MetricAccumulator::mspe() const {
  if (points == 0) throw std::invalid_argument("no points");
  return sq_err / static_cast<double>(points);
}

double MetricAccumulator::picp() const {
  if (interval_points == 0) throw std::invalid_argument("no intervals");
  return covered / static_cast<double>(interval_points);
}

double MetricAccumulator::mpiw() const {
  if (interval_points == 0) throw std::invalid_argument("no intervals");
  return width / static_cast<double>(interval_points);
}

double mspe(std::span<const double> truth, std::span<const double> forecast) {
  MetricAccumulator acc;
  acc.add(truth, forecast);
  return acc.mspe();
}

double picp(std::span<const double> truth, std::span<const double> lower,
            std::span<const double> upper) {
  MetricAccumulator acc;
  acc.add_interval(truth, lower, upper);
  return acc.picp();
}

double mpiw(std::span<const double> lower, std::span<const double> upper) {
  check_interval(lower, upper);
  if (lower.empty()) throw std::invalid_argument("no intervals");
  double s = 0.0;
  for (std::size_t i = 0; i < lower.size(); ++i) s += upper[i] - lower[i];
  return s / static_cast<double>(lower.size());
}

std::vector<double> persistence_forecast(const HistoryWindow& w) {
  if (w.frames.size() == 0) throw std::invalid_argument("empty window");
  const auto last = w.last_frame();
  return {last.begin(), last.end()};
}

Forecaster persistence_model() {
  return {"persistence", 0,
          [](const HistoryWindow& w, const FieldSeries&) {
            return ModelForecast{persistence_forecast(w), {}, {}};
          }};
}

Forecaster ide_model(std::size_t h, double delta) {
  return {"ide", 0, [h, delta](const HistoryWindow& w, const FieldSeries& inst) {
            const auto last = w.last_frame();
            double mean = 0.0;
            for (double x : last) mean += x;
            mean /= static_cast<double>(last.size());
            const auto prop = build_propagator(last.size(), static_cast<double>(h) * delta,
                                               GammaParams{mean, inst.gamma});
            return ModelForecast{ide_forecast(last, prop), {}, {}};
          }};
}

Forecaster fno_model(std::string name, const Checkpoint& ck, double level) {
  return {std::move(name), ck.fno.tau,
          [ck, level](const HistoryWindow& w, const FieldSeries&) {
            const auto dist = forecast_distribution(w, ck.theta, ck.alpha, ck.fno, false);
            auto [lo, hi] = prediction_interval(dist, level);
            return ModelForecast{dist.mean, std::move(lo), std::move(hi)};
          }};
}

const MetricRow* MetricReport::find(const std::string& model) const {
  for (const auto& r : rows) {
    if (r.model == model) return &r;
  }
  return nullptr;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["instances"] = instances;
  j["windows_per_instance"] = windows;
  j["grid_size"] = n;
  j["h"] = h;
  j["level"] = level;
  j["models"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json m = {{"model", r.model}, {"mspe", r.mspe}};
    m["picp"] = r.picp ? nlohmann::json(*r.picp) : nlohmann::json(nullptr);
    m["mpiw"] = r.mpiw ? nlohmann::json(*r.mpiw) : nlohmann::json(nullptr);
    j["models"].push_back(m);
  }
  return j.dump(2) + "\n";
}

std::string MetricReport::to_table() const {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.model.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %12s  %8s  %12s\n", static_cast<int>(width), "model",
                "MSPE", "PICP", "MPIW");
  os << buf;
  for (const auto& r : rows) {
    char picp_s[32] = "-";
    char mpiw_s[32] = "-";
    if (r.picp) std::snprintf(picp_s, sizeof picp_s, "%.4f", *r.picp);
    if (r.mpiw) std::snprintf(mpiw_s, sizeof mpiw_s, "%.6g", *r.mpiw);
    std::snprintf(buf, sizeof buf, "%-*s  %12.6g  %8s  %12s\n", static_cast<int>(width),
                  r.model.c_str(), r.mspe, picp_s, mpiw_s);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "(%zu instances, %zu windows each, n = %zu, h = %zu)\n",
                instances, windows, n, h);
  os << buf;
  return os.str();
}

MetricReport evaluate(const std::vector<Forecaster>& models, const Dataset& ds,
                      std::span<const std::size_t> test_ids, const EvalConfig& cfg) {
  if (models.empty()) throw std::invalid_argument("no models to evaluate");
  if (test_ids.empty()) throw std::invalid_argument("missing test split");
  std::size_t tau_max = 0;
  for (const auto& m : models) tau_max = std::max(tau_max, m.tau);
  if (ds.T < tau_max + 1 + cfg.h) throw std::invalid_argument("series too short for horizon");
  const std::size_t k_min = tau_max + 1;

  MetricReport report;
  report.instances = test_ids.size();
  report.windows = ds.T - cfg.h - k_min + 1;
  report.n = ds.n;
  report.h = cfg.h;
  report.level = cfg.level;

  // results[model][instance] holds the forecasts for that instance's windows
  std::vector<std::vector<std::vector<ModelForecast>>> results(
      models.size(), std::vector<std::vector<ModelForecast>>(test_ids.size()));
  std::vector<std::vector<std::vector<double>>> truth(test_ids.size());

  auto work = [&](std::size_t ii) {
    const std::size_t id = test_ids[ii];
    const std::size_t one[1] = {id};
    for (std::size_t m = 0; m < models.size(); ++m) {
      const auto windows = make_windows_from(ds, models[m].tau, cfg.h, k_min, one);
      for (const auto& w : windows) {
        results[m][ii].push_back(models[m].forecast(w, ds.instances.at(id)));
        if (m == 0) truth[ii].push_back(w.target);
      }
    }
  };
  const unsigned threads = std::max(1u, cfg.threads);
  if (threads == 1) {
    for (std::size_t ii = 0; ii < test_ids.size(); ++ii) work(ii);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t ii = t; ii < test_ids.size(); ii += threads) work(ii);
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

  for (std::size_t m = 0; m < models.size(); ++m) {
    MetricAccumulator acc;
    bool has_intervals = true;
    for (std::size_t ii = 0; ii < test_ids.size(); ++ii) {
      for (std::size_t w = 0; w < truth[ii].size(); ++w) {
        const auto& f = results[m][ii][w];
        acc.add(truth[ii][w], f.mean);
        if (f.lower.empty()) {
          has_intervals = false;
        } else {
          acc.add_interval(truth[ii][w], f.lower, f.upper);
        }
      }
    }
    MetricRow row{models[m].name, acc.mspe(), std::nullopt, std::nullopt};
    if (has_intervals && acc.interval_points > 0) {
      row.picp = acc.picp();
      row.mpiw = acc.mpiw();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace fdst
