#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdst/burgers.hpp"
#include "fdst/fno.hpp"
#include "fdst/train.hpp"

namespace fdst {

/// Flat arrays aligned over (instance, window, space).
double mspe(std::span<const double> truth, std::span<const double> forecast);
double picp(std::span<const double> truth, std::span<const double> lower,
            std::span<const double> upper);
double mpiw(std::span<const double> lower, std::span<const double> upper);

/// Running sums in arrival order. Feeding the same points one instance at a
/// time or all at once gives bit-identical metrics.
struct MetricAccumulator {
  double sq_err = 0.0;
  double covered = 0.0;
  double width = 0.0;
  std::size_t points = 0;
  std::size_t interval_points = 0;

  void add(std::span<const double> truth, std::span<const double> forecast);
  void add_interval(std::span<const double> truth, std::span<const double> lower,
                    std::span<const double> upper);
  double mspe() const;
  double picp() const;
  double mpiw() const;
};

std::vector<double> persistence_forecast(const HistoryWindow& w);

struct ModelForecast {
  std::vector<double> mean;
  std::vector<double> lower, upper;  // empty for point forecasters
};

struct Forecaster {
  std::string name;
  std::size_t tau = 0;  // history frames beyond the last one
  std::function<ModelForecast(const HistoryWindow&, const FieldSeries&)> forecast;
};

Forecaster persistence_model();
/// Green's-function IDE linearized about the spatial mean of the last frame,
/// with the diffusivity taken from the instance metadata.
Forecaster ide_model(std::size_t h, double delta);
Forecaster fno_model(std::string name, const Checkpoint& ck, double level = 0.95);

struct MetricRow {
  std::string model;
  double mspe = 0.0;
  std::optional<double> picp, mpiw;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::size_t instances = 0;
  std::size_t windows = 0;  // per instance
  std::size_t n = 0;
  std::size_t h = 0;
  double level = 0.95;

  std::string to_json() const;
  std::string to_table() const;
  const MetricRow* find(const std::string& model) const;
};

struct EvalConfig {
  std::size_t h = 5;
  double level = 0.95;
  unsigned threads = 1;
};

/// All models are scored on the same windows: k runs from max(tau) + 1 to
/// T - h on every test instance.
MetricReport evaluate(const std::vector<Forecaster>& models, const Dataset& ds,
                      std::span<const std::size_t> test_ids, const EvalConfig& cfg);

}  // namespace fdst
