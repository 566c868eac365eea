#include <doctest.h>

#include <cmath>

#include "fdst/eval.hpp"
#include "fdst/rng.hpp"

using namespace fdst;

namespace {

struct Fixture {
  std::size_t N, W, n;
  std::vector<double> truth, forecast, lower, upper;
};

Fixture random_fixture(std::uint64_t seed) {
  CounterRng rng(seed);
  Fixture f{1 + static_cast<std::size_t>(rng.uniform() * 4), 1 + static_cast<std::size_t>(rng.uniform() * 3),
            2 + static_cast<std::size_t>(rng.uniform() * 10), {}, {}, {}, {}};
  const std::size_t total = f.N * f.W * f.n;
  for (std::size_t i = 0; i < total; ++i) {
    f.truth.push_back(rng.normal());
    f.forecast.push_back(rng.normal());
    const double c = rng.normal(), w = std::abs(rng.normal());
    f.lower.push_back(c - w);
    f.upper.push_back(c + w);
  }
  return f;
}

Dataset constant_dataset(std::size_t instances, std::size_t T, std::size_t n) {
  Dataset ds;
  ds.T = T;
  ds.n = n;
  ds.delta = 0.1;
  CounterRng rng(4);
  for (std::size_t i = 0; i < instances; ++i) {
    FieldSeries fs;
    fs.values = RealTensor({T, n});
    fs.n = n;
    fs.delta = 0.1;
    fs.gamma = 0.3;
    std::vector<double> base(n);
    for (auto& b : base) b = rng.normal();
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < n; ++s) fs.values.at(t, s) = base[s] + 0.1 * t * rng.normal();
    }
    ds.instances.push_back(fs);
    ds.test_ids.push_back(i);
  }
  return ds;
}

}  // namespace

TEST_CASE("metrics against triple-loop oracles") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto f = random_fixture(seed);
    double sq = 0.0, cov = 0.0, wid = 0.0;
    for (std::size_t i = 0; i < f.N; ++i) {
      for (std::size_t w = 0; w < f.W; ++w) {
        for (std::size_t s = 0; s < f.n; ++s) {
          const std::size_t p = (i * f.W + w) * f.n + s;
          sq += (f.truth[p] - f.forecast[p]) * (f.truth[p] - f.forecast[p]);
          cov += (f.truth[p] >= f.lower[p] && f.truth[p] <= f.upper[p]) ? 1.0 : 0.0;
          wid += f.upper[p] - f.lower[p];
        }
      }
    }
    const double total = static_cast<double>(f.N * f.W * f.n);
    CHECK(mspe(f.truth, f.forecast) == sq / total);
    CHECK(picp(f.truth, f.lower, f.upper) == cov / total);
    CHECK(mpiw(f.lower, f.upper) == wid / total);
  }
}

TEST_CASE("metric edge cases") {
  const std::vector<double> t = {0.5, -1.0, 2.0, 0.0};
  CHECK(mspe(t, t) == 0.0);
  const std::vector<double> zero(4, 0.0), c(4, 1.5);
  CHECK(mspe(zero, c) == 2.25);
  const std::vector<double> lo(4, -1e6), hi(4, 1e6);
  CHECK(picp(t, lo, hi) == 1.0);
  const std::vector<double> far(4, 10.0);
  CHECK(picp(t, far, far) == 0.0);
  CHECK(mpiw(far, far) == 0.0);
  CHECK(mpiw(zero, c) == 1.5);
  // truth inside for the first two points only, boundaries count as inside
  const std::vector<double> l2 = {0.5, -2.0, 3.0, 1.0}, u2 = {1.0, -1.0, 4.0, 2.0};
  CHECK(picp(t, l2, u2) == 0.5);
  const std::vector<double> w = {1.0, 2.0, 4.0, 0.0};
  CHECK(mpiw(zero, w) == 1.75);
  CHECK_THROWS_WITH(picp(t, hi, lo), "interval inversion");
  CHECK_THROWS_WITH(mpiw(hi, lo), "interval inversion");
  CHECK_THROWS_WITH(mspe(t, std::vector<double>(3)), "shape mismatch");
}

TEST_CASE("accumulating per instance equals one batched call") {
  const auto f = random_fixture(77);
  MetricAccumulator acc;
  const std::size_t chunk = f.W * f.n;
  for (std::size_t i = 0; i < f.N; ++i) {
    const std::span<const double> tr(f.truth.data() + i * chunk, chunk);
    const std::span<const double> fc(f.forecast.data() + i * chunk, chunk);
    const std::span<const double> lo(f.lower.data() + i * chunk, chunk);
    const std::span<const double> up(f.upper.data() + i * chunk, chunk);
    acc.add(tr, fc);
    acc.add_interval(tr, lo, up);
  }
  CHECK(acc.mspe() == mspe(f.truth, f.forecast));
  CHECK(acc.picp() == picp(f.truth, f.lower, f.upper));
  CHECK(acc.mpiw() == mpiw(f.lower, f.upper));
}

TEST_CASE("persistence returns the last frame") {
  HistoryWindow w;
  w.frames = RealTensor({3, 4}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9.25, 10, 11, 12});
  CHECK(persistence_forecast(w) == std::vector<double>{9.25, 10, 11, 12});

  Dataset ds;
  ds.T = 6;
  ds.n = 4;
  ds.delta = 0.1;
  FieldSeries fs;
  fs.values = RealTensor({6, 4});
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t s = 0; s < 4; ++s) fs.values.at(t, s) = std::sin(1.0 + s);
  }
  fs.n = 4;
  fs.delta = 0.1;
  ds.instances = {fs, fs};
  ds.test_ids = {0, 1};
  const auto r = evaluate({persistence_model()}, ds, ds.test_ids, EvalConfig{2, 0.95, 1});
  CHECK(r.find("persistence")->mspe == 0.0);
}

TEST_CASE("evaluate report layout and thread invariance") {
  const auto ds = constant_dataset(5, 9, 8);
  std::vector<Forecaster> models = {persistence_model(), ide_model(2, 0.1)};
  const EvalConfig cfg{2, 0.95, 1};
  const auto r = evaluate(models, ds, ds.test_ids, cfg);
  CHECK(r.instances == 5);
  CHECK(r.windows == 9 - 2 - 0);
  CHECK(r.n == 8);
  for (const auto& row : r.rows) {
    CHECK(row.mspe >= 0.0);
    CHECK_FALSE(row.picp.has_value());
  }
  const auto json = r.to_json();
  CHECK(json.find("\"picp\": null") != std::string::npos);
  CHECK(r.to_table().find("persistence") != std::string::npos);

  const auto threaded = evaluate(models, ds, ds.test_ids, EvalConfig{2, 0.95, 3});
  for (std::size_t m = 0; m < models.size(); ++m) CHECK(threaded.rows[m].mspe == r.rows[m].mspe);

  // every model is scored on the same windows, so a dummy with more history shortens the range
  Forecaster deep{"deep", 3, [](const HistoryWindow& w, const FieldSeries&) {
                    return ModelForecast{persistence_forecast(w), {}, {}};
                  }};
  const auto r2 = evaluate({persistence_model(), deep}, ds, ds.test_ids, cfg);
  CHECK(r2.windows == 9 - 2 - 3);
  CHECK(r2.rows[0].mspe == r2.rows[1].mspe);

  const std::vector<std::size_t> none;
  CHECK_THROWS_WITH(evaluate(models, ds, none, cfg), "missing test split");
}

TEST_CASE("interval coverage from a forecaster with the true spread") {
  // truth = mean + sigma z, intervals built from the same sigma
  const std::size_t n = 16, T = 400;
  Dataset ds;
  ds.T = T;
  ds.n = n;
  ds.delta = 0.1;
  FieldSeries fs;
  fs.values = RealTensor({T, n});
  fs.n = n;
  CounterRng rng(21);
  for (auto& v : fs.values.storage()) v = rng.normal();
  ds.instances = {fs};
  ds.test_ids = {0};
  Forecaster zero{"zero", 0, [](const HistoryWindow& w, const FieldSeries&) {
                    const std::size_t m = w.frames.extent(1);
                    return ModelForecast{std::vector<double>(m, 0.0), std::vector<double>(m, -1.959964),
                                         std::vector<double>(m, 1.959964)};
                  }};
  const auto r = evaluate({zero}, ds, ds.test_ids, EvalConfig{1, 0.95, 1});
  const auto* row = r.find("zero");
  REQUIRE(row != nullptr);
  REQUIRE(row->picp.has_value());
  CHECK(*row->picp >= 0.93);
  CHECK(*row->picp <= 0.97);
  CHECK(*row->mpiw == doctest::Approx(2 * 1.959964));
}
