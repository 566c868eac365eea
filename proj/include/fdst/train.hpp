#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdst/burgers.hpp"
#include "fdst/fno.hpp"
#include "fdst/likelihood.hpp"

namespace fdst {

struct TrainConfig {
  double lr = 1e-3;
  /// When positive, cosine decay from lr at the first epoch to lr_min at
  /// the last. Zero keeps lr constant.
  double lr_min = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 8;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t warmup_mse_epochs = 2;
  double grad_clip = 10.0;
  std::size_t cov_hidden = 64;
  double alpha_r_init = 0.05;
  /// Fraction of training instances held out to pick the best epoch. Zero
  /// selects on the training NLL.
  double holdout = 0.0;
  /// Earliest 1-based window end index used for training; windows never start
  /// before tau + 1. Lets models with different tau train on the same targets.
  std::size_t first_k = 0;
  unsigned threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// First and second moments shaped like every trainable block.
struct AdamState {
  FnoParams m_theta, v_theta;
  CovParams m_alpha, v_alpha;
  std::uint64_t step = 0;

  static AdamState zeros(const FnoConfig& fno, std::size_t n, std::size_t hidden);
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::uint64_t step)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step)) {}
};

std::vector<HistoryWindow> make_windows(const Dataset& ds, std::size_t tau, std::size_t h,
                                        std::span<const std::size_t> ids);
std::vector<HistoryWindow> make_windows(const Dataset& ds, std::size_t tau, std::size_t h);

/// Windows restricted to 1-based end indices k in [k_min, T - h].
std::vector<HistoryWindow> make_windows_from(const Dataset& ds, std::size_t tau, std::size_t h,
                                             std::size_t k_min, std::span<const std::size_t> ids);

/// Learning rate for a 0-based epoch under the cosine schedule.
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

/// Plain Adam over matched flat blocks; moments live in `m` and `v`.
/// `step` is the 1-based step used for bias correction.
void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::uint64_t step, const TrainConfig& cfg);

/// One Adam step on theta and (unless `alpha_frozen`) alpha. Gradients are
/// clipped to cfg.grad_clip in global norm first. Returns the pre-clip norm.
double adam_step(FnoParams& theta, CovParams& alpha, const FnoParams& g_theta,
                 const CovParams& g_alpha, AdamState& state, const TrainConfig& cfg,
                 bool alpha_frozen = false);

enum class Stage { kMse, kNll };

struct WindowObjective {
  double nll = 0.0;
  double mse = 0.0;
  FnoParams g_theta;
  CovParams g_alpha;
};

/// Loss and gradients for one window. kMse: mean squared error of the mean
/// map (alpha gradient zero). kNll: Gaussian negative log-likelihood.
WindowObjective window_objective(const HistoryWindow& w, const FnoParams& theta,
                                 const CovParams& alpha, const FnoConfig& cfg, Stage stage);

struct EpochRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double nll = 0.0;
  double mse = 0.0;
  double wallclock_s = 0.0;
  std::string stage;
  std::optional<double> holdout_nll;

  std::string to_json_line() const;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::vector<double> holdout_nll;  // per NLL epoch, when a holdout is used
  std::size_t best_epoch = 0;
  double best_nll = 0.0;
};

struct Checkpoint {
  FnoConfig fno;
  TrainConfig train;
  FnoParams theta;
  CovParams alpha;
  AdamState adam;
  std::size_t epoch = 0;  // epochs completed
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainingLog log;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Joint maximum-likelihood training. The first warmup_mse_epochs minimize
/// the squared error of the mean map only; the rest minimize the NLL. The
/// returned checkpoint holds the parameters of the best-NLL epoch.
TrainResult train(const Dataset& ds, const FnoConfig& fno_cfg, const TrainConfig& train_cfg,
                  const EpochCallback& on_epoch = {},
                  const std::optional<Checkpoint>& resume = std::nullopt);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
/// Throws "config mismatch" if `expected` is given and differs from the file.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<FnoConfig>& expected = std::nullopt);

}  // namespace fdst
