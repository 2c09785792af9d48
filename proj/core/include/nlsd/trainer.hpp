#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nlsd/dataset.hpp"
#include "nlsd/noise.hpp"
#include "nlsd/optim.hpp"
#include "nlsd/predictor.hpp"

namespace nlsd {

struct TrainConfig {
  PredictorConfig predictor;
  double lambda = 1.0;    // weight of the noise loss in the reported total
  double alpha = 0.01;    // variance update step between rounds
  int rounds = 4;
  int max_epochs_per_round = 20;
  double base_lr = 1e-3;
  double momentum = 0.9;
  double lr_drop_factor = 0.1;  // applied when epoch prediction loss stops decreasing
  double poly_power = 0.9;
  int accumulation_steps = 1;   // images per optimizer step, gradients averaged
  std::uint64_t seed = 0;
  double variance_floor = kVarianceFloor;

  void validate() const;
};

struct EpochLog {
  int round = 0;
  int epoch = 0;           // 1-based within round
  double pred_loss = 0.0;  // summed over images, labellers, pixels
  double noise_loss = 0.0;
  double total = 0.0;      // pred_loss + lambda * noise_loss
  double lr = 0.0;         // learning rate of the epoch's last step
};

struct RoundMetrics {
  int round = 0;
  double noise_loss = 0.0;  // bank vs post-round empirical variances
  bool has_eval = false;    // true when every image carries binary gt
  double mean_mae = 0.0;
  double mean_f = 0.0;
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  std::vector<RoundMetrics> rounds;
};

struct RoundResult {
  std::vector<Tensor> params;
  OptimizerState optimizer;
  std::vector<EpochLog> epochs;
};

struct TrainResult {
  std::vector<Tensor> params;
  OptimizerState optimizer;  // end state of the final round
  NoiseBank bank;
  TrainHistory history;
};

// Invoked after each round with the resumable state (variances already
// advanced when another round follows), so callers can emit checkpoints.
using RoundCallback =
    std::function<void(int round, const std::vector<Tensor>& params, const OptimizerState& opt,
                       const NoiseBank& bank, const RoundMetrics& metrics)>;

NoiseBank make_zero_bank(const Dataset& ds);

// One round of predictor training with the variance bank held fixed: fresh
// noise every epoch, image order shuffled once per (seed, round), poly decay
// over the round's full horizon plus plateau-triggered drops. Only the
// prediction term is differentiated; the sampled noise is a constant for the
// parameter gradient.
RoundResult train_round(const Dataset& ds, const NoiseBank& bank, std::vector<Tensor> params,
                        const TrainConfig& cfg, int round);

// The alternating schedule: train a round, re-estimate per-image empirical
// variances from the round's final predictions, relax the bank toward them
// (skipped after the final round, so rounds = 1 coincides with the
// raw-label baseline), repeat.
TrainResult run_training(const Dataset& ds, const TrainConfig& cfg,
                         const RoundCallback& on_round = nullptr);

enum class BaselineMode { kBL1, kBL2, kBL3 };

BaselineMode parse_baseline(const std::string& name);
std::string baseline_name(BaselineMode mode);

// BL1 trains on all raw labels (exactly run_training with one round), BL2 on
// the per-pixel mean label, BL3 on ground truth. Optimizer settings are
// identical to the joint run.
TrainResult run_baseline(const Dataset& ds, BaselineMode mode, const TrainConfig& cfg,
                         const RoundCallback& on_round = nullptr);

}  // namespace nlsd
