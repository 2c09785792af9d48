#include "nlsd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "nlsd/io.hpp"
#include "nlsd/losses.hpp"
#include "nlsd/metrics.hpp"
#include "nlsd/rng.hpp"

namespace nlsd {

void TrainConfig::validate() const {
  predictor.validate();
  if (lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
  if (!(alpha > 0.0) || alpha > 1.0) throw std::invalid_argument("train: alpha must be in (0,1]");
  if (rounds < 1) throw std::invalid_argument("train: rounds must be >= 1");
  if (max_epochs_per_round < 1) throw std::invalid_argument("train: need at least one epoch");
  if (!(base_lr > 0.0)) throw std::invalid_argument("train: base_lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("train: momentum must be in [0,1)");
  }
  if (!(lr_drop_factor > 0.0) || lr_drop_factor > 1.0) {
    throw std::invalid_argument("train: lr_drop_factor must be in (0,1]");
  }
  if (poly_power < 0.0) throw std::invalid_argument("train: poly_power must be >= 0");
  if (accumulation_steps < 1) {
    throw std::invalid_argument("train: accumulation_steps must be >= 1");
  }
  if (!(variance_floor > 0.0)) throw std::invalid_argument("train: variance_floor must be > 0");
}

NoiseBank make_zero_bank(const Dataset& ds) {
  NoiseBank bank;
  bank.round = 1;
  for (const DatasetImage& im : ds.images) {
    bank.variances.emplace(im.id, VarianceMap(im.id, im.image.height, im.image.width, 0.0));
  }
  return bank;
}

namespace {

void check_bank(const Dataset& ds, const NoiseBank& bank) {
  if (bank.variances.size() != ds.images.size()) {
    throw std::invalid_argument("train: variance bank does not cover the dataset");
  }
  for (const DatasetImage& im : ds.images) {
    auto it = bank.variances.find(im.id);
    if (it == bank.variances.end()) {
      throw std::invalid_argument("train: no variance map for image '" + im.id + "'");
    }
    if (it->second.height != im.image.height || it->second.width != im.image.width) {
      throw std::invalid_argument("train: variance map shape mismatch for image '" + im.id + "'");
    }
  }
}

std::vector<int> shuffled_order(int n, std::uint64_t seed, int round) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  StreamRng rng(derive_stream(seed, {fnv1a("epoch-shuffle"), static_cast<std::uint64_t>(round)}));
  for (int i = n - 1; i > 0; --i) {
    const int j = rng.next_index(i + 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

std::map<std::string, EmpiricalVariance> dataset_empirical(
    const Dataset& ds, const std::map<std::string, SaliencyMap>& predictions) {
  std::map<std::string, EmpiricalVariance> emp;
  for (const DatasetImage& im : ds.images) {
    emp.emplace(im.id, empirical_variance(im.id, predictions.at(im.id), im.labels));
  }
  return emp;
}

bool is_binary(const SaliencyMap& m) {
  for (double v : m.data) {
    if (v != 0.0 && v != 1.0) return false;
  }
  return true;
}

// "Loss fails to decrease" needs slack at this scale: noise is resampled
// every epoch, so the epoch loss wobbles a few tenths of a percent even
// while the predictor improves, and a hair-trigger drop starves the round.
// An epoch counts as improving only if it beats the round's best loss by
// the relative margin; after a sustained run of non-improving epochs
// (scaled to the round horizon) the rate is dropped once and the strike
// count restarts.
constexpr double kPlateauRelImprove = 1e-3;

int plateau_patience(int max_epochs) { return std::max(2, max_epochs / 10); }

}  // namespace

RoundResult train_round(const Dataset& ds, const NoiseBank& bank, std::vector<Tensor> params,
                        const TrainConfig& cfg, int round) {
  cfg.validate();
  ds.validate();
  check_bank(ds, bank);

  const int n = ds.size();
  const int m = ds.labellers();
  const long long steps_per_epoch = (n + cfg.accumulation_steps - 1) / cfg.accumulation_steps;
  const long long max_iter = steps_per_epoch * cfg.max_epochs_per_round;
  const std::vector<int> order = shuffled_order(n, cfg.seed, round);

  RoundResult result;
  OptimizerState opt;
  std::vector<Tensor> grad_accum;
  grad_accum.reserve(params.size());
  for (const Tensor& p : params) grad_accum.emplace_back(p.shape, 0.0);

  double drop_mult = 1.0;
  long long iter = 0;
  double best_epoch_pred = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  const int patience = plateau_patience(cfg.max_epochs_per_round);

  for (int epoch = 1; epoch <= cfg.max_epochs_per_round; ++epoch) {
    // Plateau drops operationalize convergence: once they push the rate
    // under 1e-6 * base_lr the round is over.
    if (drop_mult * cfg.base_lr < 1e-6 * cfg.base_lr) break;

    double epoch_pred = 0.0;
    double last_lr = 0.0;
    int group = 0;
    std::map<std::string, SaliencyMap> epoch_preds;

    for (int pos = 0; pos < n; ++pos) {
      const DatasetImage& im = ds.images[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])];
      const VarianceMap& var = bank.variances.at(im.id);

      Graph g;
      const PredictorGraph pg = build_predictor_graph(g, cfg.predictor, params, im.image);
      int loss_id = -1;
      for (int j = 0; j < m; ++j) {
        const NoiseMap noise = sample_noise(var, j, round, epoch, cfg.seed);
        const int noisy = g.add(pg.output, g.leaf(map_to_tensor(noise)));
        const int l = g.bce_sum(noisy, map_to_tensor(im.labels[static_cast<std::size_t>(j)]));
        loss_id = loss_id < 0 ? l : g.add(loss_id, l);
      }
      g.backward(loss_id);

      epoch_pred += g.value(loss_id).data[0];
      epoch_preds.emplace(im.id, tensor_to_map(g.value(pg.output)));
      for (std::size_t k = 0; k < params.size(); ++k) {
        const Tensor& pg_grad = g.grad(pg.param_ids[k]);
        for (std::size_t i = 0; i < grad_accum[k].data.size(); ++i) {
          grad_accum[k].data[i] += pg_grad.data[i];
        }
      }
      ++group;

      if (group == cfg.accumulation_steps || pos == n - 1) {
        const double inv_group = 1.0 / group;
        for (Tensor& ga : grad_accum) {
          for (double& v : ga.data) v *= inv_group;
        }
        const double lr =
            poly_decay(cfg.base_lr, iter, max_iter, cfg.poly_power) * drop_mult;
        sgd_momentum_step(params, grad_accum, opt, lr, cfg.momentum);
        last_lr = lr;
        ++iter;
        group = 0;
        for (Tensor& ga : grad_accum) std::fill(ga.data.begin(), ga.data.end(), 0.0);
      }
    }

    const double nl = noise_loss(bank, dataset_empirical(ds, epoch_preds), cfg.variance_floor);
    EpochLog log;
    log.round = round;
    log.epoch = epoch;
    log.pred_loss = epoch_pred;
    log.noise_loss = nl;
    log.total = epoch_pred + cfg.lambda * nl;
    log.lr = last_lr;
    result.epochs.push_back(log);

    if (epoch_pred < best_epoch_pred * (1.0 - kPlateauRelImprove)) {
      best_epoch_pred = epoch_pred;
      stale_epochs = 0;
    } else if (++stale_epochs >= patience) {
      drop_mult *= cfg.lr_drop_factor;
      stale_epochs = 0;
    }
  }

  result.params = std::move(params);
  result.optimizer = std::move(opt);
  return result;
}

TrainResult run_training(const Dataset& ds, const TrainConfig& cfg,
                         const RoundCallback& on_round) {
  cfg.validate();
  ds.validate();

  TrainResult res;
  res.params = init_params(cfg.predictor, cfg.seed);
  res.bank = make_zero_bank(ds);

  const bool can_eval = [&] {
    if (!ds.all_have_gt()) return false;
    for (const DatasetImage& im : ds.images) {
      if (!is_binary(im.gt)) return false;
    }
    return true;
  }();

  for (int round = 1; round <= cfg.rounds; ++round) {
    res.bank.round = round;
    RoundResult rr = train_round(ds, res.bank, std::move(res.params), cfg, round);
    res.params = std::move(rr.params);
    res.optimizer = std::move(rr.optimizer);
    for (const EpochLog& log : rr.epochs) res.history.epochs.push_back(log);

    const std::map<std::string, SaliencyMap> preds =
        predict_dataset(cfg.predictor, res.params, ds);
    const std::map<std::string, EmpiricalVariance> emp = dataset_empirical(ds, preds);

    RoundMetrics rm;
    rm.round = round;
    rm.noise_loss = noise_loss(res.bank, emp, cfg.variance_floor);
    if (can_eval) {
      std::map<std::string, SaliencyMap> gts;
      for (const DatasetImage& im : ds.images) gts.emplace(im.id, im.gt);
      const DatasetMetrics dm = evaluate_dataset(preds, gts);
      rm.has_eval = true;
      rm.mean_mae = dm.mean_mae;
      rm.mean_f = dm.mean_f;
    }
    res.history.rounds.push_back(rm);

    if (round < cfg.rounds) {
      for (auto& [id, var] : res.bank.variances) {
        var = update_variance(var, emp.at(id), cfg.alpha);
      }
      res.bank.round = round + 1;
    }
    if (on_round) on_round(round, res.params, res.optimizer, res.bank, rm);
  }
  return res;
}

BaselineMode parse_baseline(const std::string& name) {
  if (name == "bl1" || name == "BL1") return BaselineMode::kBL1;
  if (name == "bl2" || name == "BL2") return BaselineMode::kBL2;
  if (name == "bl3" || name == "BL3") return BaselineMode::kBL3;
  throw std::invalid_argument("unknown baseline '" + name + "' (expected bl1, bl2 or bl3)");
}

std::string baseline_name(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::kBL1:
      return "bl1";
    case BaselineMode::kBL2:
      return "bl2";
    case BaselineMode::kBL3:
      return "bl3";
  }
  return "bl?";
}

TrainResult run_baseline(const Dataset& ds, BaselineMode mode, const TrainConfig& cfg,
                         const RoundCallback& on_round) {
  TrainConfig single = cfg;
  single.rounds = 1;

  if (mode == BaselineMode::kBL1) {
    return run_training(ds, single, on_round);
  }

  Dataset derived;
  derived.images.reserve(ds.images.size());
  if (mode == BaselineMode::kBL2) {
    derived.labeller_names = {"mean"};
    for (const DatasetImage& im : ds.images) {
      DatasetImage copy;
      copy.id = im.id;
      copy.image = im.image;
      copy.gt = im.gt;
      copy.has_gt = im.has_gt;
      SaliencyMap mean(im.image.height, im.image.width);
      const double inv_m = 1.0 / static_cast<double>(im.labels.size());
      for (const SaliencyMap& label : im.labels) {
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += label.data[i];
      }
      for (double& v : mean.data) v *= inv_m;
      copy.labels.push_back(std::move(mean));
      derived.images.push_back(std::move(copy));
    }
  } else {
    if (!ds.all_have_gt()) {
      throw std::invalid_argument("bl3 needs ground truth for every image");
    }
    derived.labeller_names = {"gt"};
    for (const DatasetImage& im : ds.images) {
      DatasetImage copy;
      copy.id = im.id;
      copy.image = im.image;
      copy.gt = im.gt;
      copy.has_gt = im.has_gt;
      copy.labels.push_back(im.gt);
      derived.images.push_back(std::move(copy));
    }
  }
  return run_training(derived, single, on_round);
}

}  // namespace nlsd
