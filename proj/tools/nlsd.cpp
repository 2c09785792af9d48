#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlsd/checkpoint.hpp"
#include "nlsd/config.hpp"
#include "nlsd/io.hpp"
#include "nlsd/labellers.hpp"
#include "nlsd/metrics.hpp"
#include "nlsd/rng.hpp"
#include "nlsd/synth.hpp"
#include "nlsd/trainer.hpp"
#include "nlsd/version.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fp);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw nlsd::IoError("cannot write '" + path.string() + "'");
  f << text;
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

ordered_json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw nlsd::IoError("cannot open '" + path.string() + "'");
  ordered_json j;
  f >> j;
  return j;
}

ordered_json config_to_json(const nlsd::TrainConfig& cfg) {
  ordered_json j;
  j["lambda"] = cfg.lambda;
  j["alpha"] = cfg.alpha;
  j["rounds"] = cfg.rounds;
  j["max_epochs_per_round"] = cfg.max_epochs_per_round;
  j["base_lr"] = cfg.base_lr;
  j["momentum"] = cfg.momentum;
  j["lr_drop_factor"] = cfg.lr_drop_factor;
  j["poly_power"] = cfg.poly_power;
  j["accumulation_steps"] = cfg.accumulation_steps;
  j["variance_floor"] = cfg.variance_floor;
  j["in_channels"] = cfg.predictor.in_channels;
  j["kernel"] = cfg.predictor.kernel;
  j["channels"] = cfg.predictor.channels;
  j["dilations"] = cfg.predictor.dilations;
  j["input_height"] = cfg.predictor.input_height;
  j["input_width"] = cfg.predictor.input_width;
  return j;
}

nlsd::TrainConfig config_from_json(const ordered_json& j) {
  nlsd::TrainConfig cfg;
  cfg.lambda = j.at("lambda").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.rounds = j.at("rounds").get<int>();
  cfg.max_epochs_per_round = j.at("max_epochs_per_round").get<int>();
  cfg.base_lr = j.at("base_lr").get<double>();
  cfg.momentum = j.at("momentum").get<double>();
  cfg.lr_drop_factor = j.at("lr_drop_factor").get<double>();
  cfg.poly_power = j.at("poly_power").get<double>();
  cfg.accumulation_steps = j.at("accumulation_steps").get<int>();
  cfg.variance_floor = j.at("variance_floor").get<double>();
  cfg.predictor.in_channels = j.at("in_channels").get<int>();
  cfg.predictor.kernel = j.at("kernel").get<int>();
  cfg.predictor.channels = j.at("channels").get<std::vector<int>>();
  cfg.predictor.dilations = j.at("dilations").get<std::vector<int>>();
  cfg.predictor.input_height = j.at("input_height").get<int>();
  cfg.predictor.input_width = j.at("input_width").get<int>();
  return cfg;
}

std::string metrics_json_text(const nlsd::TrainHistory& history) {
  ordered_json rounds = ordered_json::array();
  for (const nlsd::RoundMetrics& rm : history.rounds) {
    ordered_json row;
    row["round"] = rm.round;
    row["noise_loss"] = rm.noise_loss;
    if (rm.has_eval) {
      row["mean_mae"] = rm.mean_mae;
      row["mean_f"] = rm.mean_f;
    }
    rounds.push_back(std::move(row));
  }
  ordered_json j;
  j["rounds"] = std::move(rounds);
  return j.dump(2) + "\n";
}

std::string train_log_csv(const nlsd::TrainHistory& history) {
  std::string csv = "round,epoch,pred_loss,noise_loss,total,lr\n";
  for (const nlsd::EpochLog& log : history.epochs) {
    csv += std::to_string(log.round) + "," + std::to_string(log.epoch) + "," +
           fmt_double(log.pred_loss) + "," + fmt_double(log.noise_loss) + "," +
           fmt_double(log.total) + "," + fmt_double(log.lr) + "\n";
  }
  return csv;
}

int cmd_synth(const nlsd::SynthSpec& spec, const std::string& out) {
  nlsd::generate_synthetic_corpus(spec, out);

  ordered_json manifest;
  manifest["command"] = "synth";
  manifest["version"] = nlsd::kVersion;
  manifest["seed"] = spec.seed;
  manifest["spec"] = {{"count", spec.count},
                      {"size", spec.size},
                      {"labellers", spec.labellers},
                      {"sigma_true", spec.sigma_true},
                      {"bias_strength", spec.bias_strength},
                      {"shapes", spec.shapes}};
  write_json(fs::path(out) / "run_manifest.json", manifest);
  std::cout << "wrote corpus with " << spec.count << " images to " << out << "\n";
  return 0;
}

int cmd_label(const std::string& data, const std::string& out, int cell_size,
              bool include_center) {
  nlsd::PriorParams params;
  params.cell_size = cell_size;
  params.include_center = include_center;

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(data)) {
    if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw nlsd::IoError("label: no files under '" + data + "'");

  int count = 0;
  for (const std::string& filename : files) {
    const nlsd::Image img = nlsd::load_image((fs::path(data) / filename).string());
    const std::string stem = fs::path(filename).stem().string();
    for (const nlsd::LabellerOutput& labelled : nlsd::run_prior_labellers(img, params)) {
      const fs::path dir = fs::path(out) / labelled.name;
      fs::create_directories(dir);
      nlsd::save_gray_png((dir / (stem + ".png")).string(), labelled.map);
    }
    ++count;
  }

  ordered_json manifest;
  manifest["command"] = "label";
  manifest["version"] = nlsd::kVersion;
  manifest["data"] = data;
  manifest["cell_size"] = cell_size;
  manifest["include_center"] = include_center;
  manifest["images"] = count;
  write_json(fs::path(out) / "run_manifest.json", manifest);
  std::cout << "labelled " << count << " images into " << out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config_file;
  std::string manifest_file;
  std::string baseline;  // empty = joint
  // CLI override slots; negative/empty means "not given"
  double lambda = -1.0;
  double alpha = -1.0;
  int rounds = -1;
  std::int64_t seed = -1;
};

int cmd_train(const TrainArgs& args) {
  nlsd::TrainConfig cfg;
  std::string baseline = args.baseline;
  bool input_size_pinned = false;

  if (!args.manifest_file.empty()) {
    const ordered_json manifest = read_json(args.manifest_file);
    cfg = config_from_json(manifest.at("config"));
    cfg.seed = manifest.at("seed").get<std::uint64_t>();
    if (baseline.empty() && manifest.contains("baseline")) {
      const std::string from_manifest = manifest.at("baseline").get<std::string>();
      if (from_manifest != "joint") baseline = from_manifest;
    }
    input_size_pinned = true;
  } else if (!args.config_file.empty()) {
    const nlsd::KeyValueMap kv = nlsd::parse_config_file(args.config_file);
    nlsd::apply_config(cfg, kv);
    input_size_pinned = kv.count("input_height") > 0 || kv.count("input_width") > 0;
  }

  if (args.lambda >= 0.0) cfg.lambda = args.lambda;
  if (args.alpha >= 0.0) cfg.alpha = args.alpha;
  if (args.rounds >= 0) cfg.rounds = args.rounds;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);

  const nlsd::Dataset ds = nlsd::ingest_dataset(args.data);
  if (!input_size_pinned) {
    cfg.predictor.input_height = ds.images[0].image.height;
    cfg.predictor.input_width = ds.images[0].image.width;
  }
  const std::uint64_t fingerprint = nlsd::dataset_fingerprint(ds);
  if (!args.manifest_file.empty()) {
    const ordered_json manifest = read_json(args.manifest_file);
    const std::string expected = manifest.at("dataset_fingerprint").get<std::string>();
    if (expected != fingerprint_hex(fingerprint)) {
      throw std::runtime_error("train: dataset fingerprint " + fingerprint_hex(fingerprint) +
                               " does not match manifest (" + expected + ")");
    }
  }

  fs::create_directories(args.out);
  std::vector<std::string> checkpoint_names;
  const nlsd::RoundCallback on_round = [&](int round, const std::vector<nlsd::Tensor>& params,
                                           const nlsd::OptimizerState& opt,
                                           const nlsd::NoiseBank& bank,
                                           const nlsd::RoundMetrics& metrics) {
    const std::string name = "checkpoint_round" + std::to_string(round) + ".nlsd";
    nlsd::Checkpoint ckpt;
    ckpt.config = cfg.predictor;
    ckpt.params = params;
    ckpt.optimizer = opt;
    ckpt.bank = bank;
    ckpt.seed = cfg.seed;
    nlsd::save_checkpoint((fs::path(args.out) / name).string(), ckpt);
    checkpoint_names.push_back(name);
    std::cout << "round " << round << ": noise_loss=" << metrics.noise_loss;
    if (metrics.has_eval) {
      std::cout << " mean_mae=" << metrics.mean_mae << " mean_f=" << metrics.mean_f;
    }
    std::cout << "\n";
  };

  nlsd::TrainResult result;
  if (baseline.empty()) {
    result = nlsd::run_training(ds, cfg, on_round);
  } else {
    result = nlsd::run_baseline(ds, nlsd::parse_baseline(baseline), cfg, on_round);
  }

  write_text(fs::path(args.out) / "train_log.csv", train_log_csv(result.history));
  write_text(fs::path(args.out) / "metrics.json", metrics_json_text(result.history));

  nlsd::Checkpoint final_ckpt;
  final_ckpt.config = cfg.predictor;
  final_ckpt.params = result.params;
  final_ckpt.optimizer = result.optimizer;
  final_ckpt.bank = result.bank;
  final_ckpt.seed = cfg.seed;
  nlsd::save_checkpoint((fs::path(args.out) / "checkpoint.nlsd").string(), final_ckpt);

  ordered_json manifest;
  manifest["command"] = "train";
  manifest["version"] = nlsd::kVersion;
  manifest["baseline"] = baseline.empty() ? "joint" : baseline;
  manifest["seed"] = cfg.seed;
  manifest["dataset_fingerprint"] = fingerprint_hex(fingerprint);
  manifest["config"] = config_to_json(cfg);
  manifest["artifacts"] = {{"train_log", "train_log.csv"},
                           {"metrics", "metrics.json"},
                           {"checkpoint", "checkpoint.nlsd"},
                           {"round_checkpoints", checkpoint_names}};
  write_json(fs::path(args.out) / "run_manifest.json", manifest);

  if (!result.history.rounds.empty() && result.history.rounds.back().has_eval) {
    const nlsd::RoundMetrics& last = result.history.rounds.back();
    std::cout << "final mean_mae=" << last.mean_mae << " mean_f=" << last.mean_f << "\n";
  }
  std::cout << "run artifacts in " << args.out << "\n";
  return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& checkpoint_file,
             const std::string& data, const std::string& gt_dir, const std::string& out) {
  std::map<std::string, nlsd::SaliencyMap> preds;
  std::map<std::string, nlsd::SaliencyMap> gts;

  std::string gt_root = gt_dir;
  if (!checkpoint_file.empty()) {
    const nlsd::Checkpoint ckpt = nlsd::load_checkpoint(checkpoint_file);
    const nlsd::Dataset ds = nlsd::ingest_dataset(data);
    preds = nlsd::predict_dataset(ckpt.config, ckpt.params, ds);
    if (gt_root.empty()) gt_root = (fs::path(data) / "gt").string();
  }

  if (!fs::is_directory(gt_root)) {
    throw nlsd::IoError("eval: ground-truth directory '" + gt_root + "' not found");
  }
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(gt_root)) {
    if (entry.is_regular_file()) files.push_back(entry.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  for (const std::string& filename : files) {
    const std::string id = fs::path(filename).stem().string();
    gts.emplace(id, nlsd::load_map((fs::path(gt_root) / filename).string()));
    if (!pred_dir.empty()) {
      const fs::path p = fs::path(pred_dir) / filename;
      if (!fs::is_regular_file(p)) {
        throw nlsd::IoError("eval: no prediction for '" + filename + "' under '" + pred_dir +
                            "'");
      }
      preds.emplace(id, nlsd::load_map(p.string()));
    }
  }

  const nlsd::DatasetMetrics metrics = nlsd::evaluate_dataset(preds, gts);

  fs::create_directories(out);
  std::string per_image = "id,mae,f_beta\n";
  for (const nlsd::ImageMetrics& im : metrics.per_image) {
    per_image += im.id + "," + fmt_double(im.mae) + "," + fmt_double(im.f_beta) + "\n";
  }
  write_text(fs::path(out) / "per_image.csv", per_image);

  std::string pr_csv = "threshold,precision,recall\n";
  for (const nlsd::PRPoint& pt : metrics.pr) {
    pr_csv += std::to_string(pt.threshold) + "," + fmt_double(pt.precision) + "," +
              fmt_double(pt.recall) + "\n";
  }
  write_text(fs::path(out) / "pr_curve.csv", pr_csv);

  ordered_json j;
  j["mean_mae"] = metrics.mean_mae;
  j["mean_f"] = metrics.mean_f;
  ordered_json curve = ordered_json::array();
  for (const nlsd::PRPoint& pt : metrics.pr) {
    curve.push_back({{"threshold", pt.threshold},
                     {"precision", pt.precision},
                     {"recall", pt.recall}});
  }
  j["pr_curve"] = std::move(curve);
  write_json(fs::path(out) / "metrics.json", j);

  ordered_json manifest;
  manifest["command"] = "eval";
  manifest["version"] = nlsd::kVersion;
  manifest["images"] = static_cast<int>(metrics.per_image.size());
  write_json(fs::path(out) / "run_manifest.json", manifest);

  std::cout << "mean_mae=" << metrics.mean_mae << " mean_f=" << metrics.mean_f << " over "
            << metrics.per_image.size() << " images\n";
  return 0;
}

int cmd_export(const std::string& checkpoint_file, const std::string& data,
               const std::string& out) {
  const nlsd::Checkpoint ckpt = nlsd::load_checkpoint(checkpoint_file);
  const nlsd::Dataset ds = nlsd::ingest_dataset(data);
  nlsd::export_maps(ckpt.config, ckpt.params, ds, out);

  ordered_json manifest;
  manifest["command"] = "export";
  manifest["version"] = nlsd::kVersion;
  manifest["checkpoint"] = checkpoint_file;
  manifest["images"] = ds.size();
  write_json(fs::path(out) / "run_manifest.json", manifest);
  std::cout << "exported " << ds.size() << " maps to " << out << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  std::string csv = "run,round,noise_loss,mean_mae,mean_f\n";
  for (const std::string& run : runs) {
    const ordered_json j = read_json(fs::path(run) / "metrics.json");
    const std::string name = fs::path(run).filename().string();
    for (const ordered_json& row : j.at("rounds")) {
      csv += name + "," + std::to_string(row.at("round").get<int>()) + "," +
             fmt_double(row.at("noise_loss").get<double>()) + ",";
      csv += row.contains("mean_mae") ? fmt_double(row.at("mean_mae").get<double>()) : "";
      csv += ",";
      csv += row.contains("mean_f") ? fmt_double(row.at("mean_f").get<double>()) : "";
      csv += "\n";
    }
  }
  write_text(out, csv);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy-label saliency detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nlsd::kVersion);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  nlsd::SynthSpec spec;
  std::string synth_out;
  std::int64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--count", spec.count, "number of images");
  synth->add_option("--size", spec.size, "image side length");
  synth->add_option("--labellers", spec.labellers, "number of synthetic labellers");
  synth->add_option("--sigma", spec.sigma_true, "per-image noise levels, cycled");
  synth->add_option("--bias-strength", spec.bias_strength, "labeller bias amplitude");
  synth->add_option("--shapes", spec.shapes, "rect, disc or mixed");
  synth->add_option("--gt-low", spec.gt_low, "ground-truth background level");
  synth->add_option("--gt-high", spec.gt_high, "ground-truth foreground level");
  synth->add_option("--seed", synth_seed, "corpus seed");

  // label
  auto* label = app.add_subcommand("label", "run prior labellers over an image directory");
  std::string label_data, label_out;
  int cell_size = 4;
  bool include_center = false;
  label->add_option("--data", label_data, "directory of input images")->required();
  label->add_option("--out", label_out, "output directory")->required();
  label->add_option("--cell-size", cell_size, "grid cell size");
  label->add_flag("--include-center", include_center, "also emit the center prior");

  // train
  auto* train = app.add_subcommand("train", "train the joint model or a baseline");
  TrainArgs targs;
  train->add_option("--data", targs.data, "dataset root")->required();
  train->add_option("--out", targs.out, "run output directory")->required();
  train->add_option("--config", targs.config_file, "key=value config file");
  train->add_option("--manifest", targs.manifest_file, "re-run from a run manifest")
      ->excludes("--config");
  train->add_option("--baseline", targs.baseline, "bl1, bl2 or bl3");
  train->add_option("--seed", targs.seed, "global seed");
  train->add_option("--rounds", targs.rounds, "alternation rounds");
  train->add_option("--lambda", targs.lambda, "noise loss weight");
  train->add_option("--alpha", targs.alpha, "variance update step");

  // eval
  auto* eval = app.add_subcommand("eval", "score saliency maps against ground truth");
  std::string eval_pred, eval_ckpt, eval_data, eval_gt, eval_out;
  eval->add_option("--pred", eval_pred, "directory of predicted maps");
  eval->add_option("--checkpoint", eval_ckpt, "score a checkpoint instead of a map directory");
  eval->add_option("--data", eval_data, "dataset root (with --checkpoint)");
  eval->add_option("--gt", eval_gt, "ground-truth directory");
  eval->add_option("--out", eval_out, "output directory")->required();

  // export
  auto* exp = app.add_subcommand("export", "write predicted maps as PNG");
  std::string export_ckpt, export_data, export_out;
  exp->add_option("--checkpoint", export_ckpt, "trained checkpoint")->required();
  exp->add_option("--data", export_data, "dataset root")->required();
  exp->add_option("--out", export_out, "output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "merge per-round metrics from runs into a CSV");
  std::vector<std::string> report_runs;
  std::string report_out;
  report->add_option("runs", report_runs, "run directories")->required();
  report->add_option("--out", report_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      spec.seed = static_cast<std::uint64_t>(synth_seed);
      return cmd_synth(spec, synth_out);
    }
    if (label->parsed()) return cmd_label(label_data, label_out, cell_size, include_center);
    if (train->parsed()) return cmd_train(targs);
    if (eval->parsed()) {
      if (eval_pred.empty() == eval_ckpt.empty()) {
        std::cerr << "eval: pass exactly one of --pred or --checkpoint\n";
        return 2;
      }
      if (!eval_ckpt.empty() && eval_data.empty()) {
        std::cerr << "eval: --checkpoint needs --data\n";
        return 2;
      }
      if (eval_pred.empty() && eval_gt.empty() && eval_data.empty()) {
        std::cerr << "eval: --pred needs --gt\n";
        return 2;
      }
      if (!eval_pred.empty() && eval_gt.empty()) {
        std::cerr << "eval: --pred needs --gt\n";
        return 2;
      }
      return cmd_eval(eval_pred, eval_ckpt, eval_data, eval_gt, eval_out);
    }
    if (exp->parsed()) return cmd_export(export_ckpt, export_data, export_out);
    if (report->parsed()) return cmd_report(report_runs, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
