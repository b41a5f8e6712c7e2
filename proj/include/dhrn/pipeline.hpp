#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/manifest.hpp"
#include "dhrn/metrics.hpp"
#include "dhrn/model.hpp"
#include "dhrn/swinfft.hpp"
#include "dhrn/synth.hpp"
#include "dhrn/trainer.hpp"

namespace dhrn {

// One config file drives the train command; flags override. Unknown keys are
// rejected so typos cannot silently fall back to defaults.
struct RunConfig {
  double width_multiplier = 1.0;
  double learning_rate = 1e-4;
  int batch_size = 4;
  int max_epochs = 100;
  int patience = 10;
  double loss_weight_detection = 1.0;
  double loss_weight_intensity = 1.0;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "width_multiplier", "learning_rate",        "batch_size",            "max_epochs", "patience",
      "loss_weight_detection", "loss_weight_intensity", "seed",           "shuffle"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) fail(ErrorKind::UnknownKey, "config key '" + key + "' is not recognized");
  }
  RunConfig c;
  if (j.contains("width_multiplier")) c.width_multiplier = j.at("width_multiplier").get<double>();
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("patience")) c.patience = j.at("patience").get<int>();
  if (j.contains("loss_weight_detection")) c.loss_weight_detection = j.at("loss_weight_detection").get<double>();
  if (j.contains("loss_weight_intensity")) c.loss_weight_intensity = j.at("loss_weight_intensity").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("shuffle")) c.shuffle = j.at("shuffle").get<bool>();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::UnreadableFile, path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatMismatch, path + ": " + e.what());
  }
  return run_config_from_json(j);
}

// --- synth -------------------------------------------------------------------

struct SynthSummary {
  std::size_t signals = 0;
  std::size_t per_class = 0;
};

inline SynthSummary run_synth(const std::filesystem::path& out_dir, std::size_t per_class, std::uint64_t seed,
                              std::size_t signal_len, std::uint32_t rate_hz) {
  SynthSpec spec;
  spec.per_class_count = per_class;
  spec.seed = seed;
  spec.signal_len = signal_len;
  spec.sample_rate_hz = rate_hz;
  const auto ds = generate_dataset(spec);
  write_synth_dataset(out_dir, ds);
  return {ds.signals.size(), per_class};
}

// --- augment -----------------------------------------------------------------

struct AugmentSummary {
  std::size_t train = 0, val = 0, test = 0;
  std::size_t skipped = 0;
};

inline AugmentSummary run_augment(const std::filesystem::path& manifest_path, const WindowConfig& wcfg,
                                  const std::filesystem::path& out_dir, const SplitConfig& scfg) {
  Manifest manifest = load_manifest(manifest_path.string());
  bool any_assigned = false;
  for (const auto& e : manifest.entries) any_assigned = any_assigned || e.split != Split::Unassigned;
  if (!any_assigned) manifest = split_dataset(manifest, scfg);

  AugmentStats stats;
  const auto ds = augment_split(manifest, wcfg, manifest_path.parent_path(), &stats);
  save_spectrum_dataset(out_dir, ds);
  return {ds.train.size(), ds.val.size(), ds.test.size(), stats.skipped_short_signals};
}

// --- train -------------------------------------------------------------------

struct TrainSummary {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  std::optional<EvalResult> test_eval;
  std::filesystem::path checkpoint_path;
};

namespace detail {

inline void write_history_csv(const std::filesystem::path& path, const TrainHistory& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path.string());
  out << "epoch,train_loss_a,train_loss_b,val_loss_a,val_loss_b,val_acc_a,val_acc_b,wall_time_s\n";
  char buf[256];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.3f\n", e.epoch,
                  e.train_loss_detection, e.train_loss_intensity, e.val_loss_detection, e.val_loss_intensity,
                  e.val_acc_detection, e.val_acc_intensity, e.wall_time_s);
    out << buf;
  }
}

inline nlohmann::json history_json(const TrainHistory& h) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    arr.push_back({{"epoch", e.epoch},
                   {"train_loss_a", e.train_loss_detection},
                   {"train_loss_b", e.train_loss_intensity},
                   {"val_loss_a", e.val_loss_detection},
                   {"val_loss_b", e.val_loss_intensity},
                   {"val_acc_a", e.val_acc_detection},
                   {"val_acc_b", e.val_acc_intensity},
                   {"wall_time_s", e.wall_time_s}});
  }
  return arr;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path.string());
  out << text;
}

}  // namespace detail

inline Report eval_report(const EvalResult& r) {
  return render_report(r.cm_detection, r.scores_detection, r.cm_intensity, r.scores_intensity);
}

inline TrainSummary run_train(const std::filesystem::path& data_dir, const RunConfig& rc,
                              const std::filesystem::path& out_dir, std::ostream* log = nullptr) {
  const SpectrumDataset dataset = load_spectrum_dataset(data_dir);

  DhrnConfig mcfg;
  mcfg.input_len = static_cast<int>(dataset.spectrum_len());
  mcfg.width_multiplier = rc.width_multiplier;
  DhrnModel model = build_dhrn(mcfg, rc.seed);

  TrainConfig tcfg;
  tcfg.learning_rate = rc.learning_rate;
  tcfg.batch_size = rc.batch_size;
  tcfg.max_epochs = rc.max_epochs;
  tcfg.early_stop_patience = std::min(rc.patience, rc.max_epochs);
  tcfg.loss_weight_detection = rc.loss_weight_detection;
  tcfg.loss_weight_intensity = rc.loss_weight_intensity;
  tcfg.seed = rc.seed;
  tcfg.shuffle = rc.shuffle;
  tcfg.log = log;

  TrainResult tr = train(model, dataset, tcfg);

  std::filesystem::create_directories(out_dir);
  TrainSummary summary;
  summary.epochs_run = static_cast<int>(tr.history.epochs.size());
  summary.best_epoch = tr.best_epoch;
  summary.best_val_loss = tr.best_val_loss;
  summary.checkpoint_path = out_dir / "checkpoint.bin";
  save_checkpoint(tr.best_model, summary.checkpoint_path.string());
  detail::write_history_csv(out_dir / "history.csv", tr.history);
  detail::write_text_file(out_dir / "history.json", detail::history_json(tr.history).dump(2) + "\n");

  if (!dataset.test.empty()) {
    summary.test_eval = evaluate(tr.best_model, dataset.test);
    const Report rep = eval_report(*summary.test_eval);
    detail::write_text_file(out_dir / "report_test.json", rep.json.dump(2) + "\n");
    detail::write_text_file(out_dir / "report_test.txt", rep.text);
  }
  return summary;
}

// --- eval --------------------------------------------------------------------

inline EvalResult run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                           Split split) {
  const SpectrumDataset dataset = load_spectrum_dataset(data_dir);
  DhrnModel model = load_checkpoint(checkpoint.string());
  if (model.cfg.input_len != static_cast<int>(dataset.spectrum_len()))
    fail(ErrorKind::VersionMismatch,
         "checkpoint expects input_len " + std::to_string(model.cfg.input_len) + " but dataset provides " +
             std::to_string(dataset.spectrum_len()));
  return evaluate(model, dataset.split(split));
}

// --- downsample --------------------------------------------------------------

struct DownsampleSummary {
  std::vector<std::pair<int, std::filesystem::path>> outputs;  // factor -> manifest dir
};

// Emits one decimated copy of the corpus per factor, each ready for augment.
inline DownsampleSummary run_downsample(const std::filesystem::path& manifest_path, const std::vector<int>& factors,
                                        const std::filesystem::path& out_root) {
  const Manifest manifest = load_manifest(manifest_path.string());
  const auto base_dir = manifest_path.parent_path();
  DownsampleSummary summary;
  for (int factor : factors) {
    if (factor < 1) fail(ErrorKind::FactorTooLarge, "factors must be >= 1");
    const auto dir = out_root / ("factor_" + std::to_string(factor));
    std::filesystem::create_directories(dir);
    Manifest out = manifest;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const Signal sig = load_entry_signal(base_dir, manifest.entries[i]);
      const Signal dec = decimate(sig, factor);
      const std::string name = "dec" + std::to_string(factor) + "_" + std::to_string(i) + ".f32";
      save_raw_f32((dir / name).string(), dec.samples);
      out.entries[i].path = name;
      out.entries[i].format = SignalFormat::RawF32LE;
      out.entries[i].sample_rate_hz = dec.sample_rate_hz;
    }
    save_manifest((dir / "manifest.json").string(), out);
    summary.outputs.emplace_back(factor, dir);
  }
  return summary;
}

}  // namespace dhrn
