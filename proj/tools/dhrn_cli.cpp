// Command-line front end for the cavitation pipeline: synthesize a labeled
// corpus, run the window/FFT augmentation, train the two-headed network,
// evaluate checkpoints, emit decimated corpora, and self-check gradients.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dhrn/gradcheck.hpp"
#include "dhrn/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitShape = 4;
constexpr int kExitGradcheck = 5;

int exit_code_for(const dhrn::Error& e) {
  switch (e.kind()) {
    case dhrn::ErrorKind::InvalidConfig:
    case dhrn::ErrorKind::InvalidSpec:
    case dhrn::ErrorKind::UnknownKey:
    case dhrn::ErrorKind::FactorTooLarge:
      return kExitUsage;
    case dhrn::ErrorKind::UnreadableFile:
    case dhrn::ErrorKind::IoFailure:
    case dhrn::ErrorKind::FormatMismatch:
    case dhrn::ErrorKind::EmptySignal:
    case dhrn::ErrorKind::NonFiniteSample:
      return kExitIo;
    case dhrn::ErrorKind::VersionMismatch:
    case dhrn::ErrorKind::CorruptCheckpoint:
    case dhrn::ErrorKind::ShapeMismatch:
      return kExitShape;
    default:
      return 1;
  }
}

void print_eval(const std::string& split, const dhrn::EvalResult& r) {
  std::printf("RESULT eval split=%s task=detection accuracy=%.6f precision=%.6f recall=%.6f f1=%.6f\n",
              split.c_str(), r.scores_detection.accuracy, r.scores_detection.precision, r.scores_detection.recall,
              r.scores_detection.f1);
  std::printf("RESULT eval split=%s task=intensity accuracy=%.6f precision=%.6f recall=%.6f f1=%.6f\n",
              split.c_str(), r.scores_intensity.accuracy, r.scores_intensity.precision, r.scores_intensity.recall,
              r.scores_intensity.f1);
}

std::vector<int> parse_factors(const std::string& csv) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    std::size_t end = csv.find(',', start);
    if (end == std::string::npos) end = csv.size();
    const std::string tok = csv.substr(start, end - start);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    start = end + 1;
    if (end == csv.size()) break;
  }
  if (out.empty()) dhrn::fail(dhrn::ErrorKind::InvalidConfig, "no decimation factors given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task 1-D DHRN cavitation pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic acoustic corpus");
  std::string synth_out;
  std::size_t per_class = 100;
  std::uint64_t synth_seed = 0;
  std::size_t synth_len = 65536;
  std::uint32_t synth_rate = 48000;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--per-class", per_class, "signals per flow class");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--len", synth_len, "samples per signal");
  synth->add_option("--rate", synth_rate, "sample rate in Hz");

  // augment
  auto* augment = app.add_subcommand("augment", "window + FFT a manifest into a training dataset");
  std::string aug_manifest, aug_out;
  std::size_t wsize = 0, stride = 0;
  std::uint64_t aug_seed = 0;
  double test_fraction = 0.20, val_fraction = 0.10;
  bool no_stratify = false;
  augment->add_option("--manifest", aug_manifest, "manifest.json path")->required();
  augment->add_option("--wsize", wsize, "window size in samples")->required();
  augment->add_option("--stride", stride, "window stride (default: wsize)");
  augment->add_option("--out", aug_out, "output dataset directory")->required();
  augment->add_option("--seed", aug_seed, "split seed when the manifest is unassigned");
  augment->add_option("--test-fraction", test_fraction, "test fraction for the pre-augmentation split");
  augment->add_option("--val-fraction", val_fraction, "validation fraction of the training pool");
  augment->add_flag("--no-stratify", no_stratify, "split without per-class stratification");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the network on an augmented dataset");
  std::string train_data, train_out, train_config;
  double width = -1.0, lr = -1.0, w_det = -1.0, w_int = -1.0;
  int batch = -1, epochs = -1, patience = -1;
  std::int64_t train_seed = -1;
  bool no_shuffle = false;
  train_cmd->add_option("--data", train_data, "augmented dataset directory")->required();
  train_cmd->add_option("--out", train_out, "output directory for checkpoint/history/reports")->required();
  train_cmd->add_option("--config", train_config, "JSON run config (flags override)");
  train_cmd->add_option("--width", width, "channel width multiplier");
  train_cmd->add_option("--lr", lr, "learning rate");
  train_cmd->add_option("--batch", batch, "batch size");
  train_cmd->add_option("--epochs", epochs, "maximum epochs");
  train_cmd->add_option("--patience", patience, "early-stop patience in epochs");
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--w-detection", w_det, "loss weight for the detection task");
  train_cmd->add_option("--w-intensity", w_int, "loss weight for the intensity task");
  train_cmd->add_flag("--no-shuffle", no_shuffle, "disable epoch shuffling");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one dataset split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "augmented dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test");
  eval_cmd->add_option("--out", eval_out, "write the JSON report here");

  // downsample
  auto* down = app.add_subcommand("downsample", "emit integer-decimated copies of a corpus");
  std::string down_manifest, down_out, factors_csv = "2,4,6,8,32";
  down->add_option("--manifest", down_manifest, "manifest.json path")->required();
  down->add_option("--factors", factors_csv, "comma-separated decimation factors");
  down->add_option("--out", down_out, "output root directory")->required();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "finite-difference audit of every backward pass");
  std::uint64_t grad_seed = 0;
  bool flip_conv = false;
  grad->add_option("--seed", grad_seed, "base seed for the random probes");
  grad->add_flag("--self-test-flip-conv", flip_conv, "corrupt the conv weight gradient (harness self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) {
      const auto summary = dhrn::run_synth(synth_out, per_class, synth_seed, synth_len, synth_rate);
      std::printf("RESULT synth signals=%zu per_class=%zu classes=%d dir=%s\n", summary.signals, summary.per_class,
                  dhrn::kIntensityClasses, synth_out.c_str());
    } else if (*augment) {
      dhrn::WindowConfig wcfg{wsize, stride};
      dhrn::SplitConfig scfg;
      scfg.seed = aug_seed;
      scfg.test_fraction = test_fraction;
      scfg.val_fraction_of_train = val_fraction;
      scfg.stratified = !no_stratify;
      const auto summary = dhrn::run_augment(aug_manifest, wcfg, aug_out, scfg);
      if (summary.skipped > 0)
        std::fprintf(stderr, "warning: %zu signal(s) shorter than the window were skipped\n", summary.skipped);
      std::printf("RESULT augment train=%zu val=%zu test=%zu skipped=%zu dir=%s\n", summary.train, summary.val,
                  summary.test, summary.skipped, aug_out.c_str());
    } else if (*train_cmd) {
      dhrn::RunConfig rc;
      if (!train_config.empty()) rc = dhrn::load_run_config(train_config);
      if (width > 0) rc.width_multiplier = width;
      if (lr > 0) rc.learning_rate = lr;
      if (batch > 0) rc.batch_size = batch;
      if (epochs > 0) rc.max_epochs = epochs;
      if (patience > 0) rc.patience = patience;
      if (train_seed >= 0) rc.seed = static_cast<std::uint64_t>(train_seed);
      if (w_det >= 0) rc.loss_weight_detection = w_det;
      if (w_int >= 0) rc.loss_weight_intensity = w_int;
      if (no_shuffle) rc.shuffle = false;
      const auto summary = dhrn::run_train(train_data, rc, train_out, &std::cout);
      std::printf("RESULT train epochs=%d best_epoch=%d best_val_loss=%.9g checkpoint=%s\n", summary.epochs_run,
                  summary.best_epoch, summary.best_val_loss, summary.checkpoint_path.string().c_str());
      if (summary.test_eval) print_eval("test", *summary.test_eval);
    } else if (*eval_cmd) {
      const auto split = dhrn::split_from_name(eval_split);
      if (split == dhrn::Split::Unassigned) dhrn::fail(dhrn::ErrorKind::InvalidConfig, "bad --split");
      const auto result = dhrn::run_eval(eval_ckpt, eval_data, split);
      const auto report = dhrn::eval_report(result);
      std::fputs(report.text.c_str(), stdout);
      print_eval(eval_split, result);
      if (!eval_out.empty()) {
        std::ofstream out(eval_out, std::ios::trunc);
        if (!out) dhrn::fail(dhrn::ErrorKind::IoFailure, "cannot write " + eval_out);
        out << report.json.dump(2) << "\n";
      }
    } else if (*down) {
      const auto summary = dhrn::run_downsample(down_manifest, parse_factors(factors_csv), down_out);
      for (const auto& [factor, dir] : summary.outputs)
        std::printf("RESULT downsample factor=%d manifest=%s\n", factor, (dir / "manifest.json").string().c_str());
    } else if (*grad) {
      dhrn::GradCheckOptions opt;
      opt.seed = grad_seed;
      opt.flip_conv_weight_grad = flip_conv;
      bool all_ok = true;
      for (const auto& r : dhrn::run_gradcheck_suite(opt)) {
        std::printf("RESULT gradcheck op=%s max_rel_err=%.3e ok=%d\n", r.name.c_str(), r.max_rel_err, r.ok ? 1 : 0);
        all_ok = all_ok && r.ok;
      }
      if (!all_ok) return kExitGradcheck;
    }
  } catch (const dhrn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
