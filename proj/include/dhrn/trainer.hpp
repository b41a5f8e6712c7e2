#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dhrn/adam.hpp"
#include "dhrn/errors.hpp"
#include "dhrn/metrics.hpp"
#include "dhrn/model.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/swinfft.hpp"

namespace dhrn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 4;
  int max_epochs = 100;
  double loss_weight_detection = 1.0;  // task A
  double loss_weight_intensity = 1.0;  // task B
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  bool shuffle = true;

  // test/instrumentation hooks, not part of the persisted config
  std::function<void(int step, double loss_detection, double loss_intensity)> step_hook;
  std::ostream* log = nullptr;

  void validate() const {
    if (learning_rate <= 0.0 || batch_size < 1 || max_epochs < 1 || early_stop_patience < 1)
      fail(ErrorKind::InvalidConfig, "train config values must be positive");
    if (loss_weight_detection < 0.0 || loss_weight_intensity < 0.0)
      fail(ErrorKind::InvalidConfig, "loss weights must be non-negative");
    if (early_stop_patience > max_epochs)
      fail(ErrorKind::InvalidConfig, "patience must not exceed max_epochs");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss_detection = 0.0;
  double train_loss_intensity = 0.0;
  double val_loss_detection = 0.0;
  double val_loss_intensity = 0.0;
  double val_acc_detection = 0.0;
  double val_acc_intensity = 0.0;
  double wall_time_s = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct EvalResult {
  ConfusionMatrix cm_detection;
  ConfusionMatrix cm_intensity;
  Scores scores_detection;
  Scores scores_intensity;
  std::vector<int> pred_detection;
  std::vector<int> pred_intensity;
  double loss_detection = 0.0;
  double loss_intensity = 0.0;
};

namespace detail {

struct Batch {
  Tensor3 x;
  std::vector<int> labels_detection;
  std::vector<int> labels_intensity;
};

inline Batch make_batch(const std::vector<SpectrumWindow>& windows, const std::vector<std::size_t>& order,
                        std::size_t lo, std::size_t hi) {
  Batch b;
  const int n = static_cast<int>(hi - lo);
  const int len = static_cast<int>(windows[order[lo]].spectrum.size());
  b.x = Tensor3(n, 1, len);
  for (int i = 0; i < n; ++i) {
    const auto& w = windows[order[lo + static_cast<std::size_t>(i)]];
    if (static_cast<int>(w.spectrum.size()) != len) fail(ErrorKind::ShapeMismatch, "inconsistent spectrum lengths");
    std::copy(w.spectrum.begin(), w.spectrum.end(), b.x.row(i, 0));
    b.labels_detection.push_back(static_cast<int>(w.label.detection()));
    b.labels_intensity.push_back(static_cast<int>(w.label.intensity));
  }
  return b;
}

inline int argmax_row(const Matrix& m, int row) {
  int best = 0;
  for (int c = 1; c < m.cols; ++c)
    if (m.at(row, c) > m.at(row, best)) best = c;  // first index wins ties
  return best;
}

}  // namespace detail

// Window-level evaluation of one split: argmax predictions from both heads,
// confusion matrices, and the metrics the reports are built from.
inline EvalResult evaluate(DhrnModel& model, const std::vector<SpectrumWindow>& windows) {
  if (windows.empty()) fail(ErrorKind::EmptySplit, "evaluate: empty split");
  constexpr std::size_t kEvalBatch = 32;

  EvalResult r;
  std::vector<int> labels_detection, labels_intensity;
  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double loss_det_sum = 0.0, loss_int_sum = 0.0;
  for (std::size_t lo = 0; lo < windows.size(); lo += kEvalBatch) {
    const std::size_t hi = std::min(windows.size(), lo + kEvalBatch);
    auto batch = detail::make_batch(windows, order, lo, hi);
    const auto out = model_forward(model, batch.x, Mode::Eval);
    const auto ce_det = cross_entropy(out.logits_detection, batch.labels_detection);
    const auto ce_int = cross_entropy(out.logits_intensity, batch.labels_intensity);
    const double bn = static_cast<double>(hi - lo);
    loss_det_sum += ce_det.loss * bn;
    loss_int_sum += ce_int.loss * bn;
    for (int i = 0; i < batch.x.n; ++i) {
      r.pred_detection.push_back(detail::argmax_row(out.logits_detection, i));
      r.pred_intensity.push_back(detail::argmax_row(out.logits_intensity, i));
      labels_detection.push_back(batch.labels_detection[static_cast<std::size_t>(i)]);
      labels_intensity.push_back(batch.labels_intensity[static_cast<std::size_t>(i)]);
    }
  }
  r.loss_detection = loss_det_sum / static_cast<double>(windows.size());
  r.loss_intensity = loss_int_sum / static_cast<double>(windows.size());

  const auto det_names = detection_class_names();
  const auto int_names = intensity_class_names();
  r.cm_detection = confusion_matrix(r.pred_detection, labels_detection, kDetectionClasses,
                                    {det_names.begin(), det_names.end()});
  r.cm_intensity = confusion_matrix(r.pred_intensity, labels_intensity, kIntensityClasses,
                                    {int_names.begin(), int_names.end()});
  r.scores_detection = scores(r.cm_detection);
  r.scores_intensity = scores(r.cm_intensity);
  return r;
}

struct TrainResult {
  DhrnModel best_model;
  TrainHistory history;
  int best_epoch = -1;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Batched multi-task training: one Adam step per batch on
// w_det * CE(detection) + w_int * CE(intensity); epoch-seeded shuffling;
// early stop when the combined validation loss stops falling; returns the
// snapshot with the best combined validation loss.
inline TrainResult train(DhrnModel& model, const SpectrumDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.train.empty()) fail(ErrorKind::EmptySplit, "train split is empty");
  if (dataset.val.empty()) fail(ErrorKind::EmptySplit, "val split is empty");

  AdamState adam;
  adam.cfg.learning_rate = cfg.learning_rate;
  {
    std::vector<std::span<double>> spans;
    for (auto& t : model.trainable_params()) spans.emplace_back(t.data->data(), t.data->size());
    adam.init(spans);
  }

  TrainResult result;
  result.best_model = model;
  int epochs_since_best = 0;
  int global_step = 0;
  DhrnModel grads = zeros_like(model);

  std::vector<std::size_t> order(dataset.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.shuffle) {
      Rng rng(Rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order);
    }

    double loss_det_sum = 0.0, loss_int_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      auto batch = detail::make_batch(dataset.train, order, lo, hi);

      ModelCache cache;
      const auto out = model_forward(model, batch.x, Mode::Train, &cache);
      auto ce_det = cross_entropy(out.logits_detection, batch.labels_detection);
      auto ce_int = cross_entropy(out.logits_intensity, batch.labels_intensity);
      if (!std::isfinite(ce_det.loss) || !std::isfinite(ce_int.loss))
        fail(ErrorKind::DivergenceDetected,
             "non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
      for (auto& v : ce_det.grad_logits.v) v *= cfg.loss_weight_detection;
      for (auto& v : ce_int.grad_logits.v) v *= cfg.loss_weight_intensity;

      for (auto& t : grads.trainable_params()) std::fill(t.data->begin(), t.data->end(), 0.0);
      model_backward_into(model, cache, ce_int.grad_logits, ce_det.grad_logits, grads);
      std::vector<std::span<double>> pspans;
      std::vector<std::span<const double>> gspans;
      for (auto& t : model.trainable_params()) pspans.emplace_back(t.data->data(), t.data->size());
      for (auto& t : grads.trainable_params()) gspans.emplace_back(t.data->data(), t.data->size());
      adam_step(pspans, gspans, adam);

      const double bn = static_cast<double>(hi - lo);
      loss_det_sum += ce_det.loss * bn;
      loss_int_sum += ce_int.loss * bn;
      if (cfg.step_hook) cfg.step_hook(global_step, ce_det.loss, ce_int.loss);
      ++global_step;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss_detection = loss_det_sum / static_cast<double>(order.size());
    rec.train_loss_intensity = loss_int_sum / static_cast<double>(order.size());

    const auto val = evaluate(model, dataset.val);
    rec.val_loss_detection = val.loss_detection;
    rec.val_loss_intensity = val.loss_intensity;
    rec.val_acc_detection = val.scores_detection.accuracy;
    rec.val_acc_intensity = val.scores_intensity.accuracy;
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);

    if (cfg.log) {
      (*cfg.log) << "epoch=" << epoch << " loss_a=" << rec.train_loss_detection
                 << " loss_b=" << rec.train_loss_intensity << " val_acc_a=" << rec.val_acc_detection
                 << " val_acc_b=" << rec.val_acc_intensity << "\n";
    }

    const double combined = rec.val_loss_detection + rec.val_loss_intensity;
    if (combined < result.best_val_loss) {
      result.best_val_loss = combined;
      result.best_epoch = epoch;
      result.best_model = model;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= cfg.early_stop_patience) break;
  }
  return result;
}

}  // namespace dhrn
