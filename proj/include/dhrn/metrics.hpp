#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/errors.hpp"

namespace dhrn {

// Rows are actual classes, columns are predicted classes.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::int64_t> counts;  // row-major C x C
  std::vector<std::string> class_names;

  std::int64_t& at(int actual, int predicted) { return counts[static_cast<std::size_t>(actual) * classes + predicted]; }
  std::int64_t at(int actual, int predicted) const {
    return counts[static_cast<std::size_t>(actual) * classes + predicted];
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels, int classes,
                                        std::vector<std::string> class_names = {}) {
  if (preds.size() != labels.size()) fail(ErrorKind::LengthMismatch, "confusion_matrix: length mismatch");
  if (preds.empty()) fail(ErrorKind::EmptyMatrix, "confusion_matrix: no examples");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(static_cast<std::size_t>(classes) * classes, 0);
  cm.class_names = std::move(class_names);
  if (cm.class_names.empty())
    for (int c = 0; c < classes; ++c) cm.class_names.push_back("class_" + std::to_string(c));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || labels[i] < 0 || labels[i] >= classes)
      fail(ErrorKind::IndexOutOfRange, "confusion_matrix: class index out of range");
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Accuracy plus one-vs-rest precision/recall/F1 per class and their
// unweighted (macro) means. Zero denominators score 0 rather than NaN.
struct Scores {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro
  std::vector<ClassScore> per_class;
};

inline Scores scores(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) fail(ErrorKind::EmptyMatrix, "scores: empty confusion matrix");
  Scores s;
  std::int64_t trace = 0;
  for (int c = 0; c < cm.classes; ++c) trace += cm.at(c, c);
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);

  for (int c = 0; c < cm.classes; ++c) {
    std::int64_t tp = cm.at(c, c), col = 0, row = 0;
    for (int k = 0; k < cm.classes; ++k) {
      col += cm.at(k, c);
      row += cm.at(c, k);
    }
    ClassScore cs;
    cs.precision = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    cs.recall = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    cs.f1 = (cs.precision + cs.recall) > 0.0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    s.per_class.push_back(cs);
    s.precision += cs.precision;
    s.recall += cs.recall;
    s.f1 += cs.f1;
  }
  s.precision /= cm.classes;
  s.recall /= cm.classes;
  s.f1 /= cm.classes;
  return s;
}

namespace detail {

inline std::string pct(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", x * 100.0);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_json(const std::string& task, const ConfusionMatrix& cm, const Scores& s) {
  nlohmann::json confusion = nlohmann::json::array();
  for (int r = 0; r < cm.classes; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < cm.classes; ++c) row.push_back(cm.at(r, c));
    confusion.push_back(row);
  }
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < cm.classes; ++c) {
    per_class[cm.class_names[c]] = {{"precision", s.per_class[c].precision},
                                    {"recall", s.per_class[c].recall},
                                    {"f1", s.per_class[c].f1}};
  }
  return nlohmann::json{{"task", task},          {"confusion", confusion}, {"accuracy", s.accuracy},
                        {"precision", s.precision}, {"recall", s.recall},  {"f1", s.f1},
                        {"per_class", per_class}};
}

inline std::string report_text(const std::string& task, const ConfusionMatrix& cm, const Scores& s) {
  std::string out = "task=" + task + "\n";
  out += "confusion (rows=actual, cols=predicted):\n";
  for (int r = 0; r < cm.classes; ++r) {
    out += "  " + cm.class_names[r] + ":";
    for (int c = 0; c < cm.classes; ++c) out += " " + std::to_string(cm.at(r, c));
    out += "\n";
  }
  out += "accuracy=" + detail::pct(s.accuracy) + " precision=" + detail::pct(s.precision) +
         " recall=" + detail::pct(s.recall) + " f1=" + detail::pct(s.f1) + " (macro)\n";
  return out;
}

// Combined two-task report: JSON array of per-task objects plus a text block.
struct Report {
  std::string text;
  nlohmann::json json;
};

inline Report render_report(const ConfusionMatrix& cm_detection, const Scores& s_detection,
                            const ConfusionMatrix& cm_intensity, const Scores& s_intensity) {
  Report r;
  r.json = nlohmann::json::array();
  r.json.push_back(report_json("detection", cm_detection, s_detection));
  r.json.push_back(report_json("intensity", cm_intensity, s_intensity));
  r.text = report_text("detection", cm_detection, s_detection) + report_text("intensity", cm_intensity, s_intensity);
  return r;
}

}  // namespace dhrn
