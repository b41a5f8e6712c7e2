#include <doctest.h>

#include <vector>

#include "dhrn/metrics.hpp"
#include "dhrn/rng.hpp"

using namespace dhrn;

namespace {

// brute-force one-vs-rest recount, independent of the production tallies
Scores brute_scores(const std::vector<int>& preds, const std::vector<int>& labels, int classes) {
  Scores s;
  int correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  for (int c = 0; c < classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    ClassScore cs;
    cs.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    cs.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    cs.f1 = cs.precision + cs.recall > 0 ? 2 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    s.per_class.push_back(cs);
    s.precision += cs.precision / classes;
    s.recall += cs.recall / classes;
    s.f1 += cs.f1 / classes;
  }
  return s;
}

}  // namespace

TEST_CASE("confusion matrix counting") {
  const auto diag = confusion_matrix({0, 1, 2, 3}, {0, 1, 2, 3}, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(diag.at(r, c) == (r == c ? 1 : 0));

  const auto cm = confusion_matrix({1, 1}, {0, 1}, 2);
  CHECK(cm.at(0, 0) == 0);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.at(1, 1) == 1);

  Rng rng(42);
  std::vector<int> preds, labels;
  for (int i = 0; i < 200; ++i) {
    preds.push_back(static_cast<int>(rng.below(5)));
    labels.push_back(static_cast<int>(rng.below(5)));
  }
  const auto rc = confusion_matrix(preds, labels, 5);
  for (int c = 0; c < 5; ++c) {
    std::int64_t row = 0;
    for (int k = 0; k < 5; ++k) row += rc.at(c, k);
    std::int64_t want = 0;
    for (int lb : labels)
      if (lb == c) ++want;
    CHECK(row == want);
  }

  CHECK_THROWS_AS((void)confusion_matrix({0}, {0, 1}, 2), Error);
  CHECK_THROWS_AS((void)confusion_matrix({5}, {0}, 2), Error);
  CHECK_THROWS_AS((void)confusion_matrix({}, {}, 2), Error);
}

TEST_CASE("perfect predictions score one everywhere") {
  ConfusionMatrix cm;
  cm.classes = 2;
  cm.counts = {5, 0, 0, 5};
  cm.class_names = {"a", "b"};
  const auto s = scores(cm);
  CHECK(s.accuracy == 1.0);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
  CHECK(s.f1 == 1.0);
}

TEST_CASE("hand-enumerated two-class scores") {
  ConfusionMatrix cm;
  cm.classes = 2;
  cm.counts = {3, 1, 2, 4};
  cm.class_names = {"a", "b"};
  const auto s = scores(cm);
  CHECK(s.accuracy == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(s.per_class[0].precision == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(s.per_class[1].precision == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(s.precision == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("constant predictor on balanced four-class labels") {
  std::vector<int> preds(40, 0), labels;
  for (int i = 0; i < 40; ++i) labels.push_back(i % 4);
  const auto s = scores(confusion_matrix(preds, labels, 4));
  CHECK(s.accuracy == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.recall == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.precision == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("scores match a brute-force recount on random prediction sets") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(900 + trial);
    const int classes = 2 + static_cast<int>(rng.below(4));
    const int n = 5 + static_cast<int>(rng.below(60));
    std::vector<int> preds, labels;
    for (int i = 0; i < n; ++i) {
      preds.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
      labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
    }
    const auto got = scores(confusion_matrix(preds, labels, classes));
    const auto want = brute_scores(preds, labels, classes);
    CHECK(got.accuracy == doctest::Approx(want.accuracy).epsilon(1e-12));
    CHECK(got.precision == doctest::Approx(want.precision).epsilon(1e-12));
    CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
    CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
    for (int c = 0; c < classes; ++c) {
      CHECK(got.per_class[c].f1 <=
            std::max(got.per_class[c].precision, got.per_class[c].recall) + 1e-12);
      CHECK(got.per_class[c].precision >= 0.0);
      CHECK(got.per_class[c].precision <= 1.0);
    }
  }
}

TEST_CASE("accuracy is invariant under a class relabeling") {
  Rng rng(77);
  std::vector<int> preds, labels;
  for (int i = 0; i < 100; ++i) {
    preds.push_back(static_cast<int>(rng.below(4)));
    labels.push_back(static_cast<int>(rng.below(4)));
  }
  const int perm[4] = {2, 0, 3, 1};
  std::vector<int> pp, pl;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pp.push_back(perm[preds[i]]);
    pl.push_back(perm[labels[i]]);
  }
  const auto a = scores(confusion_matrix(preds, labels, 4));
  const auto b = scores(confusion_matrix(pp, pl, 4));
  CHECK(a.accuracy == b.accuracy);
}

TEST_CASE("micro recall equals accuracy for single-label tasks") {
  Rng rng(78);
  std::vector<int> preds, labels;
  for (int i = 0; i < 150; ++i) {
    preds.push_back(static_cast<int>(rng.below(3)));
    labels.push_back(static_cast<int>(rng.below(3)));
  }
  const auto cm = confusion_matrix(preds, labels, 3);
  std::int64_t tp = 0, fn_plus_tp = 0;
  for (int c = 0; c < 3; ++c) {
    tp += cm.at(c, c);
    for (int k = 0; k < 3; ++k) fn_plus_tp += cm.at(c, k);
  }
  const double micro_recall = static_cast<double>(tp) / static_cast<double>(fn_plus_tp);
  CHECK(micro_recall == doctest::Approx(scores(cm).accuracy).epsilon(1e-12));
}

TEST_CASE("reports render deterministically and round-trip through json") {
  ConfusionMatrix det;
  det.classes = 2;
  det.counts = {7, 0, 0, 3};
  det.class_names = {"cavitation", "non_cavitation"};
  ConfusionMatrix inten;
  inten.classes = 4;
  inten.counts = {2, 0, 0, 0, 0, 3, 0, 0, 0, 0, 2, 0, 0, 0, 0, 3};
  inten.class_names = {"choked_flow", "constant_cavitation", "incipient_cavitation", "non_cavitation"};

  const auto r1 = render_report(det, scores(det), inten, scores(inten));
  const auto r2 = render_report(det, scores(det), inten, scores(inten));
  CHECK(r1.text == r2.text);
  CHECK(r1.json.dump() == r2.json.dump());
  CHECK(r1.text.find("accuracy=100.00%") != std::string::npos);

  const auto parsed = nlohmann::json::parse(r1.json.dump());
  CHECK(parsed[0]["task"] == "detection");
  CHECK(parsed[1]["task"] == "intensity");
  CHECK(parsed[0]["accuracy"].get<double>() == 1.0);
  CHECK(parsed[1]["confusion"][1][1].get<int>() == 3);
  CHECK(parsed[1]["per_class"].contains("incipient_cavitation"));
}
