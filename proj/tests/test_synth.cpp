#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dhrn/fft.hpp"
#include "dhrn/swinfft.hpp"
#include "dhrn/synth.hpp"

using namespace dhrn;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.per_class_count = 12;
  spec.signal_len = 16384;
  spec.seed = seed;
  return spec;
}

std::vector<double> mean_spectrum(const std::vector<const Signal*>& signals, std::size_t window) {
  std::vector<double> mean;
  std::size_t count = 0;
  for (const Signal* s : signals) {
    for (const auto& win : split_windows(*s, {window, 0})) {
      const auto mag = rfft_magnitude(win);
      if (mean.empty()) mean.assign(mag.size(), 0.0);
      for (std::size_t i = 0; i < mag.size(); ++i) mean[i] += mag[i];
      ++count;
    }
  }
  for (auto& v : mean) v /= static_cast<double>(count);
  return mean;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_dataset(small_spec(4));
  const auto b = generate_dataset(small_spec(4));
  REQUIRE(a.signals.size() == b.signals.size());
  for (std::size_t i = 0; i < a.signals.size(); ++i) CHECK(a.signals[i].samples == b.signals[i].samples);
  const auto c = generate_dataset(small_spec(5));
  CHECK(a.signals[0].samples != c.signals[0].samples);
}

TEST_CASE("without a noise floor the spectral peak falls inside the class band") {
  SynthSpec spec = small_spec(6);
  spec.noise_floor = 0.0;
  spec.per_class_count = 4;
  const auto ds = generate_dataset(spec);
  for (std::size_t i = 0; i < ds.signals.size(); ++i) {
    const int cls = static_cast<int>(ds.manifest.entries[i].label.intensity);
    const auto& band = spec.class_bands[static_cast<std::size_t>(cls)][0];
    const auto mag = rfft_magnitude(ds.signals[i].samples);
    const std::size_t peak =
        static_cast<std::size_t>(std::max_element(mag.begin() + 1, mag.end()) - mag.begin());
    const double frac = static_cast<double>(peak) / static_cast<double>(mag.size() - 1);
    CHECK(frac >= band.center - band.bandwidth * 0.5 - 1e-9);
    CHECK(frac <= band.center + band.bandwidth * 0.5 + 1e-9);
  }
}

TEST_CASE("signals are finite and zero-mean within three standard errors") {
  const auto ds = generate_dataset(small_spec(7));
  for (const auto& s : ds.signals) {
    double mean = 0.0, var = 0.0;
    for (double v : s.samples) {
      REQUIRE(std::isfinite(v));
      mean += v;
    }
    mean /= static_cast<double>(s.samples.size());
    for (double v : s.samples) var += (v - mean) * (v - mean);
    var /= static_cast<double>(s.samples.size());
    const double se = std::sqrt(var / static_cast<double>(s.samples.size()));
    CHECK(std::abs(mean) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("class-conditional mean spectra are dissimilar") {
  const auto ds = generate_dataset(small_spec(8));
  std::vector<std::vector<double>> means;
  for (int cls = 0; cls < 4; ++cls) {
    std::vector<const Signal*> sigs;
    for (std::size_t i = 0; i < ds.signals.size(); ++i)
      if (static_cast<int>(ds.manifest.entries[i].label.intensity) == cls) sigs.push_back(&ds.signals[i]);
    means.push_back(mean_spectrum(sigs, 2048));
  }
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b) CHECK(cosine(means[a], means[b]) < 0.9);
}

TEST_CASE("nearest-centroid on mean spectra separates the default classes") {
  SynthSpec spec = small_spec(9);
  spec.per_class_count = 20;
  const auto ds = generate_dataset(spec);

  // centroids from the first half of each class, scored on the second half
  std::vector<std::vector<double>> centroids(4);
  int correct = 0, total = 0;
  for (int cls = 0; cls < 4; ++cls) {
    std::vector<const Signal*> train;
    for (std::size_t i = 0; i < ds.signals.size(); ++i)
      if (static_cast<int>(ds.manifest.entries[i].label.intensity) == cls &&
          i % spec.per_class_count < spec.per_class_count / 2)
        train.push_back(&ds.signals[i]);
    centroids[static_cast<std::size_t>(cls)] = mean_spectrum(train, 2048);
  }
  for (std::size_t i = 0; i < ds.signals.size(); ++i) {
    if (i % spec.per_class_count < spec.per_class_count / 2) continue;
    const int cls = static_cast<int>(ds.manifest.entries[i].label.intensity);
    for (const auto& win : split_windows(ds.signals[i], {2048, 0})) {
      const auto mag = rfft_magnitude(win);
      int best = 0;
      double best_cos = -2.0;
      for (int c = 0; c < 4; ++c) {
        const double cs = cosine(mag, centroids[static_cast<std::size_t>(c)]);
        if (cs > best_cos) {
          best_cos = cs;
          best = c;
        }
      }
      correct += best == cls ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("overlapping class bands are rejected") {
  SynthSpec spec = small_spec(10);
  spec.class_bands[1][0].center = spec.class_bands[0][0].center + spec.class_bands[0][0].bandwidth;
  CHECK_THROWS_AS((void)generate_dataset(spec), Error);

  SynthSpec zero = small_spec(11);
  zero.per_class_count = 0;
  CHECK_THROWS_AS((void)generate_dataset(zero), Error);
}

TEST_CASE("written dataset loads back through the manifest") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "dhrn_synth_tests";
  SynthSpec spec = small_spec(12);
  spec.per_class_count = 2;
  const auto ds = generate_dataset(spec);
  write_synth_dataset(dir, ds);
  const Manifest m = load_manifest((dir / "manifest.json").string());
  REQUIRE(m.entries.size() == 8);
  const Signal s = load_entry_signal(dir, m.entries[0]);
  CHECK(s.samples.size() == spec.signal_len);
  CHECK(s.sample_rate_hz == spec.sample_rate_hz);
  // f32 narrowing is the only difference between memory and disk
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(s.samples[i] == static_cast<double>(static_cast<float>(ds.signals[0].samples[i])));
}
