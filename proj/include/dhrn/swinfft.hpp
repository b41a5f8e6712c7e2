#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/errors.hpp"
#include "dhrn/fft.hpp"
#include "dhrn/manifest.hpp"
#include "dhrn/signal.hpp"

namespace dhrn {

struct WindowConfig {
  std::size_t window_size = 0;
  std::size_t stride = 0;  // 0 means "= window_size" (non-overlapping)

  std::size_t effective_stride() const { return stride == 0 ? window_size : stride; }

  void validate() const {
    if (window_size < 1) fail(ErrorKind::InvalidConfig, "window size must be positive");
    const std::size_t s = effective_stride();
    if (s < 1 || s > window_size) fail(ErrorKind::InvalidConfig, "stride must be in [1, window_size]");
  }
};

inline std::size_t window_count(std::size_t signal_len, const WindowConfig& cfg) {
  cfg.validate();
  if (signal_len < cfg.window_size) return 0;
  return (signal_len - cfg.window_size) / cfg.effective_stride() + 1;
}

// Slice a signal into fixed-size windows; the trailing remainder is discarded.
inline std::vector<std::vector<double>> split_windows(const Signal& sig, const WindowConfig& cfg) {
  cfg.validate();
  if (sig.samples.size() < cfg.window_size)
    fail(ErrorKind::SignalShorterThanWindow, "signal shorter than one window");
  const std::size_t count = window_count(sig.samples.size(), cfg);
  const std::size_t stride = cfg.effective_stride();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const auto* begin = sig.samples.data() + w * stride;
    out.emplace_back(begin, begin + cfg.window_size);
  }
  return out;
}

// One augmented example: the window's one-sided magnitude spectrum plus labels.
struct SpectrumWindow {
  std::vector<double> spectrum;
  FlowLabel label;
  std::size_t source_id = 0;     // manifest entry index
  std::size_t window_index = 0;  // window position within its source signal
};

struct SpectrumDataset {
  std::size_t window_size = 0;
  std::size_t fft_size = 0;  // power of two the windows were padded to
  std::size_t stride = 0;
  std::vector<SpectrumWindow> train;
  std::vector<SpectrumWindow> val;
  std::vector<SpectrumWindow> test;

  std::size_t spectrum_len() const { return fft_size / 2 + 1; }

  const std::vector<SpectrumWindow>& split(Split s) const {
    switch (s) {
      case Split::Train: return train;
      case Split::Val: return val;
      case Split::Test: return test;
      default: break;
    }
    fail(ErrorKind::EmptySplit, "no such split");
  }
};

struct AugmentStats {
  std::size_t skipped_short_signals = 0;
};

// Swin-FFT over a fully split manifest: every window inherits its source
// signal's labels and split. Signals shorter than one window are skipped
// (counted in stats); producing zero windows overall is an error.
inline SpectrumDataset augment_split(const Manifest& manifest, const WindowConfig& cfg,
                                     const std::filesystem::path& manifest_dir, AugmentStats* stats = nullptr) {
  cfg.validate();
  for (const auto& e : manifest.entries)
    if (e.split == Split::Unassigned)
      fail(ErrorKind::AlreadySplit, "manifest must be fully split before augmentation: " + e.path);

  SpectrumDataset ds;
  ds.window_size = cfg.window_size;
  ds.fft_size = next_pow2(cfg.window_size);
  ds.stride = cfg.effective_stride();

  for (std::size_t idx = 0; idx < manifest.entries.size(); ++idx) {
    const auto& entry = manifest.entries[idx];
    Signal sig;
    try {
      sig = load_entry_signal(manifest_dir, entry);
    } catch (const Error& e) {
      fail(e.kind(), entry.path + " (entry " + std::to_string(idx) + "): " + e.what());
    }
    if (sig.samples.size() < cfg.window_size) {
      if (stats) ++stats->skipped_short_signals;
      continue;
    }
    auto windows = split_windows(sig, cfg);
    auto& bucket = entry.split == Split::Train ? ds.train : (entry.split == Split::Val ? ds.val : ds.test);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      SpectrumWindow sw;
      sw.spectrum = rfft_magnitude(windows[w]);
      sw.label = entry.label;
      sw.source_id = idx;
      sw.window_index = w;
      bucket.push_back(std::move(sw));
    }
  }
  if (ds.train.empty() && ds.val.empty() && ds.test.empty())
    fail(ErrorKind::EmptyOutput, "augmentation produced no windows");
  return ds;
}

// --- on-disk format: meta.json + per-split raw f32 tensor + label csv -------

namespace detail {

inline void write_split_files(const std::filesystem::path& dir, const std::string& name,
                              const std::vector<SpectrumWindow>& windows, std::size_t spectrum_len) {
  {
    std::ofstream out(dir / (name + ".f32"), std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot write " + (dir / (name + ".f32")).string());
    std::vector<float> row(spectrum_len);
    for (const auto& w : windows) {
      if (w.spectrum.size() != spectrum_len) fail(ErrorKind::ShapeMismatch, "inconsistent spectrum length");
      for (std::size_t i = 0; i < spectrum_len; ++i) row[i] = static_cast<float>(w.spectrum[i]);
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) fail(ErrorKind::IoFailure, "short write for split " + name);
  }
  {
    std::ofstream out(dir / (name + "_labels.csv"), std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot write labels for split " + name);
    out << "window_id,intensity,detection\n";
    for (const auto& w : windows) {
      out << w.source_id << ":" << w.window_index << "," << intensity_name(w.label.intensity) << ","
          << detection_name(w.label.detection()) << "\n";
    }
    if (!out) fail(ErrorKind::IoFailure, "short write for split " + name);
  }
}

inline std::vector<SpectrumWindow> read_split_files(const std::filesystem::path& dir, const std::string& name,
                                                    std::size_t spectrum_len) {
  std::vector<SpectrumWindow> windows;
  std::ifstream labels(dir / (name + "_labels.csv"));
  if (!labels) fail(ErrorKind::UnreadableFile, (dir / (name + "_labels.csv")).string());
  std::ifstream data(dir / (name + ".f32"), std::ios::binary);
  if (!data) fail(ErrorKind::UnreadableFile, (dir / (name + ".f32")).string());

  std::string line;
  std::getline(labels, line);  // header
  std::vector<float> row(spectrum_len);
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, intensity, detection;
    if (!std::getline(ss, id, ',') || !std::getline(ss, intensity, ',') || !std::getline(ss, detection))
      fail(ErrorKind::FormatMismatch, "bad label row: " + line);
    SpectrumWindow w;
    const auto colon = id.find(':');
    if (colon == std::string::npos) fail(ErrorKind::FormatMismatch, "bad window id: " + id);
    w.source_id = std::stoull(id.substr(0, colon));
    w.window_index = std::stoull(id.substr(colon + 1));
    w.label.intensity = intensity_from_name(intensity);
    data.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (data.gcount() != static_cast<std::streamsize>(row.size() * 4))
      fail(ErrorKind::CorruptCheckpoint, "spectrum tensor shorter than label file for split " + name);
    w.spectrum.assign(row.begin(), row.end());
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace detail

inline void save_spectrum_dataset(const std::filesystem::path& dir, const SpectrumDataset& ds) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"w_size", ds.window_size},
                      {"fft_size", ds.fft_size},
                      {"stride", ds.stride},
                      {"spectrum_len", ds.spectrum_len()},
                      {"counts",
                       {{"train", ds.train.size()}, {"val", ds.val.size()}, {"test", ds.test.size()}}}};
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write meta.json");
  out << meta.dump(2) << "\n";
  detail::write_split_files(dir, "train", ds.train, ds.spectrum_len());
  detail::write_split_files(dir, "val", ds.val, ds.spectrum_len());
  detail::write_split_files(dir, "test", ds.test, ds.spectrum_len());
}

inline SpectrumDataset load_spectrum_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) fail(ErrorKind::UnreadableFile, (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatMismatch, std::string("meta.json: ") + e.what());
  }
  SpectrumDataset ds;
  ds.window_size = meta.at("w_size").get<std::size_t>();
  ds.fft_size = meta.at("fft_size").get<std::size_t>();
  ds.stride = meta.contains("stride") ? meta.at("stride").get<std::size_t>() : ds.window_size;
  ds.train = detail::read_split_files(dir, "train", ds.spectrum_len());
  ds.val = detail::read_split_files(dir, "val", ds.spectrum_len());
  ds.test = detail::read_split_files(dir, "test", ds.spectrum_len());
  const auto check = [&](const std::vector<SpectrumWindow>& v, const char* key) {
    if (v.size() != meta.at("counts").at(key).get<std::size_t>())
      fail(ErrorKind::FormatMismatch, std::string("split size disagrees with meta.json: ") + key);
  };
  check(ds.train, "train");
  check(ds.val, "val");
  check(ds.test, "test");
  return ds;
}

}  // namespace dhrn
