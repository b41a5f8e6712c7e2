#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/errors.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/signal.hpp"

namespace dhrn {

// Four intensity classes. Raw source states "turbulent_flow" and "no_flow"
// both collapse to NonCavitation at ingestion.
enum class Intensity : int { ChokedFlow = 0, ConstantCavitation = 1, IncipientCavitation = 2, NonCavitation = 3 };

enum class Detection : int { Cavitation = 0, NonCavitation = 1 };

constexpr int kIntensityClasses = 4;
constexpr int kDetectionClasses = 2;

inline Detection detection_of(Intensity i) {
  return i == Intensity::NonCavitation ? Detection::NonCavitation : Detection::Cavitation;
}

struct FlowLabel {
  Intensity intensity = Intensity::NonCavitation;
  Detection detection() const { return detection_of(intensity); }
};

inline const char* intensity_name(Intensity i) {
  switch (i) {
    case Intensity::ChokedFlow: return "choked_flow";
    case Intensity::ConstantCavitation: return "constant_cavitation";
    case Intensity::IncipientCavitation: return "incipient_cavitation";
    case Intensity::NonCavitation: return "non_cavitation";
  }
  return "?";
}

inline const char* detection_name(Detection d) {
  return d == Detection::Cavitation ? "cavitation" : "non_cavitation";
}

inline Intensity intensity_from_name(const std::string& s) {
  if (s == "choked_flow") return Intensity::ChokedFlow;
  if (s == "constant_cavitation") return Intensity::ConstantCavitation;
  if (s == "incipient_cavitation") return Intensity::IncipientCavitation;
  if (s == "non_cavitation" || s == "turbulent_flow" || s == "no_flow") return Intensity::NonCavitation;
  fail(ErrorKind::FormatMismatch, "unknown intensity label '" + s + "'");
}

inline std::array<std::string, 4> intensity_class_names() {
  return {"choked_flow", "constant_cavitation", "incipient_cavitation", "non_cavitation"};
}

inline std::array<std::string, 2> detection_class_names() { return {"cavitation", "non_cavitation"}; }

enum class Split : int { Train = 0, Val = 1, Test = 2, Unassigned = 3 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "?";
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  fail(ErrorKind::FormatMismatch, "unknown split '" + s + "'");
}

struct ManifestEntry {
  std::string path;  // relative to the manifest file's directory
  SignalFormat format = SignalFormat::RawF32LE;
  std::uint32_t sample_rate_hz = 0;
  FlowLabel label;
  Split split = Split::Unassigned;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::size_t count_in_split(Split s) const {
    std::size_t n = 0;
    for (const auto& e : entries)
      if (e.split == s) ++n;
    return n;
  }
};

struct SplitConfig {
  double test_fraction = 0.20;
  double val_fraction_of_train = 0.10;
  std::uint64_t seed = 0;
  bool stratified = true;
};

namespace detail {

inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace detail

// Deterministic pre-augmentation split: the test set is carved first
// (round-half-up per class when stratified), then validation is carved from
// the remaining training pool.
inline Manifest split_dataset(const Manifest& manifest, const SplitConfig& cfg) {
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) ||
      !(cfg.val_fraction_of_train > 0.0 && cfg.val_fraction_of_train < 1.0))
    fail(ErrorKind::InvalidConfig, "split fractions must be in (0, 1)");
  for (const auto& e : manifest.entries)
    if (e.split != Split::Unassigned) fail(ErrorKind::AlreadySplit, "manifest already has split assignments");

  // group entry indices by intensity class, or all-in-one when unstratified
  std::vector<std::vector<std::size_t>> groups;
  if (cfg.stratified) {
    groups.assign(kIntensityClasses, {});
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      groups[static_cast<int>(manifest.entries[i].label.intensity)].push_back(i);
    for (int c = 0; c < kIntensityClasses; ++c) {
      if (!groups[c].empty() && groups[c].size() < 3)
        fail(ErrorKind::ClassTooSmall,
             std::string("stratified split needs >= 3 entries for class ") + intensity_name(static_cast<Intensity>(c)));
    }
  } else {
    groups.emplace_back();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) groups[0].push_back(i);
  }

  Manifest out = manifest;
  Rng rng(cfg.seed);
  for (auto& group : groups) {
    if (group.empty()) continue;
    rng.shuffle(group);
    const std::size_t n_test = detail::round_half_up(static_cast<double>(group.size()) * cfg.test_fraction);
    const std::size_t remaining = group.size() - n_test;
    const std::size_t n_val = detail::round_half_up(static_cast<double>(remaining) * cfg.val_fraction_of_train);
    for (std::size_t k = 0; k < group.size(); ++k) {
      Split s = Split::Train;
      if (k < n_test)
        s = Split::Test;
      else if (k < n_test + n_val)
        s = Split::Val;
      out.entries[group[k]].split = s;
    }
  }
  return out;
}

// --- JSON persistence ------------------------------------------------------

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"path", e.path},
                       {"format", signal_format_name(e.format)},
                       {"sample_rate_hz", e.sample_rate_hz},
                       {"intensity", intensity_name(e.label.intensity)},
                       {"split", split_name(e.split)}});
  }
  return nlohmann::json{{"entries", entries}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  if (!j.contains("entries") || !j["entries"].is_array())
    fail(ErrorKind::FormatMismatch, "manifest: missing entries array");
  std::set<std::string> seen;
  for (const auto& je : j["entries"]) {
    ManifestEntry e;
    e.path = je.at("path").get<std::string>();
    if (!seen.insert(e.path).second) fail(ErrorKind::FormatMismatch, "manifest: duplicate path " + e.path);
    e.format = signal_format_from_name(je.at("format").get<std::string>());
    e.sample_rate_hz = je.at("sample_rate_hz").get<std::uint32_t>();
    e.label.intensity = intensity_from_name(je.at("intensity").get<std::string>());
    e.split = je.contains("split") ? split_from_name(je.at("split").get<std::string>()) : Split::Unassigned;
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  out << manifest_to_json(m).dump(2) << "\n";
  if (!out) fail(ErrorKind::IoFailure, "short write to " + path);
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::UnreadableFile, path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::FormatMismatch, path + ": " + e.what());
  }
  return manifest_from_json(j);
}

// Signals referenced by a manifest resolve relative to the manifest's directory.
inline Signal load_entry_signal(const std::filesystem::path& manifest_dir, const ManifestEntry& e) {
  const std::filesystem::path p = std::filesystem::path(e.path).is_absolute()
                                      ? std::filesystem::path(e.path)
                                      : manifest_dir / e.path;
  return load_signal(p.string(), e.format, e.sample_rate_hz);
}

}  // namespace dhrn
