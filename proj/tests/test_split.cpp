#include <doctest.h>

#include <filesystem>
#include <set>
#include <vector>

#include "dhrn/manifest.hpp"

using namespace dhrn;

namespace {

Manifest make_manifest(const std::vector<std::pair<Intensity, int>>& class_counts) {
  Manifest m;
  int id = 0;
  for (const auto& [cls, count] : class_counts) {
    for (int i = 0; i < count; ++i) {
      ManifestEntry e;
      e.path = "sig_" + std::to_string(id++) + ".f32";
      e.sample_rate_hz = 48000;
      e.label.intensity = cls;
      m.entries.push_back(e);
    }
  }
  return m;
}

std::array<std::size_t, 3> split_counts(const Manifest& m, Intensity cls) {
  std::array<std::size_t, 3> out{0, 0, 0};
  for (const auto& e : m.entries) {
    if (e.label.intensity != cls) continue;
    if (e.split == Split::Train) ++out[0];
    if (e.split == Split::Val) ++out[1];
    if (e.split == Split::Test) ++out[2];
  }
  return out;
}

}  // namespace

TEST_CASE("ten entries of one class split 7/1/2") {
  auto m = make_manifest({{Intensity::ChokedFlow, 10}});
  SplitConfig cfg;
  cfg.seed = 7;
  const auto out = split_dataset(m, cfg);
  const auto counts = split_counts(out, Intensity::ChokedFlow);
  CHECK(counts[0] == 7);
  CHECK(counts[1] == 1);
  CHECK(counts[2] == 2);
}

TEST_CASE("splitting is deterministic per seed and varies across seeds") {
  auto m = make_manifest({{Intensity::ChokedFlow, 6}, {Intensity::NonCavitation, 6}});
  SplitConfig cfg;
  cfg.seed = 3;
  const auto a = split_dataset(m, cfg);
  const auto b = split_dataset(m, cfg);
  for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].split == b.entries[i].split);

  std::set<std::vector<int>> assignments;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitConfig c2;
    c2.seed = seed;
    const auto out = split_dataset(m, c2);
    std::vector<int> key;
    for (const auto& e : out.entries) key.push_back(static_cast<int>(e.split));
    assignments.insert(key);
  }
  CHECK(assignments.size() >= 2);
}

TEST_CASE("full-corpus stratified split carves test then val per class") {
  // class sizes 72/93/40/151; round-half-up gives test {14,19,8,30} and
  // val {6,7,3,12}, matching the published per-class proportions within one
  auto m = make_manifest({{Intensity::ChokedFlow, 72},
                          {Intensity::ConstantCavitation, 93},
                          {Intensity::IncipientCavitation, 40},
                          {Intensity::NonCavitation, 151}});
  SplitConfig cfg;
  cfg.seed = 11;
  const auto out = split_dataset(m, cfg);

  const std::vector<std::pair<Intensity, std::array<std::size_t, 3>>> expect = {
      {Intensity::ChokedFlow, {52, 6, 14}},
      {Intensity::ConstantCavitation, {67, 7, 19}},
      {Intensity::IncipientCavitation, {29, 3, 8}},
      {Intensity::NonCavitation, {109, 12, 30}},
  };
  const std::vector<std::array<std::size_t, 3>> published = {
      {53, 5, 14}, {68, 7, 18}, {29, 3, 8}, {109, 12, 30}};

  std::size_t idx = 0;
  for (const auto& [cls, want] : expect) {
    const auto got = split_counts(out, cls);
    CHECK(got == want);
    for (int k = 0; k < 3; ++k) {
      const auto ref = published[idx][static_cast<std::size_t>(k)];
      const auto diff = got[static_cast<std::size_t>(k)] > ref ? got[static_cast<std::size_t>(k)] - ref
                                                               : ref - got[static_cast<std::size_t>(k)];
      CHECK(diff <= 1);
    }
    ++idx;
  }
}

TEST_CASE("per-class test size follows round-half-up and no entry lands twice") {
  auto m = make_manifest({{Intensity::ChokedFlow, 13}, {Intensity::ConstantCavitation, 27},
                          {Intensity::IncipientCavitation, 8}, {Intensity::NonCavitation, 44}});
  SplitConfig cfg;
  cfg.test_fraction = 0.25;
  cfg.seed = 5;
  const auto out = split_dataset(m, cfg);
  std::size_t want_test = 0;
  for (std::size_t n : {std::size_t{13}, std::size_t{27}, std::size_t{8}, std::size_t{44}})
    want_test += static_cast<std::size_t>(std::floor(static_cast<double>(n) * 0.25 + 0.5));
  CHECK(out.count_in_split(Split::Test) == want_test);
  for (const auto& e : out.entries) CHECK(e.split != Split::Unassigned);
  CHECK(out.count_in_split(Split::Train) + out.count_in_split(Split::Val) + out.count_in_split(Split::Test) ==
        out.entries.size());
}

TEST_CASE("split error paths") {
  auto m = make_manifest({{Intensity::ChokedFlow, 10}});
  SplitConfig cfg;
  auto once = split_dataset(m, cfg);
  try {
    (void)split_dataset(once, cfg);
    FAIL("expected AlreadySplit");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AlreadySplit);
  }

  auto tiny = make_manifest({{Intensity::ChokedFlow, 10}, {Intensity::IncipientCavitation, 2}});
  try {
    (void)split_dataset(tiny, cfg);
    FAIL("expected ClassTooSmall");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ClassTooSmall);
  }

  SplitConfig bad;
  bad.test_fraction = 0.0;
  CHECK_THROWS_AS((void)split_dataset(m, bad), Error);
}

TEST_CASE("unstratified split uses the whole pool") {
  auto m = make_manifest({{Intensity::ChokedFlow, 2}, {Intensity::NonCavitation, 18}});
  SplitConfig cfg;
  cfg.stratified = false;
  cfg.seed = 9;
  const auto out = split_dataset(m, cfg);
  CHECK(out.count_in_split(Split::Test) == 4);  // round(20 * 0.2)
  CHECK(out.count_in_split(Split::Val) == 2);   // round(16 * 0.1)
}

TEST_CASE("manifest json round trip and raw label mapping") {
  Manifest m;
  ManifestEntry e;
  e.path = "a.f32";
  e.format = SignalFormat::RawF32LE;
  e.sample_rate_hz = 1562500;
  e.label.intensity = Intensity::ConstantCavitation;
  e.split = Split::Train;
  m.entries.push_back(e);

  const auto j = manifest_to_json(m);
  const Manifest back = manifest_from_json(j);
  REQUIRE(back.entries.size() == 1);
  CHECK(back.entries[0].path == "a.f32");
  CHECK(back.entries[0].label.intensity == Intensity::ConstantCavitation);
  CHECK(back.entries[0].split == Split::Train);

  // raw source states collapse into the non-cavitation intensity
  CHECK(intensity_from_name("turbulent_flow") == Intensity::NonCavitation);
  CHECK(intensity_from_name("no_flow") == Intensity::NonCavitation);
  CHECK(detection_of(Intensity::NonCavitation) == Detection::NonCavitation);
  CHECK(detection_of(Intensity::IncipientCavitation) == Detection::Cavitation);
}
