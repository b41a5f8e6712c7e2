#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhrn/manifest.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return DHRN_CLI_PATH; }

int run(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir() {
  const auto dir = fs::temp_directory_path() / "dhrn_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synth writes a labeled corpus and is idempotent") {
  const auto dir = work_dir() / "synth_a";
  const auto dir2 = work_dir() / "synth_b";
  fs::remove_all(dir);
  fs::remove_all(dir2);
  const std::string args = "--per-class 2 --seed 1 --len 8192 --rate 48000";
  REQUIRE(run("synth --out " + dir.string() + " " + args) == 0);
  REQUIRE(run("synth --out " + dir2.string() + " " + args) == 0);

  const auto m = dhrn::load_manifest((dir / "manifest.json").string());
  CHECK(m.entries.size() == 8);
  int per_class[4] = {0, 0, 0, 0};
  for (const auto& e : m.entries) ++per_class[static_cast<int>(e.label.intensity)];
  for (int c = 0; c < 4; ++c) CHECK(per_class[c] == 2);

  CHECK(file_bytes(dir / "manifest.json") == file_bytes(dir2 / "manifest.json"));
  CHECK(file_bytes(dir / m.entries[0].path) == file_bytes(dir2 / m.entries[0].path));
}

TEST_CASE("missing required arguments exit with the usage code") {
  CHECK(run("synth --per-class 2") == 2);
  CHECK(run("augment --wsize 128") == 2);
  CHECK(run("definitely-not-a-command") == 2);
}

TEST_CASE("synth, augment, train, eval round trip") {
  const auto root = work_dir() / "loop";
  fs::remove_all(root);
  REQUIRE(run("synth --out " + (root / "sig").string() + " --per-class 8 --seed 2 --len 4096") == 0);
  REQUIRE(run("augment --manifest " + (root / "sig" / "manifest.json").string() + " --wsize 1024 --seed 3 --out " +
              (root / "data").string()) == 0);
  REQUIRE(run("train --data " + (root / "data").string() + " --out " + (root / "run").string() +
              " --width 0.0625 --epochs 2 --seed 4") == 0);
  CHECK(fs::exists(root / "run" / "checkpoint.bin"));
  CHECK(fs::exists(root / "run" / "history.csv"));
  CHECK(fs::exists(root / "run" / "report_test.json"));
  REQUIRE(run("eval --checkpoint " + (root / "run" / "checkpoint.bin").string() + " --data " +
              (root / "data").string() + " --split test --out " + (root / "eval.json").string()) == 0);

  const auto report = nlohmann::json::parse(std::ifstream(root / "eval.json"));
  REQUIRE(report.is_array());
  CHECK(report[0]["task"] == "detection");
  CHECK(report[1]["task"] == "intensity");
}

TEST_CASE("checkpoint and dataset shape mismatch exits with code 4") {
  const auto root = work_dir() / "loop";  // reuses the round-trip artifacts
  REQUIRE(fs::exists(root / "run" / "checkpoint.bin"));
  REQUIRE(run("augment --manifest " + (root / "sig" / "manifest.json").string() + " --wsize 512 --seed 3 --out " +
              (root / "data_small").string()) == 0);
  CHECK(run("eval --checkpoint " + (root / "run" / "checkpoint.bin").string() + " --data " +
            (root / "data_small").string()) == 4);
}

TEST_CASE("train rejects configs with unknown keys") {
  const auto root = work_dir() / "loop";
  const auto cfg = work_dir() / "bad_config.json";
  std::ofstream(cfg) << "{\"learning_rate\": 1e-4, \"learning_rte\": 1e-3}";
  CHECK(run("train --data " + (root / "data").string() + " --out " + (root / "run2").string() + " --config " +
            cfg.string()) == 2);
}

TEST_CASE("downsample emits one ready-to-augment corpus per factor") {
  const auto root = work_dir() / "loop";
  REQUIRE(run("downsample --manifest " + (root / "sig" / "manifest.json").string() + " --factors 2,4 --out " +
              (root / "dec").string()) == 0);
  for (int f : {2, 4}) {
    const auto m = dhrn::load_manifest((root / "dec" / ("factor_" + std::to_string(f)) / "manifest.json").string());
    CHECK(m.entries.size() == 32);
    CHECK(m.entries[0].sample_rate_hz == 48000u / static_cast<unsigned>(f));
  }
}

TEST_CASE("gradcheck passes clean and fails the planted defect") {
  CHECK(run("gradcheck --seed 6") == 0);
  CHECK(run("gradcheck --seed 6 --self-test-flip-conv") == 5);
}
