#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "dhrn/signal.hpp"

using namespace dhrn;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "dhrn_signal_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
  v.push_back((x >> 16) & 0xFF);
  v.push_back((x >> 24) & 0xFF);
}

void push_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(x & 0xFF);
  v.push_back((x >> 8) & 0xFF);
}

std::vector<std::uint8_t> make_wav(std::uint16_t audio_format, std::uint16_t channels, std::uint32_t rate,
                                   std::uint16_t bits, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> v;
  const std::uint32_t data_len = static_cast<std::uint32_t>(data.size());
  v.insert(v.end(), {'R', 'I', 'F', 'F'});
  push_u32(v, 36 + data_len);
  v.insert(v.end(), {'W', 'A', 'V', 'E'});
  v.insert(v.end(), {'f', 'm', 't', ' '});
  push_u32(v, 16);
  push_u16(v, audio_format);
  push_u16(v, channels);
  push_u32(v, rate);
  push_u32(v, rate * channels * bits / 8);
  push_u16(v, static_cast<std::uint16_t>(channels * bits / 8));
  push_u16(v, bits);
  v.insert(v.end(), {'d', 'a', 't', 'a'});
  push_u32(v, data_len);
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

}  // namespace

TEST_CASE("raw f32 round trip of known bytes") {
  const auto p = temp_file("roundtrip.f32");
  save_raw_f32(p.string(), {0.0, 1.0, -1.0});
  const Signal s = load_signal(p.string(), SignalFormat::RawF32LE, 48000);
  CHECK(s.samples == std::vector<double>{0.0, 1.0, -1.0});
  CHECK(s.sample_rate_hz == 48000);

  // re-serializing is bit-exact
  const auto p2 = temp_file("roundtrip2.f32");
  save_raw_f32(p2.string(), s.samples);
  std::ifstream a(p, std::ios::binary), b(p2, std::ios::binary);
  std::vector<char> ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::vector<char> bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("pcm16 rescales by 1/32768") {
  std::vector<std::uint8_t> data;
  push_u16(data, static_cast<std::uint16_t>(16384));
  const auto p = temp_file("half.wav");
  write_bytes(p, make_wav(1, 1, 44100, 16, data));
  const Signal s = load_signal(p.string(), SignalFormat::WavPcm16);
  REQUIRE(s.samples.size() == 1);
  CHECK(s.samples[0] == 0.5);
  CHECK(s.sample_rate_hz == 44100);
}

TEST_CASE("csv single column") {
  const auto p = temp_file("vals.csv");
  std::ofstream(p) << "1.5\n-2.25\n";
  const Signal s = load_signal(p.string(), SignalFormat::CsvSingleColumn, 1000);
  CHECK(s.samples == std::vector<double>{1.5, -2.25});
}

TEST_CASE("float32 wav loads and stereo is rejected") {
  std::vector<std::uint8_t> data;
  const float f = 0.25f;
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  push_u32(data, u);
  const auto mono = temp_file("mono.wav");
  write_bytes(mono, make_wav(3, 1, 96000, 32, data));
  const Signal s = load_signal(mono.string(), SignalFormat::WavFloat32);
  CHECK(s.samples == std::vector<double>{0.25});

  const auto stereo = temp_file("stereo.wav");
  write_bytes(stereo, make_wav(1, 2, 44100, 16, {0, 0, 0, 0}));
  try {
    (void)load_signal(stereo.string(), SignalFormat::WavPcm16);
    FAIL("expected FormatMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::FormatMismatch);
  }
}

TEST_CASE("loader error kinds") {
  const auto empty = temp_file("empty.f32");
  write_bytes(empty, {});
  try {
    (void)load_signal(empty.string(), SignalFormat::RawF32LE, 100);
    FAIL("expected EmptySignal");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySignal);
  }

  const auto nan_file = temp_file("nan.f32");
  std::vector<std::uint8_t> bytes;
  push_u32(bytes, 0x7FC00000u);  // quiet NaN
  write_bytes(nan_file, bytes);
  try {
    (void)load_signal(nan_file.string(), SignalFormat::RawF32LE, 100);
    FAIL("expected NonFiniteSample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteSample);
  }

  try {
    (void)load_signal((temp_file("missing_dir") / "nope.f32").string(), SignalFormat::RawF32LE, 100);
    FAIL("expected UnreadableFile");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnreadableFile);
  }

  const auto bad_csv = temp_file("bad.csv");
  std::ofstream(bad_csv) << "1.0\nnot-a-number\n";
  CHECK_THROWS_AS((void)load_signal(bad_csv.string(), SignalFormat::CsvSingleColumn, 100), Error);
}

TEST_CASE("decimation keeps every factor-th sample and divides the rate") {
  Signal s;
  s.samples = {1, 2, 3, 4, 5, 6};
  s.sample_rate_hz = 1000;
  const Signal d = decimate(s, 2);
  CHECK(d.samples == std::vector<double>{1, 3, 5});
  CHECK(d.sample_rate_hz == 500);

  const Signal same = decimate(s, 1);
  CHECK(same.samples == s.samples);
  CHECK(same.sample_rate_hz == 1000);

  Signal hi;
  hi.samples.assign(64, 0.0);
  hi.sample_rate_hz = 1562500;
  CHECK(decimate(hi, 32).sample_rate_hz == 48828);

  CHECK_THROWS_AS((void)decimate(s, 7), Error);
}

TEST_CASE("decimation composes multiplicatively") {
  Signal s;
  for (int i = 0; i < 240; ++i) s.samples.push_back(i * 0.25);
  s.sample_rate_hz = 96000;
  const Signal ab = decimate(decimate(s, 2), 3);
  const Signal prod = decimate(s, 6);
  CHECK(ab.samples == prod.samples);
  CHECK(ab.sample_rate_hz == prod.sample_rate_hz);
}
