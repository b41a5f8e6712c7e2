#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dhrn/errors.hpp"

namespace dhrn {

// Mono time-domain acoustic recording.
struct Signal {
  std::vector<double> samples;
  std::uint32_t sample_rate_hz = 0;
};

enum class SignalFormat { WavPcm16, WavFloat32, RawF32LE, CsvSingleColumn };

inline const char* signal_format_name(SignalFormat f) {
  switch (f) {
    case SignalFormat::WavPcm16: return "wav_pcm16";
    case SignalFormat::WavFloat32: return "wav_float32";
    case SignalFormat::RawF32LE: return "raw_f32le";
    case SignalFormat::CsvSingleColumn: return "csv";
  }
  return "?";
}

inline SignalFormat signal_format_from_name(const std::string& s) {
  if (s == "wav_pcm16") return SignalFormat::WavPcm16;
  if (s == "wav_float32") return SignalFormat::WavFloat32;
  if (s == "raw_f32le") return SignalFormat::RawF32LE;
  if (s == "csv") return SignalFormat::CsvSingleColumn;
  fail(ErrorKind::FormatMismatch, "unknown signal format '" + s + "'");
}

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::UnreadableFile, path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::UnreadableFile, path);
  return bytes;
}

inline std::uint32_t le_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t le_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline float le_f32(const std::uint8_t* p) {
  std::uint32_t u = le_u32(p);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

struct WavData {
  std::uint16_t audio_format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;
};

inline WavData parse_wav(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::FormatMismatch, path + ": not a RIFF/WAVE file");
  WavData w;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_len = le_u32(bytes.data() + pos + 4);
    const std::uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + chunk_len > bytes.size()) fail(ErrorKind::FormatMismatch, path + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk_len < 16) fail(ErrorKind::FormatMismatch, path + ": short fmt chunk");
      w.audio_format = le_u16(body);
      w.channels = le_u16(body + 2);
      w.sample_rate = le_u32(body + 4);
      w.bits = le_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      w.data = body;
      w.data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !w.data) fail(ErrorKind::FormatMismatch, path + ": missing fmt or data chunk");
  return w;
}

}  // namespace detail

// Load a recording. WAV files carry their own sample rate; raw and CSV files
// take declared_rate_hz. PCM16 samples are rescaled to [-1, 1) by 1/32768.
inline Signal load_signal(const std::string& path, SignalFormat format, std::uint32_t declared_rate_hz = 0) {
  const auto bytes = detail::read_file_bytes(path);
  Signal sig;

  switch (format) {
    case SignalFormat::WavPcm16:
    case SignalFormat::WavFloat32: {
      const auto wav = detail::parse_wav(bytes, path);
      if (wav.channels != 1) fail(ErrorKind::FormatMismatch, path + ": expected mono WAV");
      if (format == SignalFormat::WavPcm16) {
        if (wav.audio_format != 1 || wav.bits != 16)
          fail(ErrorKind::FormatMismatch, path + ": expected 16-bit PCM");
        sig.samples.reserve(wav.data_len / 2);
        for (std::size_t i = 0; i + 2 <= wav.data_len; i += 2) {
          const std::int16_t s = static_cast<std::int16_t>(detail::le_u16(wav.data + i));
          sig.samples.push_back(static_cast<double>(s) / 32768.0);
        }
      } else {
        if (wav.audio_format != 3 || wav.bits != 32)
          fail(ErrorKind::FormatMismatch, path + ": expected 32-bit float WAV");
        sig.samples.reserve(wav.data_len / 4);
        for (std::size_t i = 0; i + 4 <= wav.data_len; i += 4)
          sig.samples.push_back(static_cast<double>(detail::le_f32(wav.data + i)));
      }
      sig.sample_rate_hz = wav.sample_rate;
      break;
    }
    case SignalFormat::RawF32LE: {
      if (bytes.size() % 4 != 0) fail(ErrorKind::FormatMismatch, path + ": size not a multiple of 4");
      sig.samples.reserve(bytes.size() / 4);
      for (std::size_t i = 0; i < bytes.size(); i += 4)
        sig.samples.push_back(static_cast<double>(detail::le_f32(bytes.data() + i)));
      sig.sample_rate_hz = declared_rate_hz;
      break;
    }
    case SignalFormat::CsvSingleColumn: {
      std::string text(bytes.begin(), bytes.end());
      std::size_t start = 0;
      while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) {
          std::size_t used = 0;
          double val = 0.0;
          try {
            val = std::stod(line, &used);
          } catch (const std::exception&) {
            fail(ErrorKind::FormatMismatch, path + ": bad numeric line '" + line + "'");
          }
          if (used != line.size()) fail(ErrorKind::FormatMismatch, path + ": bad numeric line '" + line + "'");
          sig.samples.push_back(val);
        }
        start = end + 1;
      }
      sig.sample_rate_hz = declared_rate_hz;
      break;
    }
  }

  if (sig.samples.empty()) fail(ErrorKind::EmptySignal, path);
  for (double s : sig.samples)
    if (!std::isfinite(s)) fail(ErrorKind::NonFiniteSample, path);
  if (sig.sample_rate_hz == 0) fail(ErrorKind::FormatMismatch, path + ": sample rate unknown");
  return sig;
}

// Headerless little-endian 32-bit IEEE-754 floats.
inline void save_raw_f32(const std::string& path, const std::vector<double>& samples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  std::vector<std::uint8_t> buf(samples.size() * 4);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float f = static_cast<float>(samples[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    buf[4 * i + 0] = static_cast<std::uint8_t>(u & 0xFF);
    buf[4 * i + 1] = static_cast<std::uint8_t>((u >> 8) & 0xFF);
    buf[4 * i + 2] = static_cast<std::uint8_t>((u >> 16) & 0xFF);
    buf[4 * i + 3] = static_cast<std::uint8_t>((u >> 24) & 0xFF);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorKind::IoFailure, "short write to " + path);
}

// Integer-factor decimation: keeps indices 0, f, 2f, ...; rate divides by f.
inline Signal decimate(const Signal& sig, int factor) {
  if (factor < 1) fail(ErrorKind::FactorTooLarge, "decimation factor must be >= 1");
  if (static_cast<std::size_t>(factor) > sig.samples.size())
    fail(ErrorKind::FactorTooLarge, "decimation factor exceeds signal length");
  if (factor == 1) return sig;
  Signal out;
  out.sample_rate_hz = sig.sample_rate_hz / static_cast<std::uint32_t>(factor);
  out.samples.reserve((sig.samples.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < sig.samples.size(); i += static_cast<std::size_t>(factor))
    out.samples.push_back(sig.samples[i]);
  return out;
}

}  // namespace dhrn
