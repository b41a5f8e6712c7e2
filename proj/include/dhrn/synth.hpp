#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "dhrn/errors.hpp"
#include "dhrn/fft.hpp"
#include "dhrn/manifest.hpp"
#include "dhrn/rng.hpp"
#include "dhrn/signal.hpp"

namespace dhrn {

struct SpectralBand {
  double center = 0.0;     // fraction of Nyquist, in (0, 1)
  double bandwidth = 0.0;  // fraction of Nyquist
  double amplitude = 1.0;
};

// Class-conditional spectral envelopes for the four flow states. Defaults sit
// well below 1/32 of Nyquist so the decimation study keeps every band intact.
struct SynthSpec {
  std::array<std::vector<SpectralBand>, kIntensityClasses> class_bands{
      std::vector<SpectralBand>{{0.0050, 0.0028, 1.0}},
      std::vector<SpectralBand>{{0.0115, 0.0028, 1.0}},
      std::vector<SpectralBand>{{0.0190, 0.0028, 1.0}},
      std::vector<SpectralBand>{{0.0280, 0.0028, 1.0}},
  };
  double noise_floor = 0.05;
  std::size_t signal_len = 65536;
  std::uint32_t sample_rate_hz = 48000;
  std::size_t per_class_count = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (per_class_count < 1 || signal_len < 8 || sample_rate_hz == 0 || noise_floor < 0.0)
      fail(ErrorKind::InvalidSpec, "bad synth spec");
    for (const auto& bands : class_bands) {
      if (bands.empty()) fail(ErrorKind::InvalidSpec, "every class needs at least one band");
      for (const auto& b : bands)
        if (!(b.center > 0.0 && b.center < 1.0) || b.bandwidth <= 0.0 || b.amplitude <= 0.0)
          fail(ErrorKind::InvalidSpec, "bad spectral band");
    }
    // separability by construction: centers at least two bandwidths apart
    for (std::size_t a = 0; a < class_bands.size(); ++a)
      for (std::size_t b = a + 1; b < class_bands.size(); ++b)
        for (const auto& ba : class_bands[a])
          for (const auto& bb : class_bands[b])
            if (std::abs(ba.center - bb.center) < 2.0 * std::max(ba.bandwidth, bb.bandwidth))
              fail(ErrorKind::InvalidSpec, "class bands overlap");
  }
};

namespace detail {

// Band-limited Gaussian noise: shape a white spectrum with the class envelope
// (boxcar per band) and inverse-transform. DC and the band complement stay
// exactly zero, so the shaped component is zero-mean by construction.
inline std::vector<double> shaped_noise(const std::vector<SpectralBand>& bands, std::size_t len, Rng& rng) {
  const std::size_t p = next_pow2(len);
  std::vector<std::complex<double>> spec(p, {0.0, 0.0});
  for (std::size_t i = 0; i < p; ++i) spec[i] = {rng.normal(), 0.0};
  fft_inplace(spec);

  const auto envelope = [&](double frac) {
    double e = 0.0;
    for (const auto& b : bands)
      if (std::abs(frac - b.center) <= b.bandwidth * 0.5) e += b.amplitude;
    return e;
  };

  const std::size_t half = p / 2;
  spec[0] = 0.0;
  spec[half] *= envelope(1.0);
  for (std::size_t k = 1; k < half; ++k) {
    const double e = envelope(static_cast<double>(k) / static_cast<double>(half));
    spec[k] *= e;
    spec[p - k] = std::conj(spec[k]);  // keep the time signal real
  }
  fft_inplace(spec, /*inverse=*/true);

  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) out[i] = spec[i].real();
  return out;
}

}  // namespace detail

struct SynthDataset {
  std::vector<Signal> signals;
  Manifest manifest;  // paths filled by the writer; labels and rates set here
};

// Deterministic per (seed, signal index); class c, instance i gets stream
// index c * per_class_count + i.
inline SynthDataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  SynthDataset out;
  for (int c = 0; c < kIntensityClasses; ++c) {
    for (std::size_t i = 0; i < spec.per_class_count; ++i) {
      const std::uint64_t stream = static_cast<std::uint64_t>(c) * spec.per_class_count + i;
      Rng rng(Rng::mix(spec.seed, stream));
      auto samples = detail::shaped_noise(spec.class_bands[static_cast<std::size_t>(c)], spec.signal_len, rng);
      if (spec.noise_floor > 0.0)
        for (auto& s : samples) s += spec.noise_floor * rng.normal();
      Signal sig;
      sig.samples = std::move(samples);
      sig.sample_rate_hz = spec.sample_rate_hz;

      ManifestEntry e;
      e.path = std::string(intensity_name(static_cast<Intensity>(c))) + "_" + std::to_string(i) + ".f32";
      e.format = SignalFormat::RawF32LE;
      e.sample_rate_hz = spec.sample_rate_hz;
      e.label.intensity = static_cast<Intensity>(c);
      e.split = Split::Unassigned;
      out.manifest.entries.push_back(std::move(e));
      out.signals.push_back(std::move(sig));
    }
  }
  return out;
}

// Writes signals as raw f32 plus manifest.json into dir.
inline void write_synth_dataset(const std::filesystem::path& dir, const SynthDataset& ds) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < ds.signals.size(); ++i)
    save_raw_f32((dir / ds.manifest.entries[i].path).string(), ds.signals[i].samples);
  save_manifest((dir / "manifest.json").string(), ds.manifest);
}

}  // namespace dhrn
