// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Deterministic synthetic mini-corpus: voiced, speech-like utterances and a
// few noise types (white, pink, babble).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/random.hpp"
#include "gridunits/wav.hpp"

namespace gridunits {

namespace synth_detail {

struct Vowel {
  double f1, f2, f3;
};

// Rough adult formant centres.
inline constexpr std::array<Vowel, 6> kVowels{{
    {730, 1090, 2440}, {270, 2290, 3010}, {300, 870, 2240},
    {530, 1840, 2480}, {570, 840, 2410}, {660, 1720, 2410},
}};

inline double resonance(double f, double centre, double bandwidth) {
  const double d = (f - centre) / bandwidth;
  return 1.0 / (1.0 + d * d);
}

inline void peak_normalize(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0.0) {
    for (double& v : x) v *= peak / m;
  }
}

}  // namespace synth_detail

// Harmonic syllables with formant weighting, gliding pitch and raised-cosine
// envelopes, separated by short pauses, with silence at both ends.
inline AudioBuffer speech_like(Rng& rng, double seconds, int sample_rate = 16000) {
  using namespace synth_detail;
  if (!(seconds > 0.0)) fail(Errc::invalid_argument, "duration must be positive");
  AudioBuffer out;
  out.sample_rate = sample_rate;
  const auto total = static_cast<std::size_t>(seconds * sample_rate);
  out.samples.assign(total, 0.0);
  const double fs = sample_rate;
  const double nyquist_guard = std::min(4000.0, 0.45 * fs);

  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.15, 0.3) * fs);
  const std::size_t tail = static_cast<std::size_t>(0.15 * fs);
  while (pos + tail < total) {
    const auto len = std::min(static_cast<std::size_t>(rng.uniform(0.12, 0.3) * fs), total - tail - pos);
    const Vowel& v = kVowels[rng.below(kVowels.size())];
    const double f0_start = rng.uniform(100.0, 220.0);
    const double f0_end = f0_start * rng.uniform(0.8, 1.2);
    const double level = rng.uniform(0.5, 1.0);
    double phase = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double u = static_cast<double>(i) / static_cast<double>(len);
      const double f0 = f0_start + (f0_end - f0_start) * u;
      phase += 2.0 * std::numbers::pi * f0 / fs;
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * u);
      double acc = 0.0;
      for (int h = 1; h * f0 < nyquist_guard; ++h) {
        const double f = h * f0;
        const double gain = resonance(f, v.f1, 90.0) + 0.6 * resonance(f, v.f2, 120.0) +
                            0.3 * resonance(f, v.f3, 160.0) + 0.02;
        acc += gain * std::sin(h * phase);
      }
      out.samples[pos + i] += level * env * acc;
    }
    pos += len + static_cast<std::size_t>(rng.uniform(0.04, 0.15) * fs);
  }
  peak_normalize(out.samples, 0.5);
  return out;
}

enum class NoiseKind { white, pink, babble };

inline std::string_view noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::babble: return "babble";
  }
  return "?";
}

inline AudioBuffer noise_like(Rng& rng, NoiseKind kind, double seconds, int sample_rate = 16000) {
  using namespace synth_detail;
  if (!(seconds > 0.0)) fail(Errc::invalid_argument, "duration must be positive");
  AudioBuffer out;
  out.sample_rate = sample_rate;
  const auto total = static_cast<std::size_t>(seconds * sample_rate);
  out.samples.assign(total, 0.0);
  switch (kind) {
    case NoiseKind::white:
      for (double& v : out.samples) v = rng.normal();
      break;
    case NoiseKind::pink: {
      // Paul Kellet's economy 1/f filter over white noise.
      double b0 = 0, b1 = 0, b2 = 0;
      for (double& v : out.samples) {
        const double w = rng.normal();
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        v = b0 + b1 + b2 + w * 0.1848;
      }
      break;
    }
    case NoiseKind::babble:
      for (int talker = 0; talker < 5; ++talker) {
        const auto voice = speech_like(rng, seconds, sample_rate);
        for (std::size_t i = 0; i < total; ++i) out.samples[i] += voice.samples[i];
      }
      // keep a broadband floor so no bin is exactly empty
      for (double& v : out.samples) v += 0.01 * rng.normal();
      break;
  }
  peak_normalize(out.samples, 0.5);
  return out;
}

struct SynthOptions {
  std::size_t clean_count = 6;
  std::size_t noise_count = 3;
  double clean_seconds = 2.0;
  double noise_seconds = 3.0;
  std::uint64_t seed = 0;
  int sample_rate = 16000;
};

struct SynthCorpus {
  std::filesystem::path clean_manifest;
  std::filesystem::path noise_manifest;
};

// Writes clean/*.wav, noise/*.wav, clean.tsv and noise.tsv under dir.
inline SynthCorpus synthesize_corpus(const std::filesystem::path& dir, const SynthOptions& opts = {}) {
  if (opts.clean_count == 0 || opts.noise_count == 0) fail(Errc::invalid_argument, "corpus needs files");
  std::filesystem::create_directories(dir / "clean");
  std::filesystem::create_directories(dir / "noise");
  Manifest clean, noise;
  for (std::size_t i = 0; i < opts.clean_count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "utt%03zu", i);
    Rng rng(derive_seed(opts.seed, id));
    const auto path = dir / "clean" / (std::string(id) + ".wav");
    write_wav(path, speech_like(rng, opts.clean_seconds, opts.sample_rate));
    clean.push_back({id, path.string(), {}});
  }
  constexpr std::array kinds{NoiseKind::white, NoiseKind::pink, NoiseKind::babble};
  for (std::size_t i = 0; i < opts.noise_count; ++i) {
    const NoiseKind kind = kinds[i % kinds.size()];
    char id[32];
    std::snprintf(id, sizeof id, "noise%02zu", i);
    Rng rng(derive_seed(opts.seed, id));
    const auto path = dir / "noise" / (std::string(id) + ".wav");
    write_wav(path, noise_like(rng, kind, opts.noise_seconds, opts.sample_rate));
    ManifestRow row{id, path.string(), {}};
    row.set("kind", std::string(noise_kind_name(kind)));
    noise.push_back(std::move(row));
  }
  SynthCorpus out{dir / "clean.tsv", dir / "noise.tsv"};
  write_manifest(out.clean_manifest, clean);
  write_manifest(out.noise_manifest, noise);
  return out;
}

}  // namespace gridunits
