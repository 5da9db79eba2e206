// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Additive mixture x = s + n at a controlled SNR, and the corpus driver that
// draws one SNR per utterance.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/parallel.hpp"
#include "gridunits/random.hpp"
#include "gridunits/wav.hpp"

namespace gridunits {

struct MixtureSpec {
  double snr_low = -35.0;
  double snr_high = -15.0;
  std::uint64_t seed = 0;
  double peak_ceiling = 0.99;

  void validate() const {
    if (!(snr_low <= snr_high)) fail(Errc::invalid_argument, "snr_low must not exceed snr_high");
    if (!(peak_ceiling > 0.0)) fail(Errc::invalid_argument, "peak_ceiling must be positive");
  }
};

struct MixtureRecord {
  AudioBuffer mixture;
  AudioBuffer clean;
  AudioBuffer scaled_noise;
  double achieved_snr = 0.0;
  double noise_gain = 0.0;   // applied to the noise crop before the peak rescale
  double peak_scale = 1.0;   // joint factor on all three signals (1 if none)
  std::size_t noise_offset = 0;
};

inline double rms(std::span<const double> samples) {
  if (samples.empty()) fail(Errc::empty_input, "rms of an empty signal");
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

inline double rms(const AudioBuffer& buf) { return rms(buf.samples); }

inline double measured_snr(const AudioBuffer& clean, const AudioBuffer& noise) {
  return 20.0 * std::log10(rms(clean) / rms(noise));
}

// Crops `length` samples of noise starting at `offset`, tiling when the noise
// is shorter than requested.
inline std::vector<double> crop_noise(const std::vector<double>& noise, std::size_t length,
                                      std::size_t offset) {
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = noise[(offset + i) % noise.size()];
  return out;
}

inline MixtureRecord mix_at_snr(const AudioBuffer& clean, const AudioBuffer& noise, double snr_db,
                                std::uint64_t crop_seed = 0, double peak_ceiling = 0.99) {
  if (clean.sample_rate != noise.sample_rate) {
    fail(Errc::sample_rate_mismatch, "clean at " + std::to_string(clean.sample_rate) +
                                         " Hz, noise at " + std::to_string(noise.sample_rate) + " Hz");
  }
  if (clean.empty()) fail(Errc::empty_input, "clean signal is empty");
  if (noise.empty()) fail(Errc::silent_signal, "noise signal is empty");
  const double clean_rms = rms(clean);
  if (clean_rms == 0.0) fail(Errc::silent_signal, "clean signal is silent");
  if (rms(noise) == 0.0) fail(Errc::silent_signal, "noise signal is silent");

  Rng rng(crop_seed);
  const std::size_t len = clean.size();
  const std::size_t offset = noise.size() >= len ? rng.below(noise.size() - len + 1)
                                                 : rng.below(noise.size());
  const auto crop = crop_noise(noise.samples, len, offset);
  const double crop_rms = rms(crop);
  if (crop_rms == 0.0) fail(Errc::silent_signal, "selected noise segment is silent");

  MixtureRecord rec;
  rec.noise_offset = offset;
  rec.noise_gain = clean_rms / crop_rms * std::pow(10.0, -snr_db / 20.0);

  double peak = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    peak = std::max(peak, std::abs(clean.samples[i] + rec.noise_gain * crop[i]));
  }
  rec.peak_scale = peak > peak_ceiling ? peak_ceiling / peak : 1.0;

  rec.clean = AudioBuffer{std::vector<double>(len), clean.sample_rate};
  rec.scaled_noise = AudioBuffer{std::vector<double>(len), clean.sample_rate};
  rec.mixture = AudioBuffer{std::vector<double>(len), clean.sample_rate};
  const double noise_factor = rec.noise_gain * rec.peak_scale;
  for (std::size_t i = 0; i < len; ++i) {
    rec.clean.samples[i] = clean.samples[i] * rec.peak_scale;
    rec.scaled_noise.samples[i] = crop[i] * noise_factor;
    rec.mixture.samples[i] = rec.clean.samples[i] + rec.scaled_noise.samples[i];
  }
  rec.achieved_snr = measured_snr(rec.clean, rec.scaled_noise);
  return rec;
}

struct SimulationResult {
  Manifest rows;                      // sorted by utterance id
  std::vector<std::string> failures;  // "utt_id: reason"
};

// Per-utterance random choices, all from one stream seeded by
// (spec.seed, utt_id) so they do not depend on processing order.
struct MixtureDraw {
  double snr = 0.0;
  std::size_t noise_index = 0;
  std::uint64_t crop_seed = 0;
};

inline MixtureDraw draw_mixture(const MixtureSpec& spec, const std::string& utt_id,
                                std::size_t noise_count) {
  Rng rng(derive_seed(spec.seed, utt_id));
  MixtureDraw d;
  d.snr = rng.uniform(spec.snr_low, spec.snr_high);
  if (spec.snr_low == spec.snr_high) d.snr = spec.snr_low;
  d.noise_index = static_cast<std::size_t>(rng.below(noise_count));
  d.crop_seed = rng.next();
  return d;
}

// Writes <out_dir>/mixtures/<id>.wav (mixture) and <id>.clean.wav (the clean
// reference after the joint peak rescale).
inline SimulationResult simulate_corpus(const Manifest& clean_manifest, const Manifest& noise_manifest,
                                        const MixtureSpec& spec, const std::filesystem::path& out_dir,
                                        int jobs = 1) {
  spec.validate();
  if (clean_manifest.empty()) fail(Errc::empty_input, "clean manifest has no rows");
  if (noise_manifest.empty()) fail(Errc::empty_input, "noise manifest has no rows");

  SimulationResult result;
  std::vector<std::pair<std::string, AudioBuffer>> noises;
  for (const auto& row : noise_manifest) {
    try {
      noises.emplace_back(row.id, read_wav(row.audio));
    } catch (const Error& e) {
      result.failures.push_back("noise " + row.id + ": " + e.what());
    }
  }
  if (noises.empty()) fail(Errc::empty_input, "no readable noise files");

  const auto mix_dir = out_dir / "mixtures";
  std::filesystem::create_directories(mix_dir);

  std::vector<std::optional<ManifestRow>> produced(clean_manifest.size());
  std::vector<std::string> errors(clean_manifest.size());
  parallel_for(clean_manifest.size(), jobs, [&](std::size_t i) {
    const auto& src = clean_manifest[i];
    try {
      const auto draw = draw_mixture(spec, src.id, noises.size());
      const auto& [noise_id, noise] = noises[draw.noise_index];
      const auto clean = read_wav(src.audio);
      const auto rec = mix_at_snr(clean, noise, draw.snr, draw.crop_seed, spec.peak_ceiling);

      const auto mix_path = mix_dir / (src.id + ".wav");
      const auto clean_path = mix_dir / (src.id + ".clean.wav");
      write_wav(mix_path, rec.mixture);
      write_wav(clean_path, rec.clean);

      ManifestRow row{src.id, mix_path.string(), {}};
      row.set("clean", clean_path.string());
      row.set("source", src.audio);
      row.set("noise", noise_id);
      row.set("snr", format_fixed(rec.achieved_snr, 9));
      produced[i] = std::move(row);
    } catch (const Error& e) {
      errors[i] = src.id + ": " + e.what();
    }
  });

  for (std::size_t i = 0; i < produced.size(); ++i) {
    if (produced[i]) {
      result.rows.push_back(std::move(*produced[i]));
    } else {
      result.failures.push_back(errors[i]);
    }
  }
  if (result.rows.empty()) fail(Errc::empty_input, "no mixtures produced");
  sort_by_id(result.rows);
  return result;
}

}  // namespace gridunits
