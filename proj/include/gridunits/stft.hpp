// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// STFT / iSTFT used as the encoder and decoder around every TF-domain model.
//
// Framing: frame t covers samples [t*hop, t*hop + fft_size); the tail is
// zero-padded, nothing is padded at the front. Synthesis is weighted
// overlap-add normalized by the summed squared window, so any hop <= fft_size
// reconstructs exactly wherever the window sum is nonzero.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/fft.hpp"
#include "gridunits/matrix.hpp"

namespace gridunits {

enum class WindowType { hann };

struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t hop = 256;
  WindowType window = WindowType::hann;

  std::size_t bins() const noexcept { return fft_size / 2 + 1; }

  void validate() const {
    if (!is_power_of_two(fft_size)) fail(Errc::invalid_argument, "fft_size must be a power of two");
    if (hop == 0 || hop > fft_size) fail(Errc::invalid_argument, "hop must be in [1, fft_size]");
    if (fft_size % hop != 0) fail(Errc::invalid_argument, "hop must divide fft_size");
  }

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// Hann sampled at half-integer points: w[k] = sin^2(pi (k + 1/2) / n).
// Still sums to 1 at hop n/2, and never vanishes, so the first sample of a
// signal survives analysis.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = std::sin(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(n));
    w[k] = s * s;
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t length, const StftConfig& cfg) {
  if (length <= cfg.fft_size) return 1;
  return 1 + (length - cfg.fft_size + cfg.hop - 1) / cfg.hop;
}

struct ComplexSpectrogram {
  Matrix<cplx> bins;  // T x F
  StftConfig config;
  std::size_t original_length = 0;
  int sample_rate = 16000;

  std::size_t frames() const noexcept { return bins.rows(); }
  std::size_t freqs() const noexcept { return bins.cols(); }
};

inline ComplexSpectrogram stft(const AudioBuffer& buf, const StftConfig& cfg = {}) {
  cfg.validate();
  if (buf.samples.empty()) fail(Errc::empty_input, "stft of an empty buffer");

  const std::size_t n = cfg.fft_size;
  const std::size_t frames = stft_frame_count(buf.size(), cfg);
  const auto window = hann_window(n);
  const FftPlan plan(n);

  ComplexSpectrogram spec;
  spec.bins = Matrix<cplx>(frames, cfg.bins());
  spec.config = cfg;
  spec.original_length = buf.size();
  spec.sample_rate = buf.sample_rate;

  std::vector<double> frame(n);
  std::vector<cplx> work;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = start + i;
      frame[i] = idx < buf.size() ? buf.samples[idx] * window[i] : 0.0;
    }
    plan.rfft(frame, spec.bins.row(t), work);
  }
  return spec;
}

inline AudioBuffer istft(const ComplexSpectrogram& spec) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  const std::size_t n = cfg.fft_size;
  const std::size_t frames = spec.frames();
  if (spec.freqs() != cfg.bins()) {
    fail(Errc::shape_mismatch, "spectrogram has " + std::to_string(spec.freqs()) +
                                   " bins, config implies " + std::to_string(cfg.bins()));
  }
  if (frames == 0) fail(Errc::shape_mismatch, "spectrogram has no frames");
  if (spec.original_length == 0 || (frames - 1) * cfg.hop + n < spec.original_length ||
      stft_frame_count(spec.original_length, cfg) != frames) {
    fail(Errc::shape_mismatch, "frame count " + std::to_string(frames) +
                                   " inconsistent with original length " +
                                   std::to_string(spec.original_length));
  }

  const auto window = hann_window(n);
  const FftPlan plan(n);
  const std::size_t padded = (frames - 1) * cfg.hop + n;
  std::vector<double> acc(padded, 0.0), norm(padded, 0.0);
  std::vector<double> frame(n);
  std::vector<cplx> work;
  for (std::size_t t = 0; t < frames; ++t) {
    plan.irfft(spec.bins.row(t), frame, work);
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[start + i] += frame[i] * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  AudioBuffer out;
  out.sample_rate = spec.sample_rate;
  out.samples.resize(spec.original_length);
  for (std::size_t i = 0; i < spec.original_length; ++i) {
    out.samples[i] = norm[i] > 0.0 ? acc[i] / norm[i] : 0.0;
  }
  return out;
}

}  // namespace gridunits
