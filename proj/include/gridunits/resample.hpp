// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"

namespace gridunits {

struct ResampleOptions {
  int zero_crossings = 32;     // half-width of the sinc in cutoff periods
  double rolloff = 0.95;       // cutoff as a fraction of the lower Nyquist
  double kaiser_beta = 8.6;
};

// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
// Output sample n sits at input time n * source / target.
inline AudioBuffer resample(const AudioBuffer& buf, int target_rate,
                            const ResampleOptions& opts = {}) {
  if (target_rate <= 0) fail(Errc::invalid_argument, "target rate must be positive");
  if (buf.sample_rate <= 0) fail(Errc::invalid_argument, "source rate must be positive");
  if (target_rate == buf.sample_rate) return buf;

  const std::int64_t g = std::gcd(buf.sample_rate, target_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = buf.sample_rate / g;
  const auto in_len = static_cast<std::int64_t>(buf.samples.size());
  const std::int64_t out_len = (in_len * up + down / 2) / down;

  // cutoff in cycles per input sample
  const double cutoff = 0.5 * opts.rolloff * std::min(1.0, static_cast<double>(up) / down);
  const double half_width = opts.zero_crossings / (2.0 * cutoff);
  const auto taps_half = static_cast<std::int64_t>(std::ceil(half_width));
  const double i0_beta = std::cyl_bessel_i(0.0, opts.kaiser_beta);

  auto kernel = [&](double u) {
    const double r = u / half_width;
    if (std::abs(r) >= 1.0) return 0.0;
    const double window = std::cyl_bessel_i(0.0, opts.kaiser_beta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double x = 2.0 * cutoff * u;
    const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    return 2.0 * cutoff * sinc * window;
  };

  // One filter per fractional phase p/up, taps j in [-taps_half + 1, taps_half].
  const std::int64_t ntaps = 2 * taps_half;
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(up), std::vector<double>(ntaps));
  for (std::int64_t p = 0; p < up; ++p) {
    double sum = 0.0;
    for (std::int64_t j = 0; j < ntaps; ++j) {
      const double u = static_cast<double>(p) / up - static_cast<double>(j - taps_half + 1);
      phases[p][j] = kernel(u);
      sum += phases[p][j];
    }
    for (auto& h : phases[p]) h /= sum;  // unit DC gain per phase
  }

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.assign(static_cast<std::size_t>(out_len), 0.0);
  for (std::int64_t n = 0; n < out_len; ++n) {
    const std::int64_t pos = n * down;
    const std::int64_t base = pos / up;
    const auto& h = phases[static_cast<std::size_t>(pos % up)];
    double acc = 0.0;
    for (std::int64_t j = 0; j < ntaps; ++j) {
      const std::int64_t k = base + j - taps_half + 1;
      if (k < 0 || k >= in_len) continue;
      acc += h[j] * buf.samples[static_cast<std::size_t>(k)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace gridunits
