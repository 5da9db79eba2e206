// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Energy VAD with hangover and collar, and silence trimming.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"

namespace gridunits {

struct VadConfig {
  int frame_ms = 30;
  double threshold_db = -40.0;  // dBFS; lower is more permissive
  int hangover_frames = 8;
  int collar_ms = 100;

  void validate() const {
    if (frame_ms != 10 && frame_ms != 20 && frame_ms != 30) {
      fail(Errc::invalid_argument, "frame_ms must be 10, 20 or 30");
    }
    if (hangover_frames < 0) fail(Errc::invalid_argument, "hangover_frames must be >= 0");
    if (collar_ms < 0) fail(Errc::invalid_argument, "collar_ms must be >= 0");
  }

  std::size_t frame_samples(int sample_rate) const {
    return static_cast<std::size_t>(sample_rate) * static_cast<std::size_t>(frame_ms) / 1000;
  }
  std::size_t collar_samples(int sample_rate) const {
    return static_cast<std::size_t>(sample_rate) * static_cast<std::size_t>(collar_ms) / 1000;
  }
};

struct Segment {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

using SegmentList = std::vector<Segment>;

inline constexpr double kEnergyFloor = 1e-12;

// dBFS per non-overlapping frame; a trailing partial frame is measured over
// the samples it has.
inline std::vector<double> frame_energies(const AudioBuffer& buf, const VadConfig& cfg = {}) {
  cfg.validate();
  if (buf.empty()) fail(Errc::empty_input, "frame_energies of an empty buffer");
  const std::size_t len = cfg.frame_samples(buf.sample_rate);
  if (len == 0) fail(Errc::invalid_argument, "sample rate too low for the VAD frame size");
  std::vector<double> out;
  for (std::size_t start = 0; start < buf.size(); start += len) {
    const std::size_t stop = std::min(buf.size(), start + len);
    double acc = 0.0;
    for (std::size_t i = start; i < stop; ++i) acc += buf.samples[i] * buf.samples[i];
    out.push_back(10.0 * std::log10(acc / static_cast<double>(stop - start) + kEnergyFloor));
  }
  return out;
}

inline SegmentList detect_segments(const std::vector<double>& energies, const VadConfig& cfg,
                                   std::size_t total_samples, int sample_rate) {
  cfg.validate();
  if (energies.empty()) fail(Errc::empty_input, "no frame energies");
  const std::size_t frame = cfg.frame_samples(sample_rate);
  const std::size_t collar = cfg.collar_samples(sample_rate);

  // speech state with hangover
  std::vector<bool> speech(energies.size(), false);
  int hold = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (energies[i] > cfg.threshold_db) {
      speech[i] = true;
      hold = cfg.hangover_frames;
    } else if (hold > 0) {
      speech[i] = true;
      --hold;
    }
  }

  SegmentList raw;
  for (std::size_t i = 0; i < speech.size();) {
    if (!speech[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < speech.size() && speech[j]) ++j;
    raw.push_back({i * frame, std::min(j * frame, total_samples)});
    i = j;
  }

  // merge gaps shorter than the collar
  SegmentList merged;
  for (const auto& s : raw) {
    if (!merged.empty() && s.start - merged.back().end < collar) {
      merged.back().end = s.end;
    } else {
      merged.push_back(s);
    }
  }

  // collar padding, clip, then merge anything that now overlaps or touches
  SegmentList out;
  for (const auto& s : merged) {
    Segment padded{s.start >= collar ? s.start - collar : 0, std::min(total_samples, s.end + collar)};
    if (padded.end <= padded.start) continue;
    if (!out.empty() && padded.start <= out.back().end) {
      out.back().end = std::max(out.back().end, padded.end);
    } else {
      out.push_back(padded);
    }
  }
  return out;
}

inline SegmentList detect_segments(const AudioBuffer& buf, const VadConfig& cfg = {}) {
  return detect_segments(frame_energies(buf, cfg), cfg, buf.size(), buf.sample_rate);
}

struct TrimResult {
  AudioBuffer audio;
  bool all_silent = false;
  double kept_fraction = 0.0;
};

inline TrimResult trim(const AudioBuffer& buf, const SegmentList& segs) {
  TrimResult r;
  r.audio.sample_rate = buf.sample_rate;
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    if (s.end <= s.start || s.end > buf.size() || (i > 0 && s.start < prev_end)) {
      fail(Errc::out_of_range, "segment [" + std::to_string(s.start) + ", " + std::to_string(s.end) +
                                   ") invalid for buffer of " + std::to_string(buf.size()) + " samples");
    }
    prev_end = s.end;
    r.audio.samples.insert(r.audio.samples.end(), buf.samples.begin() + static_cast<std::ptrdiff_t>(s.start),
                           buf.samples.begin() + static_cast<std::ptrdiff_t>(s.end));
  }
  r.all_silent = r.audio.empty();
  r.kept_fraction = buf.empty() ? 0.0 : static_cast<double>(r.audio.size()) / static_cast<double>(buf.size());
  return r;
}

}  // namespace gridunits
