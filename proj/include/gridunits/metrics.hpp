// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Objective metrics: Si-SDR, STOI, WER, and per-corpus evaluation reports.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/fft.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/matrix.hpp"
#include "gridunits/parallel.hpp"
#include "gridunits/resample.hpp"
#include "gridunits/wav.hpp"

namespace gridunits {

// ---------------------------------------------------------------- Si-SDR

struct SiSdrBreakdown {
  double alpha = 0.0;
  double target_energy = 0.0;
  double error_energy = 0.0;
  double value = 0.0;  // dB; +inf when the estimate is exact up to scale
};

struct SiSdrOptions {
  bool zero_mean = false;  // subtract each signal's mean first
};

// Error energies below this fraction of the target energy are double-precision
// round-off, not distortion, and report as +inf.
inline constexpr double kExactEnergyRatio = 1e-24;

inline SiSdrBreakdown si_sdr(std::span<const double> reference, std::span<const double> estimate,
                             const SiSdrOptions& opts = {}) {
  if (reference.size() != estimate.size()) {
    fail(Errc::length_mismatch, "reference has " + std::to_string(reference.size()) + " samples, estimate " +
                                    std::to_string(estimate.size()));
  }
  if (reference.empty()) fail(Errc::empty_input, "si_sdr of empty signals");
  const auto n = static_cast<double>(reference.size());
  double ref_mean = 0.0, est_mean = 0.0;
  if (opts.zero_mean) {
    for (std::size_t i = 0; i < reference.size(); ++i) {
      ref_mean += reference[i];
      est_mean += estimate[i];
    }
    ref_mean /= n;
    est_mean /= n;
  }
  double dot = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double s = reference[i] - ref_mean;
    dot += (estimate[i] - est_mean) * s;
    ref_energy += s * s;
  }
  if (ref_energy == 0.0) fail(Errc::silent_signal, "reference is all zero");

  SiSdrBreakdown r;
  r.alpha = dot / ref_energy;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double target = r.alpha * (reference[i] - ref_mean);
    const double err = target - (estimate[i] - est_mean);
    r.target_energy += target * target;
    r.error_energy += err * err;
  }
  if (r.error_energy <= kExactEnergyRatio * r.target_energy) {
    r.value = std::numeric_limits<double>::infinity();
  } else {
    r.value = 10.0 * std::log10(r.target_energy / r.error_energy);
  }
  return r;
}

inline SiSdrBreakdown si_sdr(const AudioBuffer& reference, const AudioBuffer& estimate,
                             const SiSdrOptions& opts = {}) {
  return si_sdr(std::span<const double>(reference.samples), std::span<const double>(estimate.samples), opts);
}

// ------------------------------------------------------------------ STOI

namespace stoi_detail {

inline constexpr int kRate = 10000;
inline constexpr std::size_t kFrame = 256;
inline constexpr std::size_t kHop = 128;
inline constexpr std::size_t kFft = 512;
inline constexpr std::size_t kBands = 15;
inline constexpr double kMinFreq = 150.0;
inline constexpr std::size_t kSegment = 30;   // frames per intermediate measure (384 ms)
inline constexpr double kBeta = -15.0;        // lower SDR bound, dB
inline constexpr double kDynRange = 40.0;     // dB
inline constexpr double kEps = std::numeric_limits<double>::epsilon();

// Matlab-style hanning(n): the n interior points of an (n + 2)-point Hann.
inline std::vector<double> hanning(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k + 1) / static_cast<double>(n + 1));
  }
  return w;
}

// Frame starts 0, hop, ... strictly below len - frame.
inline std::size_t frame_count(std::size_t len) { return len > kFrame ? (len - kFrame + kHop - 1) / kHop : 0; }

// One-third octave band matrix, kBands x (kFft/2 + 1); band i covers bins
// [lo_i, hi_i) where lo/hi are the bins nearest the band edges.
inline Matrix<double> third_octave_bands() {
  const std::size_t F = kFft / 2 + 1;
  Matrix<double> obm(kBands, F);
  auto nearest_bin = [&](double hz) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < F; ++k) {
      const double f = static_cast<double>(k) * kRate / static_cast<double>(kFft);
      const double d = (f - hz) * (f - hz);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  for (std::size_t i = 0; i < kBands; ++i) {
    const double k = static_cast<double>(i);
    const std::size_t lo = nearest_bin(kMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
    const std::size_t hi = nearest_bin(kMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
    for (std::size_t b = lo; b < hi; ++b) obm(i, b) = 1.0;
  }
  return obm;
}

// Drops frames whose clean-signal energy is more than kDynRange below the
// loudest frame, then overlap-adds the windowed survivors.
inline void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = hanning(kFrame);
  const std::size_t frames = frame_count(x.size());
  std::vector<double> energy(frames);
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < kFrame; ++i) {
      const double v = w[i] * x[t * kHop + i];
      acc += v * v;
    }
    energy[t] = 20.0 * std::log10(std::sqrt(acc) + kEps);
    loudest = std::max(loudest, energy[t]);
  }
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < frames; ++t) {
    if (loudest - kDynRange - energy[t] < 0.0) kept.push_back(t);
  }
  const std::size_t out_len = kept.empty() ? 0 : (kept.size() - 1) * kHop + kFrame;
  std::vector<double> xs(out_len, 0.0), ys(out_len, 0.0);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    const std::size_t src = kept[j] * kHop;
    for (std::size_t i = 0; i < kFrame; ++i) {
      xs[j * kHop + i] += w[i] * x[src + i];
      ys[j * kHop + i] += w[i] * y[src + i];
    }
  }
  x = std::move(xs);
  y = std::move(ys);
}

// Band envelopes (kBands x frames) of the magnitude STFT.
inline Matrix<double> band_envelopes(const std::vector<double>& x, const Matrix<double>& obm) {
  const auto w = hanning(kFrame);
  const std::size_t frames = frame_count(x.size());
  const FftPlan plan(kFft);
  Matrix<double> env(kBands, frames);
  std::vector<double> frame(kFrame);
  std::vector<cplx> spectrum(kFft / 2 + 1), work;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < kFrame; ++i) frame[i] = w[i] * x[t * kHop + i];
    plan.rfft(frame, spectrum, work);
    for (std::size_t b = 0; b < kBands; ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < spectrum.size(); ++k) acc += obm(b, k) * std::norm(spectrum[k]);
      env(b, t) = std::sqrt(acc);
    }
  }
  return env;
}

}  // namespace stoi_detail

// Classic STOI: 10 kHz, silent-frame removal, 15 third-octave bands from
// 150 Hz, 30-frame segments with -15 dB clipping, mean correlation.
inline double stoi(const AudioBuffer& reference, const AudioBuffer& estimate) {
  using namespace stoi_detail;
  if (reference.size() != estimate.size()) {
    fail(Errc::length_mismatch, "reference has " + std::to_string(reference.size()) + " samples, estimate " +
                                    std::to_string(estimate.size()));
  }
  if (reference.sample_rate != estimate.sample_rate) fail(Errc::sample_rate_mismatch, "stoi inputs differ in rate");
  if (reference.empty() || reference.seconds() < 0.384) {
    fail(Errc::too_short, "stoi needs at least 384 ms, got " + std::to_string(reference.seconds() * 1000.0) + " ms");
  }
  auto x = resample(reference, kRate).samples;
  auto y = resample(estimate, kRate).samples;
  remove_silent_frames(x, y);

  static const Matrix<double> obm = third_octave_bands();
  const auto xe = band_envelopes(x, obm);
  const auto ye = band_envelopes(y, obm);
  const std::size_t frames = xe.cols();
  if (frames < kSegment) {
    fail(Errc::too_short, "only " + std::to_string(frames) + " non-silent frames, need " + std::to_string(kSegment));
  }

  const double clip = std::pow(10.0, -kBeta / 20.0);
  double total = 0.0;
  std::array<double, kSegment> xs{}, ys{};
  for (std::size_t m = kSegment; m <= frames; ++m) {
    for (std::size_t b = 0; b < kBands; ++b) {
      double xn = 0.0, yn = 0.0;
      for (std::size_t i = 0; i < kSegment; ++i) {
        xs[i] = xe(b, m - kSegment + i);
        ys[i] = ye(b, m - kSegment + i);
        xn += xs[i] * xs[i];
        yn += ys[i] * ys[i];
      }
      const double scale = std::sqrt(xn) / (std::sqrt(yn) + kEps);
      double xm = 0.0, ym = 0.0;
      for (std::size_t i = 0; i < kSegment; ++i) {
        ys[i] = std::min(ys[i] * scale, xs[i] * (1.0 + clip));
        xm += xs[i];
        ym += ys[i];
      }
      xm /= kSegment;
      ym /= kSegment;
      double xx = 0.0, yy = 0.0;
      for (std::size_t i = 0; i < kSegment; ++i) {
        xs[i] -= xm;
        ys[i] -= ym;
        xx += xs[i] * xs[i];
        yy += ys[i] * ys[i];
      }
      const double xnorm = std::sqrt(xx) + kEps, ynorm = std::sqrt(yy) + kEps;
      double corr = 0.0;
      for (std::size_t i = 0; i < kSegment; ++i) corr += (xs[i] / xnorm) * (ys[i] / ynorm);
      total += corr;
    }
  }
  return total / static_cast<double>((frames - kSegment + 1) * kBands);
}

// ------------------------------------------------------------------- WER

struct WerBreakdown {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;
  double wer = 0.0;

  std::size_t errors() const noexcept { return substitutions + deletions + insertions; }
  friend bool operator==(const WerBreakdown&, const WerBreakdown&) = default;
};

// Unit-cost Levenshtein alignment. Counts come from the backtrace that, at
// each cell, prefers substitution/match, then insertion, then deletion.
template <typename Token>
WerBreakdown word_errors(std::span<const Token> ref, std::span<const Token> hyp) {
  if (ref.empty()) fail(Errc::empty_input, "WER needs a non-empty reference");
  const std::size_t n = ref.size(), m = hyp.size(), stride = m + 1;
  std::vector<std::uint32_t> cost((n + 1) * stride);
  for (std::size_t i = 0; i <= n; ++i) cost[i * stride] = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[j] = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = cost[(i - 1) * stride + j - 1] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u);
      const std::uint32_t ins = cost[i * stride + j - 1] + 1;
      const std::uint32_t del = cost[(i - 1) * stride + j] + 1;
      cost[i * stride + j] = std::min({diag, ins, del});
    }
  }

  WerBreakdown r;
  r.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = cost[i * stride + j];
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (here == cost[(i - 1) * stride + j - 1] + (same ? 0u : 1u)) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && here == cost[i * stride + j - 1] + 1) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  r.wer = static_cast<double>(r.errors()) / static_cast<double>(n);
  return r;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

inline WerBreakdown wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = tokenize(reference);
  const auto hyp = tokenize(hypothesis);
  return word_errors<std::string>(ref, hyp);
}

// ------------------------------------------------------- corpus evaluation

enum class Metric { si_sdr, stoi, wer };

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::si_sdr: return "si_sdr";
    case Metric::stoi: return "stoi";
    case Metric::wer: return "wer";
  }
  return "?";
}

inline std::vector<Metric> parse_metric_list(std::string_view list) {
  std::vector<Metric> out;
  for (const auto& raw : split(list, ',')) {
    const auto name = trim(raw);
    if (name.empty()) continue;
    Metric m;
    if (name == "si_sdr") {
      m = Metric::si_sdr;
    } else if (name == "stoi") {
      m = Metric::stoi;
    } else if (name == "wer") {
      m = Metric::wer;
    } else {
      fail(Errc::config_error, "unknown metric '" + name + "'");
    }
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) fail(Errc::config_error, "empty metric list");
  std::sort(out.begin(), out.end());
  return out;
}

struct EvalOptions {
  std::vector<Metric> metrics{Metric::si_sdr, Metric::stoi};
  std::string reference_key = "clean";     // "audio" means the row's audio column
  std::string estimate_key = "enhanced";
  std::string ref_text_key = "ref_text";
  std::string hyp_text_key = "hyp_text";
  int jobs = 1;
};

struct EvalRow {
  std::string utt_id;
  std::vector<double> values;  // one per metric, in EvalReport::metrics order
};

struct EvalReport {
  std::vector<Metric> metrics;
  std::vector<EvalRow> rows;          // sorted by utt_id
  std::vector<std::string> skipped;   // "utt_id: reason"
  std::vector<double> means;          // over finite values
  std::vector<std::size_t> counts;    // finite values per metric
  std::vector<std::size_t> infinite;  // +inf values excluded from the mean
};

inline std::optional<std::string> manifest_field(const ManifestRow& row, const std::string& key) {
  if (key == "audio") return row.audio;
  return row.get(key);
}

inline EvalRow evaluate_row(const ManifestRow& row, const EvalOptions& opts) {
  auto require = [&](const std::string& key) {
    auto v = manifest_field(row, key);
    if (!v) fail(Errc::config_error, "missing key '" + key + "'");
    return *v;
  };
  const bool needs_audio = std::any_of(opts.metrics.begin(), opts.metrics.end(),
                                       [](Metric m) { return m != Metric::wer; });
  AudioBuffer ref, est;
  if (needs_audio) {
    ref = read_wav(require(opts.reference_key));
    est = read_wav(require(opts.estimate_key));
  }
  EvalRow out{row.id, {}};
  for (Metric m : opts.metrics) {
    switch (m) {
      case Metric::si_sdr: out.values.push_back(si_sdr(ref, est).value); break;
      case Metric::stoi: out.values.push_back(stoi(ref, est)); break;
      case Metric::wer: out.values.push_back(wer(require(opts.ref_text_key), require(opts.hyp_text_key)).wer); break;
    }
  }
  return out;
}

inline void summarize(EvalReport& report) {
  const std::size_t k = report.metrics.size();
  report.means.assign(k, 0.0);
  report.counts.assign(k, 0);
  report.infinite.assign(k, 0);
  for (const auto& row : report.rows) {
    for (std::size_t c = 0; c < k; ++c) {
      if (std::isinf(row.values[c])) {
        ++report.infinite[c];
      } else {
        report.means[c] += row.values[c];
        ++report.counts[c];
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    report.means[c] = report.counts[c] ? report.means[c] / static_cast<double>(report.counts[c])
                                       : std::numeric_limits<double>::quiet_NaN();
  }
}

inline EvalReport eval_corpus(const Manifest& manifest, const EvalOptions& opts) {
  EvalReport report;
  report.metrics = opts.metrics;
  Manifest rows = manifest;
  sort_by_id(rows);
  std::vector<std::optional<EvalRow>> results(rows.size());
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), opts.jobs, [&](std::size_t i) {
    try {
      results[i] = evaluate_row(rows[i], opts);
    } catch (const Error& e) {
      errors[i] = rows[i].id + ": " + e.what();
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (results[i]) {
      report.rows.push_back(std::move(*results[i]));
    } else {
      report.skipped.push_back(errors[i]);
    }
  }
  if (report.rows.empty()) fail(Errc::empty_input, "every row was skipped");
  summarize(report);
  return report;
}

// Header of column names, one row per utterance, then #skipped, #infinite,
// #count and a final #mean row.
inline void write_report(std::ostream& out, const EvalReport& report) {
  out << "utt_id";
  for (Metric m : report.metrics) out << '\t' << metric_name(m);
  out << '\n';
  for (const auto& row : report.rows) {
    out << row.utt_id;
    for (double v : row.values) out << '\t' << format_fixed(v, 6);
    out << '\n';
  }
  out << "#skipped\t" << report.skipped.size() << '\n';
  out << "#infinite";
  for (auto n : report.infinite) out << '\t' << n;
  out << "\n#count";
  for (auto n : report.counts) out << '\t' << n;
  out << "\n#mean";
  for (double v : report.means) out << '\t' << format_fixed(v, 6);
  out << '\n';
}

inline void write_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  write_report(out, report);
}

}  // namespace gridunits
