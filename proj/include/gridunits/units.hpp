// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Discrete units: frame features (log-mel or imported), k-means codebooks,
// nearest-centroid assignment and run-length deduplication.
//
// FEAT1 file: "FEAT" | u8 version=1 | u32 N | u32 d | f32 frame_hop_seconds |
//             N*d f32 row-major
// KMC1 file:  "KMC1" | u8 version=1 | u32 k | u32 d | f32 inertia |
//             k*d f32 row-major
// Unit file:  one line per utterance, `utt_id<TAB>u0 u1 u2 ...`

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gridunits/audio.hpp"
#include "gridunits/bytes.hpp"
#include "gridunits/error.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/matrix.hpp"
#include "gridunits/parallel.hpp"
#include "gridunits/random.hpp"
#include "gridunits/stft.hpp"

namespace gridunits {

enum class FeatureSource : std::uint8_t { logmel, imported };

struct FeatureMatrix {
  Matrix<double> values;  // N frames x d
  double frame_hop = 0.0; // seconds
  FeatureSource source = FeatureSource::logmel;

  std::size_t frames() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

struct Codebook {
  Matrix<double> centroids;  // k x d
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<double> inertia_trace;  // one entry per assignment step; not serialized

  std::size_t k() const noexcept { return centroids.rows(); }
  std::size_t feature_dim() const noexcept { return centroids.cols(); }
};

struct UnitSequence {
  std::vector<std::uint32_t> units;
  std::string utt_id;

  friend bool operator==(const UnitSequence&, const UnitSequence&) = default;
};

inline constexpr double kLogFloor = 1e-10;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular HTK-mel filterbank, n_mels x F, spanning 0 Hz to Nyquist.
inline Matrix<double> mel_filterbank(std::size_t n_mels, std::size_t fft_size, int sample_rate) {
  const std::size_t F = fft_size / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  Matrix<double> fb(n_mels, F);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < F; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      if (f >= lo && f <= mid && mid > lo) {
        fb(m, k) = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi && hi > mid) {
        fb(m, k) = (hi - f) / (hi - mid);
      }
    }
  }
  return fb;
}

inline FeatureMatrix logmel(const AudioBuffer& buf, std::size_t n_mels = 40, const StftConfig& cfg = {}) {
  if (buf.sample_rate <= 0) fail(Errc::invalid_argument, "sample rate unknown");
  if (n_mels == 0 || n_mels > cfg.bins()) {
    fail(Errc::invalid_argument, "n_mels " + std::to_string(n_mels) + " exceeds " + std::to_string(cfg.bins()) +
                                     " frequency bins");
  }
  const auto spec = stft(buf, cfg);
  const auto fb = mel_filterbank(n_mels, cfg.fft_size, buf.sample_rate);
  FeatureMatrix out;
  out.values = Matrix<double>(spec.frames(), n_mels);
  out.frame_hop = static_cast<double>(cfg.hop) / buf.sample_rate;
  out.source = FeatureSource::logmel;
  std::vector<double> power(spec.freqs());
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t k = 0; k < spec.freqs(); ++k) power[k] = std::norm(spec.bins(t, k));
    for (std::size_t m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < spec.freqs(); ++k) acc += fb(m, k) * power[k];
      out.values(t, m) = std::log(acc + kLogFloor);
    }
  }
  return out;
}

// Per-utterance mean and variance normalization, per dimension.
inline void cmvn(FeatureMatrix& feat) {
  const std::size_t N = feat.frames(), d = feat.dim();
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) mean += feat.values(i, j);
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (std::size_t i = 0; i < N; ++i) var += (feat.values(i, j) - mean) * (feat.values(i, j) - mean);
    const double inv = 1.0 / std::sqrt(var / static_cast<double>(N) + 1e-12);
    for (std::size_t i = 0; i < N; ++i) feat.values(i, j) = (feat.values(i, j) - mean) * inv;
  }
}

namespace detail {

inline std::vector<std::uint8_t> encode_matrix_file(const char* magic, const Matrix<double>& m, float extra) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) fail(Errc::dimension_overflow, "matrix too large");
  bytes::Writer out;
  out.put_bytes(magic);
  out.put<std::uint8_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  out.put<float>(extra);
  for (double v : m.data()) out.put<float>(static_cast<float>(v));
  return std::move(out.buffer());
}

inline Matrix<double> decode_matrix_file(const std::vector<std::uint8_t>& data, const char* magic, float& extra,
                                         const std::string& origin) {
  bytes::Reader in(data, Errc::length_mismatch);
  if (data.size() < 4 || in.get_string(4) != magic) fail(Errc::bad_magic, origin + ": expected " + magic);
  const auto version = in.get<std::uint8_t>();
  if (version != 1) fail(Errc::bad_magic, origin + ": unsupported version " + std::to_string(version));
  const auto rows = in.get<std::uint32_t>();
  const auto cols = in.get<std::uint32_t>();
  extra = in.get<float>();
  if (rows == 0 || cols == 0) fail(Errc::dimension_overflow, origin + ": empty matrix");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (count > std::numeric_limits<std::size_t>::max() / sizeof(float) / 2) {
    fail(Errc::dimension_overflow, origin + ": " + std::to_string(rows) + " x " + std::to_string(cols));
  }
  if (count * sizeof(float) != in.remaining()) {
    fail(Errc::length_mismatch, origin + ": header promises " + std::to_string(count * sizeof(float)) +
                                    " payload bytes, found " + std::to_string(in.remaining()));
  }
  Matrix<double> m(rows, cols);
  for (auto& v : m.data()) {
    const float f = in.get<float>();
    if (!std::isfinite(f)) fail(Errc::non_finite, origin + ": non-finite entry");
    v = f;
  }
  return m;
}

}  // namespace detail

inline void export_features(const std::filesystem::path& path, const FeatureMatrix& feat) {
  bytes::write_file(path, detail::encode_matrix_file("FEAT", feat.values, static_cast<float>(feat.frame_hop)));
}

inline FeatureMatrix import_features(const std::filesystem::path& path) {
  FeatureMatrix feat;
  float hop = 0.0f;
  feat.values = detail::decode_matrix_file(bytes::read_file(path), "FEAT", hop, path.string());
  feat.frame_hop = hop;
  feat.source = FeatureSource::imported;
  return feat;
}

inline void save_codebook(const std::filesystem::path& path, const Codebook& cb) {
  bytes::write_file(path, detail::encode_matrix_file("KMC1", cb.centroids, static_cast<float>(cb.inertia)));
}

inline Codebook load_codebook(const std::filesystem::path& path) {
  Codebook cb;
  float inertia = 0.0f;
  cb.centroids = detail::decode_matrix_file(bytes::read_file(path), "KMC1", inertia, path.string());
  cb.inertia = inertia;
  return cb;
}

struct KMeansOptions {
  std::size_t k = 100;
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
  int threads = 1;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
  }
  return acc;
}

// Nearest centroid, lowest index on ties.
inline std::pair<std::uint32_t, double> nearest(std::span<const double> x, const Matrix<double>& centroids) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return {best, best_d};
}

}  // namespace detail

// k-means++ seeding followed by Lloyd iterations until the assignment stops
// changing or max_iters updates have run. A cluster that empties out is moved
// onto the point farthest from its current centroid.
inline Codebook kmeans_fit(const Matrix<double>& rows, const KMeansOptions& opts) {
  const std::size_t N = rows.rows(), d = rows.cols(), k = opts.k;
  if (k == 0) fail(Errc::invalid_argument, "k must be at least 1");
  if (k > N) fail(Errc::invalid_argument, "k = " + std::to_string(k) + " exceeds " + std::to_string(N) + " rows");
  if (d == 0) fail(Errc::invalid_argument, "features have zero dimensions");

  Rng rng(opts.seed);
  Codebook cb;
  cb.centroids = Matrix<double>(k, d);
  std::vector<double> closest(N, std::numeric_limits<double>::infinity());
  auto place = [&](std::size_t c, std::size_t row) {
    std::copy(rows.row(row).begin(), rows.row(row).end(), cb.centroids.row(c).begin());
    for (std::size_t i = 0; i < N; ++i) {
      closest[i] = std::min(closest[i], detail::squared_distance(rows.row(i), cb.centroids.row(c)));
    }
  };
  place(0, rng.below(N));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : closest) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cum = 0.0;
      pick = N;
      for (std::size_t i = 0; i < N; ++i) {
        if (closest[i] <= 0.0) continue;
        cum += closest[i];
        pick = i;
        if (cum > target) break;
      }
    } else {
      pick = rng.below(N);
    }
    place(c, pick);
  }

  std::vector<std::uint32_t> labels(N);
  std::vector<double> dist(N);
  auto assign = [&] {
    parallel_for(N, opts.threads, [&](std::size_t i) {
      std::tie(labels[i], dist[i]) = detail::nearest(rows.row(i), cb.centroids);
    });
    double inertia = 0.0;
    for (double v : dist) inertia += v;  // fixed order
    cb.inertia_trace.push_back(inertia);
  };

  assign();
  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    Matrix<double> sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < N; ++i) {
      ++counts[labels[i]];
      auto s = sums.row(labels[i]);
      const auto x = rows.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
    }
    std::vector<bool> taken(N, false);
    for (std::size_t c = 0; c < k; ++c) {
      auto centroid = cb.centroids.row(c);
      if (counts[c] > 0) {
        const auto s = sums.row(c);
        for (std::size_t j = 0; j < d; ++j) centroid[j] = s[j] / static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = N;
      for (std::size_t i = 0; i < N; ++i) {
        if (!taken[i] && (far == N || dist[i] > dist[far])) far = i;
      }
      taken[far] = true;
      std::copy(rows.row(far).begin(), rows.row(far).end(), centroid.begin());
    }
    const auto previous = labels;
    assign();
    cb.iterations = iter + 1;
    if (labels == previous) break;
  }
  cb.inertia = cb.inertia_trace.back();
  return cb;
}

inline UnitSequence assign_units(const FeatureMatrix& feat, const Codebook& cb, std::string utt_id = {}) {
  if (feat.dim() != cb.feature_dim()) {
    fail(Errc::shape_mismatch, "feature dim " + std::to_string(feat.dim()) + " vs codebook dim " +
                                   std::to_string(cb.feature_dim()));
  }
  UnitSequence seq;
  seq.utt_id = std::move(utt_id);
  seq.units.reserve(feat.frames());
  for (std::size_t i = 0; i < feat.frames(); ++i) {
    seq.units.push_back(detail::nearest(feat.values.row(i), cb.centroids).first);
  }
  return seq;
}

// Collapses runs of repeated ids: [3 3 5 5 5 2] -> [3 5 2].
inline UnitSequence dedup(const UnitSequence& seq) {
  UnitSequence out;
  out.utt_id = seq.utt_id;
  for (auto u : seq.units) {
    if (out.units.empty() || out.units.back() != u) out.units.push_back(u);
  }
  return out;
}

inline void write_unit_file(std::ostream& out, const std::vector<UnitSequence>& seqs) {
  for (const auto& s : seqs) {
    out << s.utt_id << '\t';
    for (std::size_t i = 0; i < s.units.size(); ++i) {
      if (i) out << ' ';
      out << s.units[i];
    }
    out << '\n';
  }
}

inline void write_unit_file(const std::filesystem::path& path, const std::vector<UnitSequence>& seqs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
  write_unit_file(out, seqs);
}

inline std::vector<UnitSequence> read_unit_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::file_not_found, path.string());
  std::vector<UnitSequence> seqs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail(Errc::config_error, path.string() + ": missing tab");
    UnitSequence s;
    s.utt_id = line.substr(0, tab);
    std::istringstream units(line.substr(tab + 1));
    std::uint32_t u;
    while (units >> u) s.units.push_back(u);
    seqs.push_back(std::move(s));
  }
  return seqs;
}

}  // namespace gridunits
