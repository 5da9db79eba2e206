// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "gridunits/units.hpp"
#include "test_support.hpp"

namespace gridunits {
namespace {

using test::error_of;
using test::TempDir;

Matrix<double> random_rows(Rng& rng, std::size_t n, std::size_t d, double lo = -1.0, double hi = 1.0) {
  Matrix<double> m(n, d);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

// Values that survive a float32 round trip unchanged.
Matrix<double> float_exact(Matrix<double> m) {
  for (auto& v : m.data()) v = static_cast<double>(static_cast<float>(v));
  return m;
}

std::uint32_t brute_force_nearest(const Matrix<double>& c, std::span<const double> x) {
  std::uint32_t best = 0;
  double best_d = 0.0;
  for (std::size_t i = 0; i < c.rows(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d += (x[j] - c(i, j)) * (x[j] - c(i, j));
    if (i == 0 || d < best_d) {
      best = static_cast<std::uint32_t>(i);
      best_d = d;
    }
  }
  return best;
}

// ---- features --------------------------------------------------------------

TEST(Logmel, SilenceIsFloor) {
  AudioBuffer silence;
  silence.samples.assign(4000, 0.0);
  const auto f = logmel(silence, 40);
  EXPECT_EQ(f.source, FeatureSource::logmel);
  for (double v : f.values.data()) EXPECT_DOUBLE_EQ(v, std::log(1e-10));
}

TEST(Logmel, ShapeAndHop) {
  Rng rng(1);
  const auto buf = test::noise_buffer(rng, 5000);
  const StftConfig cfg{512, 256};
  const auto f = logmel(buf, 24, cfg);
  EXPECT_EQ(f.frames(), stft(buf, cfg).frames());
  EXPECT_EQ(f.dim(), 24u);
  EXPECT_DOUBLE_EQ(f.frame_hop, 256.0 / 16000.0);
  EXPECT_EQ(error_of([&] { logmel(buf, 258, cfg); }), Errc::invalid_argument);
  EXPECT_EQ(error_of([&] { logmel(buf, 0, cfg); }), Errc::invalid_argument);
}

TEST(Logmel, ToneLandsInItsBand) {
  for (double hz : {500.0, 1000.0, 3000.0}) {
    const auto f = logmel(test::tone(hz, 8000, 0.5), 40);
    // centre frequencies of an HTK-mel bank spanning 0..8 kHz
    const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    std::size_t expect = 0;
    double best = 1e300;
    for (std::size_t m = 0; m < 40; ++m) {
      const double centre = 700.0 * (std::pow(10.0, top * static_cast<double>(m + 1) / 41.0 / 2595.0) - 1.0);
      if (std::abs(centre - hz) < best) {
        best = std::abs(centre - hz);
        expect = m;
      }
    }
    const std::size_t t = f.frames() / 2;
    std::size_t argmax = 0;
    for (std::size_t m = 1; m < 40; ++m) {
      if (f.values(t, m) > f.values(t, argmax)) argmax = m;
    }
    EXPECT_EQ(argmax, expect) << hz << " Hz";
  }
}

TEST(Cmvn, ZeroMeanUnitVariance) {
  Rng rng(2);
  FeatureMatrix f;
  f.values = random_rows(rng, 50, 6, 3.0, 9.0);
  cmvn(f);
  for (std::size_t j = 0; j < 6; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 50; ++i) mean += f.values(i, j);
    mean /= 50;
    for (std::size_t i = 0; i < 50; ++i) var += (f.values(i, j) - mean) * (f.values(i, j) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 50, 1.0, 1e-9);
  }
}

TEST(FeatureFile, RoundTripBitExact) {
  TempDir dir("feat");
  Rng rng(3);
  FeatureMatrix f;
  f.values = float_exact(random_rows(rng, 17, 5));
  f.frame_hop = 0.02;
  export_features(dir / "a.feat", f);
  const auto back = import_features(dir / "a.feat");
  EXPECT_EQ(back.values, f.values);
  EXPECT_EQ(back.frame_hop, static_cast<double>(0.02f));
  EXPECT_EQ(back.source, FeatureSource::imported);
  export_features(dir / "b.feat", back);
  EXPECT_EQ(test::slurp(dir / "a.feat"), test::slurp(dir / "b.feat"));
}

TEST(FeatureFile, ByteLayout) {
  TempDir dir("feat");
  FeatureMatrix f;
  f.values = Matrix<double>(2, 3);
  for (std::size_t i = 0; i < 6; ++i) f.values.data()[i] = 0.5 * static_cast<double>(i);
  f.frame_hop = 0.01;
  export_features(dir / "x.feat", f);
  const auto b = test::slurp(dir / "x.feat");
  ASSERT_EQ(b.size(), 4u + 1 + 4 + 4 + 4 + 6 * 4);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "FEAT");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ((std::vector<std::uint8_t>(b.begin() + 5, b.begin() + 13)),
            (std::vector<std::uint8_t>{2, 0, 0, 0, 3, 0, 0, 0}));
  auto f32 = [&](std::size_t off) {
    const std::uint32_t bits = b[off] | (b[off + 1] << 8) | (b[off + 2] << 16) | (std::uint32_t(b[off + 3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  };
  EXPECT_EQ(f32(13), 0.01f);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(f32(17 + 4 * i), 0.5f * static_cast<float>(i));
}

TEST(FeatureFile, Errors) {
  TempDir dir("feat");
  FeatureMatrix f;
  f.values = Matrix<double>(3, 2, 0.25);
  export_features(dir / "ok.feat", f);
  const auto good = test::slurp(dir / "ok.feat");
  auto load = [&](const std::vector<std::uint8_t>& bytes) {
    test::spit(dir / "x.feat", bytes);
    return import_features(dir / "x.feat");
  };

  auto nan = good;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 17 + 8, &q, 4);
  EXPECT_EQ(error_of([&] { load(nan); }), Errc::non_finite);

  auto truncated = good;
  truncated.pop_back();
  EXPECT_EQ(error_of([&] { load(truncated); }), Errc::length_mismatch);
  EXPECT_EQ(error_of([&] { load({'F', 'E', 'A', 'T', 1, 0}); }), Errc::length_mismatch);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(error_of([&] { load(magic); }), Errc::bad_magic);
  auto version = good;
  version[4] = 2;
  EXPECT_EQ(error_of([&] { load(version); }), Errc::bad_magic);

  auto huge = good;
  for (std::size_t i = 5; i < 13; ++i) huge[i] = 0xFF;
  EXPECT_EQ(error_of([&] { load(huge); }), Errc::dimension_overflow);

  EXPECT_EQ(error_of([&] { import_features(dir / "missing.feat"); }), Errc::file_not_found);
}

TEST(CodebookFile, RoundTripAndMagic) {
  TempDir dir("kmc");
  Rng rng(4);
  Codebook cb;
  cb.centroids = float_exact(random_rows(rng, 7, 4));
  cb.inertia = 12.5;
  save_codebook(dir / "c.kmc", cb);
  const auto back = load_codebook(dir / "c.kmc");
  EXPECT_EQ(back.centroids, cb.centroids);
  EXPECT_EQ(back.inertia, 12.5);
  const auto bytes = test::slurp(dir / "c.kmc");
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "KMC1");
  // a feature file is not a codebook
  FeatureMatrix f;
  f.values = cb.centroids;
  export_features(dir / "f.feat", f);
  EXPECT_EQ(error_of([&] { load_codebook(dir / "f.feat"); }), Errc::bad_magic);
}

// ---- k-means ---------------------------------------------------------------

TEST(KMeans, SingleClusterIsMean) {
  Rng rng(5);
  const auto rows = random_rows(rng, 101, 3, -5, 5);
  KMeansOptions opts;
  opts.k = 1;
  const auto cb = kmeans_fit(rows, opts);
  for (std::size_t j = 0; j < 3; ++j) {
    long double sum = 0.0L;
    for (std::size_t i = 0; i < 101; ++i) sum += rows(i, j);
    EXPECT_NEAR(cb.centroids(0, j), static_cast<double>(sum / 101.0L), 1e-12);
  }
}

TEST(KMeans, TwoSeparatedClouds) {
  Rng rng(6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix<double> rows(60, 2);
    double mean[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < 60; ++i) {
      const std::size_t cloud = i % 2;
      for (std::size_t j = 0; j < 2; ++j) {
        rows(i, j) = (cloud ? 100.0 : -100.0) + rng.uniform(-1, 1);
        mean[cloud][j] += rows(i, j) / 30.0;
      }
    }
    KMeansOptions opts;
    opts.k = 2;
    opts.seed = seed;
    const auto cb = kmeans_fit(rows, opts);
    const std::size_t hi = cb.centroids(0, 0) > 0 ? 0 : 1;
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(cb.centroids(hi, j), mean[1][j], 1e-9);
      EXPECT_NEAR(cb.centroids(1 - hi, j), mean[0][j], 1e-9);
    }
  }
}

TEST(KMeans, Errors) {
  Rng rng(7);
  const auto rows = random_rows(rng, 5, 2);
  KMeansOptions opts;
  opts.k = 6;
  EXPECT_EQ(error_of([&] { kmeans_fit(rows, opts); }), Errc::invalid_argument);
  opts.k = 0;
  EXPECT_EQ(error_of([&] { kmeans_fit(rows, opts); }), Errc::invalid_argument);
  opts.k = 5;
  EXPECT_NO_THROW(kmeans_fit(rows, opts));
}

TEST(KMeans, InertiaNonIncreasing) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rows = random_rows(rng, 200 + rng.below(200), 1 + rng.below(6));
    KMeansOptions opts;
    opts.k = 2 + rng.below(15);
    opts.seed = rng.next();
    const auto cb = kmeans_fit(rows, opts);
    ASSERT_GE(cb.inertia_trace.size(), 1u);
    for (std::size_t i = 1; i < cb.inertia_trace.size(); ++i) {
      EXPECT_LE(cb.inertia_trace[i], cb.inertia_trace[i - 1] * (1 + 1e-12)) << "iteration " << i;
    }
    EXPECT_EQ(cb.inertia, cb.inertia_trace.back());
    // inertia equals the objective recomputed from scratch
    double objective = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      const auto u = brute_force_nearest(cb.centroids, rows.row(i));
      for (std::size_t j = 0; j < rows.cols(); ++j) {
        objective += (rows(i, j) - cb.centroids(u, j)) * (rows(i, j) - cb.centroids(u, j));
      }
    }
    EXPECT_NEAR(cb.inertia, objective, 1e-9 * (1 + objective));
  }
}

TEST(KMeans, DeterministicAcrossThreads) {
  Rng rng(9);
  const auto rows = random_rows(rng, 500, 4);
  KMeansOptions opts;
  opts.k = 12;
  opts.seed = 99;
  const auto a = kmeans_fit(rows, opts);
  opts.threads = 4;
  const auto b = kmeans_fit(rows, opts);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.inertia_trace, b.inertia_trace);
  opts.seed = 100;
  EXPECT_NE(kmeans_fit(rows, opts).centroids, a.centroids);
}

TEST(KMeans, DuplicateRowsStayFinite) {
  Matrix<double> rows(6, 2, 1.5);
  rows(5, 0) = 2.5;
  KMeansOptions opts;
  opts.k = 4;
  const auto cb = kmeans_fit(rows, opts);
  EXPECT_EQ(cb.k(), 4u);
  for (double v : cb.centroids.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(cb.inertia, 0.0, 1e-12);
}

// ---- assignment and dedup --------------------------------------------------

TEST(Assign, Examples) {
  Codebook cb;
  cb.centroids = Matrix<double>(5, 1);
  const double c[5] = {10.0, -1.0, 20.0, 7.0, 1.0};
  for (std::size_t i = 0; i < 5; ++i) cb.centroids(i, 0) = c[i];
  FeatureMatrix f;
  f.values = Matrix<double>(3, 1);
  f.values(0, 0) = 7.0;  // equal to centroid 3
  f.values(1, 0) = 0.0;  // equidistant from 1 and 4
  f.values(2, 0) = 15.0; // equidistant from 0 and 2
  const auto seq = assign_units(f, cb, "u");
  EXPECT_EQ(seq.utt_id, "u");
  EXPECT_EQ(seq.units, (std::vector<std::uint32_t>{3, 1, 0}));

  FeatureMatrix wrong;
  wrong.values = Matrix<double>(2, 2);
  EXPECT_EQ(error_of([&] { assign_units(wrong, cb); }), Errc::shape_mismatch);
}

TEST(Assign, MatchesBruteForce) {
  Rng rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 1 + rng.below(8), k = 1 + rng.below(30);
    Codebook cb;
    cb.centroids = random_rows(rng, k, d);
    FeatureMatrix f;
    f.values = random_rows(rng, 100, d);
    const auto seq = assign_units(f, cb);
    ASSERT_EQ(seq.units.size(), 100u);
    for (std::size_t i = 0; i < 100; ++i) {
      EXPECT_EQ(seq.units[i], brute_force_nearest(cb.centroids, f.values.row(i)));
      EXPECT_LT(seq.units[i], k);
    }
  }
}

TEST(Assign, CentroidsMapToThemselves) {
  Rng rng(11);
  Codebook cb;
  cb.centroids = random_rows(rng, 25, 6);
  FeatureMatrix f;
  f.values = cb.centroids;
  const auto seq = assign_units(f, cb);
  for (std::uint32_t i = 0; i < 25; ++i) EXPECT_EQ(seq.units[i], i);
}

TEST(Dedup, Examples) {
  auto run = [](std::vector<std::uint32_t> v) { return dedup(UnitSequence{std::move(v), "x"}).units; };
  EXPECT_EQ(run({3, 3, 5, 5, 5, 2}), (std::vector<std::uint32_t>{3, 5, 2}));
  EXPECT_EQ(run({}), (std::vector<std::uint32_t>{}));
  EXPECT_EQ(run({1, 2, 1}), (std::vector<std::uint32_t>{1, 2, 1}));
  EXPECT_EQ(run({4, 4, 4}), (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(dedup(UnitSequence{{1}, "keep"}).utt_id, "keep");
}

TEST(Dedup, Properties) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    UnitSequence s;
    const std::size_t n = rng.below(60);
    for (std::size_t i = 0; i < n; ++i) s.units.push_back(static_cast<std::uint32_t>(rng.below(4)));
    const auto d = dedup(s);
    for (std::size_t i = 1; i < d.units.size(); ++i) EXPECT_NE(d.units[i], d.units[i - 1]);
    // subsequence of the input
    std::size_t j = 0;
    for (std::size_t i = 0; i < s.units.size() && j < d.units.size(); ++i) {
      if (s.units[i] == d.units[j]) ++j;
    }
    EXPECT_EQ(j, d.units.size());
    EXPECT_EQ(dedup(d), d);
    // run count equals the number of value changes plus one
    std::size_t runs = s.units.empty() ? 0 : 1;
    for (std::size_t i = 1; i < s.units.size(); ++i) runs += s.units[i] != s.units[i - 1];
    EXPECT_EQ(d.units.size(), runs);
  }
}

TEST(UnitFile, RoundTrip) {
  TempDir dir("units");
  const std::vector<UnitSequence> seqs = {{{3, 5, 2}, "utt1"}, {{}, "empty"}, {{0, 99, 99, 7}, "utt2"}};
  write_unit_file(dir / "u.txt", seqs);
  EXPECT_EQ(read_unit_file(dir / "u.txt"), seqs);
  std::ostringstream text;
  write_unit_file(text, seqs);
  EXPECT_EQ(text.str(), "utt1\t3 5 2\nempty\t\nutt2\t0 99 99 7\n");
  EXPECT_EQ(error_of([&] { read_unit_file(dir / "nope.txt"); }), Errc::file_not_found);
}

}  // namespace
}  // namespace gridunits
