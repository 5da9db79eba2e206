// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gridunits/fft.hpp"
#include "gridunits/manifest.hpp"
#include "gridunits/resample.hpp"
#include "gridunits/stft.hpp"
#include "gridunits/wav.hpp"
#include "test_support.hpp"

namespace gridunits {
namespace {

using test::TempDir;

// Hand-assembled RIFF bytes, independent of write_wav.
struct WavBytes {
  std::uint16_t format = 1;
  std::uint16_t channels = 1;
  std::uint32_t rate = 16000;
  std::uint16_t bits = 16;
  std::vector<std::int16_t> samples;  // interleaved
  bool junk_chunk = false;

  std::vector<std::uint8_t> build() const {
    std::vector<std::uint8_t> b;
    auto tag = [&](const char* s) { b.insert(b.end(), s, s + 4); };
    auto u16 = [&](std::uint16_t v) {
      b.push_back(v & 0xff);
      b.push_back(v >> 8);
    };
    auto u32 = [&](std::uint32_t v) {
      for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
    };
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    tag("RIFF");
    u32(36 + data_bytes + (junk_chunk ? 12 : 0));
    tag("WAVE");
    if (junk_chunk) {
      tag("LIST");
      u32(3);
      b.insert(b.end(), {'a', 'b', 'c', 0});  // odd size plus pad byte
    }
    tag("fmt ");
    u32(16);
    u16(format);
    u16(channels);
    u32(rate);
    u32(rate * channels * bits / 8);
    u16(static_cast<std::uint16_t>(channels * bits / 8));
    u16(bits);
    tag("data");
    u32(data_bytes);
    for (auto s : samples) u16(static_cast<std::uint16_t>(s));
    return b;
  }
};

Errc read_error(const std::filesystem::path& p) {
  try {
    read_wav(p);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error reading " << p;
  return Errc::io_error;
}

TEST(Wav, ScalesBy32768) {
  TempDir dir("wav");
  WavBytes w;
  w.samples = {16384, -32768, 0, 32767};
  test::spit(dir / "a.wav", w.build());
  const auto buf = read_wav(dir / "a.wav");
  ASSERT_EQ(buf.size(), 4u);
  EXPECT_EQ(buf.samples[0], 0.5);
  EXPECT_EQ(buf.samples[1], -1.0);
  EXPECT_EQ(buf.samples[2], 0.0);
  EXPECT_EQ(buf.samples[3], 32767.0 / 32768.0);
  EXPECT_EQ(buf.sample_rate, 16000);
}

TEST(Wav, MultichannelIsAveraged) {
  TempDir dir("wav");
  WavBytes w;
  w.channels = 2;
  w.samples = {16384, 0, -16384, -16384};
  test::spit(dir / "s.wav", w.build());
  const auto buf = read_wav(dir / "s.wav");
  ASSERT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf.samples[0], 0.25);
  EXPECT_EQ(buf.samples[1], -0.5);
}

TEST(Wav, SkipsUnknownChunks) {
  TempDir dir("wav");
  WavBytes w;
  w.junk_chunk = true;
  w.samples = {1, 2, 3};
  test::spit(dir / "j.wav", w.build());
  EXPECT_EQ(read_wav(dir / "j.wav").size(), 3u);
}

TEST(Wav, DistinctErrors) {
  TempDir dir("wav");
  EXPECT_EQ(read_error(dir / "missing.wav"), Errc::file_not_found);

  WavBytes w;
  w.samples = {1, 2};
  auto bytes = w.build();
  bytes[0] = 'X';
  test::spit(dir / "bad.wav", bytes);
  EXPECT_EQ(read_error(dir / "bad.wav"), Errc::malformed_header);

  w.format = 3;  // IEEE float
  test::spit(dir / "float.wav", w.build());
  EXPECT_EQ(read_error(dir / "float.wav"), Errc::unsupported_encoding);

  test::spit(dir / "short.wav", {'R', 'I', 'F', 'F'});
  EXPECT_EQ(read_error(dir / "short.wav"), Errc::malformed_header);
}

TEST(Wav, WriteQuantizesAndCountsClamps) {
  TempDir dir("wav");
  AudioBuffer b;
  b.samples = {0.5, 1.5, -2.0, 0.25};
  EXPECT_EQ(write_wav(dir / "o.wav", b), 2u);
  const auto bytes = test::slurp(dir / "o.wav");
  ASSERT_EQ(bytes.size(), 44u + 8u);
  auto sample = [&](std::size_t i) {
    return static_cast<std::int16_t>(bytes[44 + 2 * i] | (bytes[45 + 2 * i] << 8));
  };
  EXPECT_EQ(sample(0), 16384);
  EXPECT_EQ(sample(1), 32767);
  EXPECT_EQ(sample(2), -32768);
  EXPECT_EQ(sample(3), 8192);

  AudioBuffer empty;
  EXPECT_THROW(write_wav(dir / "e.wav", empty), Error);
  EXPECT_THROW(write_wav(dir / "no_such_dir" / "x.wav", b), Error);
}

TEST(Wav, RoundTripWithinOneLsb) {
  TempDir dir("wav");
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = test::noise_buffer(rng, 1 + rng.below(5000), 1.0, 8000 + 1000 * trial);
    write_wav(dir / "r.wav", b);
    const auto r = read_wav(dir / "r.wav");
    ASSERT_EQ(r.size(), b.size());
    EXPECT_EQ(r.sample_rate, b.sample_rate);
    EXPECT_LE(test::max_abs_diff(r.samples, b.samples), 1.0 / 32768.0);
  }
}

// ------------------------------------------------------------------ FFT

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k % n) / n);
    }
    out[k] = acc;
  }
  return out;
}

TEST(Fft, MatchesNaiveDft) {
  Rng rng(3);
  for (std::size_t n : {1u, 2u, 4u, 8u, 64u, 512u}) {
    std::vector<cplx> x(n);
    for (auto& v : x) v = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto expect = naive_dft(x);
    auto got = x;
    FftPlan(n).forward(got);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(got[k] - expect[k]), 1e-9 * n) << n << " " << k;
  }
}

TEST(Fft, RealTransformsInvert) {
  Rng rng(4);
  const std::size_t n = 256;
  FftPlan plan(n);
  std::vector<double> x(n), back(n);
  for (auto& v : x) v = rng.uniform(-1, 1);
  std::vector<cplx> half(n / 2 + 1), work;
  plan.rfft(x, half, work);
  std::vector<cplx> full(x.begin(), x.end());
  const auto expect = naive_dft(full);
  for (std::size_t k = 0; k <= n / 2; ++k) EXPECT_LT(std::abs(half[k] - expect[k]), 1e-9);
  plan.irfft(half, back, work);
  EXPECT_LT(test::max_abs_diff(x, back), 1e-12);
}

TEST(Fft, RejectsNonPowerOfTwo) { EXPECT_THROW(FftPlan(12), Error); }

// ------------------------------------------------------------- resample

TEST(Resample, IdentityAtSameRate) {
  Rng rng(1);
  const auto b = test::noise_buffer(rng, 1000);
  EXPECT_EQ(resample(b, 16000), b);
}

TEST(Resample, RejectsZeroRate) {
  AudioBuffer b;
  b.samples = {0.1, 0.2};
  EXPECT_THROW(resample(b, 0), Error);
}

TEST(Resample, OutputLengthIsRounded) {
  AudioBuffer b;
  b.sample_rate = 16000;
  for (std::size_t len : {1u, 3u, 999u, 16001u}) {
    b.samples.assign(len, 0.1);
    for (int target : {8000, 10000, 22050, 48000}) {
      const auto expect = static_cast<std::size_t>(std::llround(len * static_cast<double>(target) / 16000.0));
      EXPECT_EQ(resample(b, target).size(), expect) << len << " -> " << target;
    }
  }
}

std::size_t peak_bin(const std::vector<double>& x, std::size_t n) {
  FftPlan plan(n);
  std::vector<double> frame(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<cplx> half(n / 2 + 1), work;
  plan.rfft(frame, half, work);
  std::size_t best = 0;
  for (std::size_t k = 1; k < half.size(); ++k) {
    if (std::abs(half[k]) > std::abs(half[best])) best = k;
  }
  return best;
}

TEST(Resample, ToneKeepsItsFrequency) {
  const auto in = test::tone(1000.0, 32000, 0.5, 32000);
  const auto out = resample(in, 16000);
  ASSERT_EQ(out.sample_rate, 16000);
  const std::size_t n = 8192;
  const double bin_hz = 16000.0 / n;
  const auto k = peak_bin(out.samples, n);
  EXPECT_LE(std::abs(k * bin_hz - 1000.0), bin_hz);
}

TEST(Resample, UpDownRoundTripCorrelates) {
  Rng rng(9);
  // band-limited content well under the 8 kHz Nyquist
  AudioBuffer x = test::tone(440.0, 16000, 0.3);
  const auto y = test::tone(2500.0, 16000, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] += y.samples[i];
  const auto back = resample(resample(x, 48000), 16000);
  ASSERT_EQ(back.size(), x.size());
  double xy = 0, xx = 0, yy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x.samples[i] * back.samples[i];
    xx += x.samples[i] * x.samples[i];
    yy += back.samples[i] * back.samples[i];
  }
  EXPECT_GT(xy / std::sqrt(xx * yy), 0.999);
}

// ------------------------------------------------------------------ STFT

TEST(Stft, FrameCountRule) {
  const StftConfig cfg{512, 256};
  auto expected = [&](std::size_t len) -> std::size_t {
    if (len <= 512) return 1;
    return 1 + static_cast<std::size_t>(std::ceil((static_cast<double>(len) - 512.0) / 256.0));
  };
  for (std::size_t len : {1u, 100u, 511u, 512u, 513u, 768u, 769u, 16000u}) {
    EXPECT_EQ(stft_frame_count(len, cfg), expected(len)) << len;
    AudioBuffer b;
    b.samples.assign(len, 0.0);
    const auto s = stft(b, cfg);
    EXPECT_EQ(s.frames(), expected(len));
    EXPECT_EQ(s.freqs(), 257u);
    EXPECT_EQ(s.original_length, len);
  }
}

TEST(Stft, ZerosGiveZeroBins) {
  AudioBuffer b;
  b.samples.assign(512, 0.0);
  const auto s = stft(b);
  EXPECT_EQ(s.frames(), 1u);
  for (const auto& v : s.bins.data()) EXPECT_EQ(v, cplx(0.0));
}

TEST(Stft, ImpulseMagnitudesEqualFirstWindowSample) {
  AudioBuffer b;
  b.samples.assign(2048, 0.0);
  b.samples[0] = 1.0;
  const auto s = stft(b);
  const double w0 = hann_window(512)[0];
  EXPECT_GT(w0, 0.0);
  for (std::size_t k = 0; k < s.freqs(); ++k) EXPECT_NEAR(std::abs(s.bins(0, k)), w0, 1e-15);
}

TEST(Stft, WindowedParseval) {
  Rng rng(11);
  const auto b = test::noise_buffer(rng, 3000);
  const StftConfig cfg{512, 256};
  const auto s = stft(b, cfg);
  const auto w = hann_window(512);
  for (std::size_t t = 0; t < s.frames(); ++t) {
    double time_energy = 0.0;
    for (std::size_t i = 0; i < 512; ++i) {
      const std::size_t idx = t * 256 + i;
      const double v = idx < b.size() ? b.samples[idx] * w[i] : 0.0;
      time_energy += v * v;
    }
    double freq_energy = std::norm(s.bins(t, 0)) + std::norm(s.bins(t, 256));
    for (std::size_t k = 1; k < 256; ++k) freq_energy += 2.0 * std::norm(s.bins(t, k));
    EXPECT_NEAR(freq_energy / 512.0, time_energy, 1e-6 * time_energy);
  }
}

TEST(Stft, Linearity) {
  Rng rng(12);
  const auto x = test::noise_buffer(rng, 4000);
  const auto y = test::noise_buffer(rng, 4000);
  const double a = 0.7, c = -1.3;
  AudioBuffer z = x;
  for (std::size_t i = 0; i < z.size(); ++i) z.samples[i] = a * x.samples[i] + c * y.samples[i];
  const auto sx = stft(x), sy = stft(y), sz = stft(z);
  for (std::size_t i = 0; i < sz.bins.size(); ++i) {
    EXPECT_LT(std::abs(sz.bins.data()[i] - (a * sx.bins.data()[i] + c * sy.bins.data()[i])), 1e-9);
  }
}

TEST(Stft, RoundTripProperty) {
  Rng rng(13);
  for (const StftConfig cfg : {StftConfig{512, 256}, StftConfig{512, 128}, StftConfig{256, 64}}) {
    for (int trial = 0; trial < 15; ++trial) {
      const auto x = test::noise_buffer(rng, 1 + rng.below(20000), 1.0);
      const auto y = istft(stft(x, cfg));
      ASSERT_EQ(y.size(), x.size());
      EXPECT_LE(test::max_abs_diff(x.samples, y.samples), 1e-6) << cfg.fft_size << "/" << cfg.hop;
    }
  }
}

TEST(Stft, ZeroSpectrogramGivesSilence) {
  AudioBuffer b;
  b.samples.assign(5000, 0.3);
  auto s = stft(b);
  for (auto& v : s.bins.data()) v = 0.0;
  const auto y = istft(s);
  EXPECT_EQ(y.size(), 5000u);
  for (double v : y.samples) EXPECT_EQ(v, 0.0);
}

TEST(Stft, InconsistentShapesRejected) {
  AudioBuffer b;
  b.samples.assign(5000, 0.3);
  auto s = stft(b);
  auto wrong_t = s;
  wrong_t.bins = Matrix<cplx>(s.frames() - 1, s.freqs());
  EXPECT_THROW(istft(wrong_t), Error);
  auto wrong_f = s;
  wrong_f.bins = Matrix<cplx>(s.frames(), 129);
  EXPECT_THROW(istft(wrong_f), Error);
}

TEST(Stft, ConfigValidation) {
  AudioBuffer b;
  b.samples.assign(100, 0.0);
  EXPECT_THROW(stft(b, StftConfig{500, 250}), Error);
  EXPECT_THROW(stft(b, StftConfig{512, 0}), Error);
  EXPECT_THROW(stft(b, StftConfig{512, 1024}), Error);
  EXPECT_THROW(stft(b, StftConfig{512, 200}), Error);
  EXPECT_THROW(stft(AudioBuffer{}, StftConfig{}), Error);
}

// -------------------------------------------------------------- manifest

TEST(Manifest, ParseAndWriteRoundTrip) {
  std::istringstream in("# comment\nb\tb.wav\tclean=c.wav\tsnr=-15.0\n\na\ta.wav\n");
  auto rows = parse_manifest(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].id, "b");
  EXPECT_EQ(rows[0].get("clean"), "c.wav");
  EXPECT_EQ(rows[0].get("snr"), "-15.0");
  EXPECT_FALSE(rows[1].has("clean"));
  sort_by_id(rows);
  EXPECT_EQ(rows[0].id, "a");
  std::ostringstream out;
  write_manifest(out, rows);
  EXPECT_EQ(out.str(), "a\ta.wav\nb\tb.wav\tclean=c.wav\tsnr=-15.0\n");
}

TEST(Manifest, SetKeepsKeyOrderAndOverwrites) {
  ManifestRow r{"u", "u.wav", {}};
  r.set("x", "1");
  r.set("y", "2");
  r.set("x", "3");
  ASSERT_EQ(r.keys.size(), 2u);
  EXPECT_EQ(r.keys[0].first, "x");
  EXPECT_EQ(r.keys[0].second, "3");
}

TEST(Manifest, MalformedRowsRejected) {
  std::istringstream one_field("only_id\n");
  EXPECT_THROW(parse_manifest(one_field), Error);
  std::istringstream bad_key("a\ta.wav\tnoequals\n");
  EXPECT_THROW(parse_manifest(bad_key), Error);
  EXPECT_THROW(read_manifest("/nonexistent/manifest.tsv"), Error);
}

TEST(Manifest, FormatFixed) {
  EXPECT_EQ(format_fixed(1.5, 3), "1.500");
  EXPECT_EQ(format_fixed(-0.0000001, 3), "0.000");
  EXPECT_EQ(format_fixed(INFINITY, 3), "inf");
  EXPECT_EQ(format_fixed(-INFINITY, 3), "-inf");
  EXPECT_EQ(format_fixed(NAN, 3), "nan");
}

}  // namespace
}  // namespace gridunits
