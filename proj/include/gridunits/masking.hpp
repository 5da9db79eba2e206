// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Complex ratio masks: the ideal (oracle) mask, tanh compression, and
// application to a mixture spectrogram.

#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "gridunits/error.hpp"
#include "gridunits/matrix.hpp"
#include "gridunits/stft.hpp"

namespace gridunits {

struct MaskTensor {
  Matrix<cplx> values;          // T x F
  std::optional<double> bound;  // K, present iff compressed
};

inline constexpr double kDefaultMaskEps = 1e-8;
inline constexpr double kDefaultMaskBound = 5.0;
inline constexpr double kDefaultMaskSteepness = 1.0;

inline void require_same_shape(const Matrix<cplx>& a, const Matrix<cplx>& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(Errc::shape_mismatch, std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                   std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                   "x" + std::to_string(b.cols()));
  }
}

// M = S conj(X) / (|X|^2 + eps), i.e. a regularized S / X per bin.
inline MaskTensor oracle_cirm(const ComplexSpectrogram& clean, const ComplexSpectrogram& mix,
                              double eps = kDefaultMaskEps) {
  require_same_shape(clean.bins, mix.bins, "oracle_cirm");
  MaskTensor mask{Matrix<cplx>(mix.frames(), mix.freqs()), std::nullopt};
  auto& m = mask.values.data();
  const auto& s = clean.bins.data();
  const auto& x = mix.bins.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = s[i] * std::conj(x[i]) / (std::norm(x[i]) + eps);
  }
  return mask;
}

// Each real/imag component m -> K tanh(C m).
inline MaskTensor compress_mask(const MaskTensor& mask, double bound = kDefaultMaskBound,
                                double steepness = kDefaultMaskSteepness) {
  if (!(bound > 0.0) || !(steepness > 0.0)) {
    fail(Errc::invalid_argument, "mask compression needs K > 0 and C > 0");
  }
  MaskTensor out{mask.values, bound};
  for (auto& v : out.values.data()) {
    v = {bound * std::tanh(steepness * v.real()), bound * std::tanh(steepness * v.imag())};
  }
  return out;
}

inline ComplexSpectrogram apply_mask(const MaskTensor& mask, const ComplexSpectrogram& mix) {
  require_same_shape(mask.values, mix.bins, "apply_mask");
  ComplexSpectrogram out = mix;
  auto& y = out.bins.data();
  const auto& m = mask.values.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
  return out;
}

// Oracle enhancement: mask the mixture with the ideal cIRM of the clean
// reference and resynthesize.
inline AudioBuffer oracle_enhance(const AudioBuffer& clean, const AudioBuffer& mix, const StftConfig& cfg = {},
                                  double eps = kDefaultMaskEps) {
  if (clean.sample_rate != mix.sample_rate) fail(Errc::sample_rate_mismatch, "clean and mixture rates differ");
  if (clean.size() != mix.size()) fail(Errc::length_mismatch, "clean and mixture lengths differ");
  const auto x = stft(mix, cfg);
  return istft(apply_mask(oracle_cirm(stft(clean, cfg), x, eps), x));
}

}  // namespace gridunits
