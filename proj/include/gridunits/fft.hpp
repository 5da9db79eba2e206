// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "gridunits/error.hpp"

namespace gridunits {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n), twiddle_(n / 2), bitrev_(n) {
    if (!is_power_of_two(n)) fail(Errc::invalid_argument, "FFT size must be a power of two");
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      twiddle_[k] = {std::cos(a), std::sin(a)};
    }
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<cplx> x) const { transform(x, false); }

  // Unnormalized inverse; caller divides by n.
  void inverse(std::span<cplx> x) const { transform(x, true); }

  // One-sided spectrum (n/2 + 1 bins) of a real frame of length n.
  void rfft(std::span<const double> frame, std::span<cplx> out, std::vector<cplx>& work) const {
    work.assign(n_, cplx{});
    for (std::size_t i = 0; i < frame.size() && i < n_; ++i) work[i] = frame[i];
    forward(work);
    for (std::size_t k = 0; k <= n_ / 2; ++k) out[k] = work[k];
  }

  // Real frame from a one-sided spectrum, scaled by 1/n.
  void irfft(std::span<const cplx> half, std::span<double> out, std::vector<cplx>& work) const {
    work.assign(n_, cplx{});
    for (std::size_t k = 0; k <= n_ / 2; ++k) work[k] = half[k];
    for (std::size_t k = 1; k < n_ / 2; ++k) work[n_ - k] = std::conj(half[k]);
    inverse(work);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = work[i].real() * scale;
  }

 private:
  void transform(std::span<cplx> x, bool inverse) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t step = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t k = 0; k < half; ++k) {
          cplx w = twiddle_[k * step];
          if (inverse) w = std::conj(w);
          const cplx t = w * x[start + k + half];
          x[start + k + half] = x[start + k] - t;
          x[start + k] += t;
        }
      }
    }
  }

  std::size_t n_;
  std::vector<cplx> twiddle_;
  std::vector<std::size_t> bitrev_;
};

}  // namespace gridunits
