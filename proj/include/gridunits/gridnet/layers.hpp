// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Building blocks of the TF-GridNet forward pass. Everything operates on a
// D x T x F feature tensor in double precision; weights stay float32.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gridunits/error.hpp"
#include "gridunits/gridnet/config.hpp"
#include "gridunits/gridnet/weights.hpp"
#include "gridunits/matrix.hpp"
#include "gridunits/parallel.hpp"

namespace gridunits::gridnet {

inline constexpr double kNormEps = 1e-8;

class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(std::size_t channels, std::size_t frames, std::size_t freqs, double fill = 0.0)
      : d_(channels), t_(frames), f_(freqs), data_(channels * frames * freqs, fill) {}

  std::size_t channels() const noexcept { return d_; }
  std::size_t frames() const noexcept { return t_; }
  std::size_t freqs() const noexcept { return f_; }

  double& operator()(std::size_t d, std::size_t t, std::size_t f) { return data_[(d * t_ + t) * f_ + f]; }
  double operator()(std::size_t d, std::size_t t, std::size_t f) const { return data_[(d * t_ + t) * f_ + f]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const FeatureTensor& o) const noexcept { return d_ == o.d_ && t_ == o.t_ && f_ == o.f_; }

  // Swaps the T and F axes.
  FeatureTensor transposed() const {
    FeatureTensor out(d_, f_, t_);
    for (std::size_t d = 0; d < d_; ++d)
      for (std::size_t t = 0; t < t_; ++t)
        for (std::size_t f = 0; f < f_; ++f) out(d, f, t) = (*this)(d, t, f);
    return out;
  }

 private:
  std::size_t d_ = 0, t_ = 0, f_ = 0;
  std::vector<double> data_;
};

inline void require_channels(std::span<const float> v, std::size_t d, const char* what) {
  if (v.size() != d) fail(Errc::shape_mismatch, std::string(what) + " has wrong length");
}

// Global layer norm: statistics over all D*T*F entries, per-channel affine.
inline FeatureTensor gln(const FeatureTensor& x, std::span<const float> gain, std::span<const float> bias,
                         double eps = kNormEps) {
  require_channels(gain, x.channels(), "gln gain");
  require_channels(bias, x.channels(), "gln bias");
  const auto& v = x.data();
  double mean = 0.0;
  for (double e : v) mean += e;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double e : v) var += (e - mean) * (e - mean);
  var /= static_cast<double>(v.size());
  const double inv = 1.0 / std::sqrt(var + eps);

  FeatureTensor out(x.channels(), x.frames(), x.freqs());
  const std::size_t plane = x.frames() * x.freqs();
  for (std::size_t d = 0; d < x.channels(); ++d) {
    for (std::size_t i = 0; i < plane; ++i) {
      out.data()[d * plane + i] = gain[d] * (v[d * plane + i] - mean) * inv + bias[d];
    }
  }
  return out;
}

// Layer norm over the channel axis at every (t, f) position.
inline FeatureTensor channel_layer_norm(const FeatureTensor& x, std::span<const float> gain,
                                        std::span<const float> bias, double eps = kNormEps) {
  require_channels(gain, x.channels(), "layer norm gain");
  require_channels(bias, x.channels(), "layer norm bias");
  const std::size_t D = x.channels();
  const std::size_t plane = x.frames() * x.freqs();
  const auto& v = x.data();
  FeatureTensor out(D, x.frames(), x.freqs());
  for (std::size_t i = 0; i < plane; ++i) {
    double mean = 0.0;
    for (std::size_t d = 0; d < D; ++d) mean += v[d * plane + i];
    mean /= static_cast<double>(D);
    double var = 0.0;
    for (std::size_t d = 0; d < D; ++d) var += (v[d * plane + i] - mean) * (v[d * plane + i] - mean);
    var /= static_cast<double>(D);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t d = 0; d < D; ++d) out.data()[d * plane + i] = gain[d] * (v[d * plane + i] - mean) * inv + bias[d];
  }
  return out;
}

// 3x3 convolution, stride 1, zero padding 1. kernel [out, in, 3, 3].
inline FeatureTensor conv2d_3x3(const FeatureTensor& x, std::span<const float> kernel, std::span<const float> bias,
                                std::size_t out_channels) {
  const std::size_t C = x.channels(), T = x.frames(), F = x.freqs();
  if (kernel.size() != out_channels * C * 9 || bias.size() != out_channels) {
    fail(Errc::shape_mismatch, "conv2d kernel does not match input channels");
  }
  FeatureTensor out(out_channels, T, F);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        double acc = bias[o];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t a = 0; a < 3; ++a) {
            if (t + a < 1 || t + a - 1 >= T) continue;
            for (std::size_t b = 0; b < 3; ++b) {
              if (f + b < 1 || f + b - 1 >= F) continue;
              acc += kernel[((o * C + c) * 3 + a) * 3 + b] * x(c, t + a - 1, f + b - 1);
            }
          }
        }
        out(o, t, f) = acc;
      }
    }
  }
  return out;
}

// Transposed 3x3 convolution, stride 1, padding 1. kernel [out, in, 3, 3];
// input (t', f') contributes to output (t' + a - 1, f' + b - 1).
inline FeatureTensor deconv2d_3x3(const FeatureTensor& x, std::span<const float> kernel, std::span<const float> bias,
                                  std::size_t out_channels) {
  const std::size_t C = x.channels(), T = x.frames(), F = x.freqs();
  if (kernel.size() != out_channels * C * 9 || bias.size() != out_channels) {
    fail(Errc::shape_mismatch, "deconv2d kernel does not match input channels");
  }
  FeatureTensor out(out_channels, T, F);
  for (std::size_t o = 0; o < out_channels; ++o) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        double acc = bias[o];
        for (std::size_t c = 0; c < C; ++c) {
          for (std::size_t a = 0; a < 3; ++a) {
            // source frame t - a + 1
            if (t + 1 < a || t + 1 - a >= T) continue;
            for (std::size_t b = 0; b < 3; ++b) {
              if (f + 1 < b || f + 1 - b >= F) continue;
              acc += kernel[((o * C + c) * 3 + a) * 3 + b] * x(c, t + 1 - a, f + 1 - b);
            }
          }
        }
        out(o, t, f) = acc;
      }
    }
  }
  return out;
}

struct LstmWeights {
  std::span<const float> w_ih;  // [4H, input]
  std::span<const float> w_hh;  // [4H, H]
  std::span<const float> bias;  // [4H]
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// One LSTM direction over seq (N x input); writes hidden states into columns
// [col, col + H) of out. Gate order (i, f, g, o).
inline void lstm_direction(const Matrix<double>& seq, const LstmWeights& w, std::size_t hidden, bool reverse,
                           Matrix<double>& out, std::size_t col) {
  const std::size_t N = seq.rows(), in = seq.cols(), G = 4 * hidden;
  // input projections for every step at once
  Matrix<double> proj(N, G);
  for (std::size_t n = 0; n < N; ++n) {
    const auto x = seq.row(n);
    auto p = proj.row(n);
    for (std::size_t g = 0; g < G; ++g) {
      const float* wr = w.w_ih.data() + g * in;
      double acc = w.bias[g];
      for (std::size_t k = 0; k < in; ++k) acc += wr[k] * x[k];
      p[g] = acc;
    }
  }
  std::vector<double> h(hidden, 0.0), c(hidden, 0.0), z(G);
  for (std::size_t step = 0; step < N; ++step) {
    const std::size_t n = reverse ? N - 1 - step : step;
    const auto p = proj.row(n);
    for (std::size_t g = 0; g < G; ++g) {
      const float* wr = w.w_hh.data() + g * hidden;
      double acc = p[g];
      for (std::size_t k = 0; k < hidden; ++k) acc += wr[k] * h[k];
      z[g] = acc;
    }
    for (std::size_t k = 0; k < hidden; ++k) {
      const double ig = sigmoid(z[k]);
      const double fg = sigmoid(z[hidden + k]);
      const double gg = std::tanh(z[2 * hidden + k]);
      const double og = sigmoid(z[3 * hidden + k]);
      c[k] = fg * c[k] + ig * gg;
      h[k] = og * std::tanh(c[k]);
      out(n, col + k) = h[k];
    }
  }
}

}  // namespace detail

// Bidirectional LSTM from zero initial state. Output row n is
// [forward h_n ; backward h_n], width 2H.
inline Matrix<double> blstm_forward(const Matrix<double>& seq, const LstmWeights& fwd, const LstmWeights& bwd,
                                    std::size_t hidden) {
  const std::size_t in = seq.cols(), G = 4 * hidden;
  for (const auto* w : {&fwd, &bwd}) {
    if (w->w_ih.size() != G * in || w->w_hh.size() != G * hidden || w->bias.size() != G) {
      fail(Errc::shape_mismatch, "LSTM weights do not match input width / hidden size");
    }
  }
  Matrix<double> out(seq.rows(), 2 * hidden);
  detail::lstm_direction(seq, fwd, hidden, false, out, 0);
  detail::lstm_direction(seq, bwd, hidden, true, out, hidden);
  return out;
}

// Resolved views of one intra-frame or sub-band branch.
struct BranchWeights {
  std::span<const float> norm_gain, norm_bias;
  LstmWeights fwd, bwd;
  std::span<const float> deconv_kernel, deconv_bias;

  static BranchWeights from(const GridNetWeights& w, const std::string& prefix) {
    auto lstm = [&](const std::string& dir) {
      const auto q = prefix + ".blstm." + dir;
      return LstmWeights{w.values(q + ".w_ih"), w.values(q + ".w_hh"), w.values(q + ".bias")};
    };
    return {w.values(prefix + ".norm.gain"), w.values(prefix + ".norm.bias"), lstm("fwd"), lstm("bwd"),
            w.values(prefix + ".deconv.kernel"), w.values(prefix + ".deconv.bias")};
  }
};

struct AttentionWeights {
  std::span<const float> norm_gain, norm_bias;
  std::span<const float> query_w, query_b, key_w, key_b, value_w, value_b, output_w, output_b;

  static AttentionWeights from(const GridNetWeights& w, const std::string& prefix) {
    auto v = [&](const std::string& s) { return w.values(prefix + "." + s); };
    return {v("norm.gain"),   v("norm.bias"),  v("query.weight"), v("query.bias"),   v("key.weight"),
            v("key.bias"),    v("value.weight"), v("value.bias"), v("output.weight"), v("output.bias")};
  }
};

enum class SequenceAxis { frequency, time };

// Shared body of the intra-frame (sequence along F, one per frame) and
// sub-band (sequence along T, one per frequency) modules:
// LN -> unfold -> BLSTM -> transposed 1-D conv -> residual add.
inline FeatureTensor sequence_branch(const FeatureTensor& x, const BranchWeights& w, const GridNetConfig& cfg,
                                     SequenceAxis axis, int threads = 1) {
  const std::size_t D = x.channels();
  const std::size_t H = cfg.lstm_hidden;
  const std::size_t I = cfg.unfold_kernel, J = cfg.unfold_stride;
  const bool along_f = axis == SequenceAxis::frequency;
  const std::size_t len = along_f ? x.freqs() : x.frames();
  const std::size_t outer = along_f ? x.frames() : x.freqs();
  if (len < I) {
    fail(Errc::invalid_argument, std::string(along_f ? "F" : "T") + " = " + std::to_string(len) +
                                     " is shorter than unfold_kernel " + std::to_string(I));
  }
  if (w.deconv_kernel.size() != 2 * H * D * I || w.deconv_bias.size() != D) {
    fail(Errc::shape_mismatch, "deconv weights do not match config");
  }
  const std::size_t P = (len - I + J - 1) / J + 1;  // unfolded positions, tail zero-padded
  const FeatureTensor xn = channel_layer_norm(x, w.norm_gain, w.norm_bias);
  FeatureTensor out = x;

  auto at = [&](const FeatureTensor& tensor, std::size_t d, std::size_t o, std::size_t pos) {
    return along_f ? tensor(d, o, pos) : tensor(d, pos, o);
  };

  parallel_for(outer, threads, [&](std::size_t o) {
    Matrix<double> seq(P, D * I);
    for (std::size_t p = 0; p < P; ++p) {
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t k = 0; k < I; ++k) {
          const std::size_t pos = p * J + k;
          seq(p, d * I + k) = pos < len ? at(xn, d, o, pos) : 0.0;
        }
      }
    }
    const Matrix<double> h = blstm_forward(seq, w.fwd, w.bwd, H);

    const std::size_t padded = (P - 1) * J + I;
    Matrix<double> proj(padded, D);
    for (std::size_t pos = 0; pos < padded; ++pos)
      for (std::size_t d = 0; d < D; ++d) proj(pos, d) = w.deconv_bias[d];
    for (std::size_t p = 0; p < P; ++p) {
      const auto hp = h.row(p);
      for (std::size_t c = 0; c < 2 * H; ++c) {
        const double hv = hp[c];
        for (std::size_t d = 0; d < D; ++d) {
          const float* kr = w.deconv_kernel.data() + (c * D + d) * I;
          for (std::size_t k = 0; k < I; ++k) proj(p * J + k, d) += kr[k] * hv;
        }
      }
    }
    for (std::size_t pos = 0; pos < len; ++pos) {
      for (std::size_t d = 0; d < D; ++d) {
        if (along_f) {
          out(d, o, pos) += proj(pos, d);
        } else {
          out(d, pos, o) += proj(pos, d);
        }
      }
    }
  });
  return out;
}

inline FeatureTensor intra_frame_module(const FeatureTensor& x, const BranchWeights& w, const GridNetConfig& cfg,
                                        int threads = 1) {
  return sequence_branch(x, w, cfg, SequenceAxis::frequency, threads);
}

inline FeatureTensor sub_band_module(const FeatureTensor& x, const BranchWeights& w, const GridNetConfig& cfg,
                                     int threads = 1) {
  return sequence_branch(x, w, cfg, SequenceAxis::time, threads);
}

namespace detail {

// 1x1 projection over channels: y[o] = sum_i W[o, i] x[i] + b[o].
inline FeatureTensor project_channels(const FeatureTensor& x, std::span<const float> weight,
                                      std::span<const float> bias) {
  const std::size_t D = x.channels();
  if (weight.size() != D * D || bias.size() != D) fail(Errc::shape_mismatch, "attention projection shape");
  const std::size_t plane = x.frames() * x.freqs();
  FeatureTensor y(D, x.frames(), x.freqs());
  for (std::size_t o = 0; o < D; ++o) {
    double* yo = y.data().data() + o * plane;
    for (std::size_t i = 0; i < plane; ++i) yo[i] = bias[o];
    for (std::size_t c = 0; c < D; ++c) {
      const double wv = weight[o * D + c];
      const double* xc = x.data().data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) yo[i] += wv * xc[i];
    }
  }
  return y;
}

}  // namespace detail

// Self-attention across frames. Each frame's token for head h is the
// flattened (D/heads) x F slice of the projected features; scores are
// q.k / sqrt(D/heads * F), softmax over frames.
inline FeatureTensor cross_frame_attention(const FeatureTensor& x, const AttentionWeights& w, std::size_t heads,
                                           int threads = 1) {
  const std::size_t D = x.channels(), T = x.frames(), F = x.freqs();
  if (heads == 0 || D % heads != 0) {
    fail(Errc::invalid_argument, "channels " + std::to_string(D) + " not divisible by heads " + std::to_string(heads));
  }
  const std::size_t Dh = D / heads;
  const FeatureTensor xn = channel_layer_norm(x, w.norm_gain, w.norm_bias);
  const FeatureTensor q = detail::project_channels(xn, w.query_w, w.query_b);
  const FeatureTensor k = detail::project_channels(xn, w.key_w, w.key_b);
  const FeatureTensor v = detail::project_channels(xn, w.value_w, w.value_b);
  const double scale = 1.0 / std::sqrt(static_cast<double>(Dh * F));

  FeatureTensor ctx(D, T, F);
  parallel_for(heads * T, threads, [&](std::size_t job) {
    const std::size_t h = job / T, t = job % T;
    std::vector<double> score(T);
    double best = -INFINITY;
    for (std::size_t s = 0; s < T; ++s) {
      double acc = 0.0;
      for (std::size_t c = h * Dh; c < (h + 1) * Dh; ++c) {
        const double* qr = &q.data()[(c * T + t) * F];
        const double* kr = &k.data()[(c * T + s) * F];
        for (std::size_t f = 0; f < F; ++f) acc += qr[f] * kr[f];
      }
      score[s] = acc * scale;
      best = std::max(best, score[s]);
    }
    double total = 0.0;
    for (auto& s : score) {
      s = std::exp(s - best);
      total += s;
    }
    for (auto& s : score) s /= total;
    for (std::size_t c = h * Dh; c < (h + 1) * Dh; ++c) {
      double* cr = &ctx.data()[(c * T + t) * F];
      for (std::size_t s = 0; s < T; ++s) {
        const double a = score[s];
        const double* vr = &v.data()[(c * T + s) * F];
        for (std::size_t f = 0; f < F; ++f) cr[f] += a * vr[f];
      }
    }
  });

  FeatureTensor out = detail::project_channels(ctx, w.output_w, w.output_b);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += x.data()[i];
  return out;
}

}  // namespace gridunits::gridnet
