// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// TF-GridNet forward pass emitting a complex ratio mask:
//   STFT (2 x T x F) -> 3x3 conv + gLN -> B x [intra-frame, sub-band,
//   cross-frame attention] -> 3x3 transposed conv (2 x T x F) -> mask.

#pragma once

#include <string>

#include "gridunits/audio.hpp"
#include "gridunits/error.hpp"
#include "gridunits/gridnet/config.hpp"
#include "gridunits/gridnet/layers.hpp"
#include "gridunits/gridnet/weights.hpp"
#include "gridunits/masking.hpp"
#include "gridunits/stft.hpp"

namespace gridunits::gridnet {

// Real and imaginary parts as a 2 x T x F tensor.
inline FeatureTensor spectrogram_to_tensor(const ComplexSpectrogram& spec) {
  FeatureTensor x(2, spec.frames(), spec.freqs());
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t f = 0; f < spec.freqs(); ++f) {
      x(0, t, f) = spec.bins(t, f).real();
      x(1, t, f) = spec.bins(t, f).imag();
    }
  }
  return x;
}

inline FeatureTensor encode(const ComplexSpectrogram& spec, const GridNetWeights& w) {
  const auto& bias = w.at("encoder.conv.bias");
  const auto pre = conv2d_3x3(spectrogram_to_tensor(spec), w.values("encoder.conv.kernel"), bias.values,
                              bias.values.size());
  return gln(pre, w.values("encoder.norm.gain"), w.values("encoder.norm.bias"));
}

inline FeatureTensor gridnet_block(const FeatureTensor& x, const GridNetWeights& w, const GridNetConfig& cfg,
                                   std::size_t block, int threads = 1) {
  const auto prefix = block_prefix(block);
  auto y = intra_frame_module(x, BranchWeights::from(w, prefix + ".intra"), cfg, threads);
  y = sub_band_module(y, BranchWeights::from(w, prefix + ".sub"), cfg, threads);
  return cross_frame_attention(y, AttentionWeights::from(w, prefix + ".attn"), cfg.attn_heads, threads);
}

// `threads` only splits independent rows; the result is bit-identical for
// any thread count.
inline MaskTensor gridnet_forward(const ComplexSpectrogram& mix, const GridNetWeights& w, const GridNetConfig& cfg,
                                  int threads = 1) {
  cfg.validate();
  if (mix.freqs() != cfg.stft.bins()) {
    fail(Errc::shape_mismatch, "spectrogram has " + std::to_string(mix.freqs()) + " bins, network expects " +
                                   std::to_string(cfg.stft.bins()));
  }
  auto x = encode(mix, w);
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) x = gridnet_block(x, w, cfg, b, threads);
  const auto out = deconv2d_3x3(x, w.values("decoder.deconv.kernel"), w.values("decoder.deconv.bias"), 2);

  MaskTensor mask{Matrix<cplx>(mix.frames(), mix.freqs()), std::nullopt};
  for (std::size_t t = 0; t < mix.frames(); ++t) {
    for (std::size_t f = 0; f < mix.freqs(); ++f) mask.values(t, f) = {out(0, t, f), out(1, t, f)};
  }
  if (cfg.mask_bound) mask = compress_mask(mask, *cfg.mask_bound, kDefaultMaskSteepness);
  return mask;
}

inline AudioBuffer enhance(const AudioBuffer& noisy, const GridNetWeights& w, const GridNetConfig& cfg,
                           int threads = 1) {
  if (static_cast<std::uint32_t>(noisy.sample_rate) != w.sample_rate) {
    fail(Errc::sample_rate_mismatch, "input at " + std::to_string(noisy.sample_rate) + " Hz, weights trained at " +
                                         std::to_string(w.sample_rate) + " Hz");
  }
  const auto spec = stft(noisy, cfg.stft);
  const auto mask = gridnet_forward(spec, w, cfg, threads);
  return istft(apply_mask(mask, spec));
}

}  // namespace gridunits::gridnet
