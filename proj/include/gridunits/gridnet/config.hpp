// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridunits/error.hpp"
#include "gridunits/stft.hpp"

namespace gridunits::gridnet {

struct GridNetConfig {
  std::size_t emb_dim = 32;      // D
  std::size_t num_blocks = 4;    // B
  std::size_t lstm_hidden = 128; // per direction
  std::size_t attn_heads = 4;
  std::size_t unfold_kernel = 1;
  std::size_t unfold_stride = 1;
  StftConfig stft{512, 256};
  std::optional<double> mask_bound;  // tanh-compress the output mask to [-K, K]

  void validate() const {
    stft.validate();
    if (emb_dim == 0 || num_blocks == 0 || lstm_hidden == 0 || attn_heads == 0) {
      fail(Errc::invalid_argument, "gridnet dimensions must be positive");
    }
    if (emb_dim % attn_heads != 0) {
      fail(Errc::invalid_argument, "emb_dim " + std::to_string(emb_dim) +
                                       " is not divisible by attn_heads " + std::to_string(attn_heads));
    }
    if (unfold_kernel == 0 || unfold_stride == 0) {
      fail(Errc::invalid_argument, "unfold kernel and stride must be positive");
    }
    if (mask_bound && !(*mask_bound > 0.0)) fail(Errc::invalid_argument, "mask_bound must be positive");
  }
};

struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> shape;
};

inline constexpr const char* kBranchNames[] = {"intra", "sub"};
inline constexpr const char* kDirectionNames[] = {"fwd", "bwd"};
inline constexpr const char* kProjectionNames[] = {"query", "key", "value", "output"};

inline std::string block_prefix(std::size_t block) { return "block" + std::to_string(block); }

// Every tensor a network of this configuration needs, in file order.
//
// Layouts (row-major):
//   encoder.conv.kernel    [D, 2, 3, 3]      out, in(re/im), kt, kf
//   *.blstm.*.w_ih         [4H, D*I]         gate rows (i, f, g, o); input col d*I + k
//   *.blstm.*.w_hh         [4H, H]
//   *.blstm.*.bias         [4H]
//   *.deconv.kernel        [2H, D, I]        in, out, k   (transposed 1-D conv)
//   block*.attn.*.weight   [D, D]            out, in      (1x1 projection)
//   decoder.deconv.kernel  [2, D, 3, 3]      out(re/im), in, kt, kf (transposed 2-D conv)
inline std::vector<TensorSpec> tensor_manifest(const GridNetConfig& cfg) {
  const auto D = static_cast<std::uint32_t>(cfg.emb_dim);
  const auto H = static_cast<std::uint32_t>(cfg.lstm_hidden);
  const auto I = static_cast<std::uint32_t>(cfg.unfold_kernel);
  std::vector<TensorSpec> specs = {
      {"encoder.conv.kernel", {D, 2, 3, 3}},
      {"encoder.conv.bias", {D}},
      {"encoder.norm.gain", {D}},
      {"encoder.norm.bias", {D}},
  };
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    const auto blk = block_prefix(b);
    for (const char* branch : kBranchNames) {
      const auto p = blk + "." + branch;
      specs.push_back({p + ".norm.gain", {D}});
      specs.push_back({p + ".norm.bias", {D}});
      for (const char* dir : kDirectionNames) {
        const auto q = p + ".blstm." + dir;
        specs.push_back({q + ".w_ih", {4 * H, D * I}});
        specs.push_back({q + ".w_hh", {4 * H, H}});
        specs.push_back({q + ".bias", {4 * H}});
      }
      specs.push_back({p + ".deconv.kernel", {2 * H, D, I}});
      specs.push_back({p + ".deconv.bias", {D}});
    }
    specs.push_back({blk + ".attn.norm.gain", {D}});
    specs.push_back({blk + ".attn.norm.bias", {D}});
    for (const char* proj : kProjectionNames) {
      specs.push_back({blk + ".attn." + proj + ".weight", {D, D}});
      specs.push_back({blk + ".attn." + proj + ".bias", {D}});
    }
  }
  specs.push_back({"decoder.deconv.kernel", {2, D, 3, 3}});
  specs.push_back({"decoder.deconv.bias", {2}});
  return specs;
}

}  // namespace gridunits::gridnet
