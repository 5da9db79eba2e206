// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// GNW1 weight files:
//   "GNW1" | u32 sample_rate | u32 tensor_count |
//   per tensor: u16 name_len | name (UTF-8) | u8 ndim | ndim x u32 dims |
//               prod(dims) x f32 payload (row-major)
// All integers and floats little-endian.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gridunits/bytes.hpp"
#include "gridunits/error.hpp"
#include "gridunits/gridnet/config.hpp"
#include "gridunits/random.hpp"

namespace gridunits::gridnet {

struct Tensor {
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t b) { return a * b; });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_string(const std::vector<std::uint32_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Immutable after construction; safe to share across threads.
struct GridNetWeights {
  std::uint32_t sample_rate = 16000;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) fail(Errc::missing_tensor, name);
    return it->second;
  }

  std::span<const float> values(const std::string& name) const { return at(name).values; }

  friend bool operator==(const GridNetWeights&, const GridNetWeights&) = default;
};

inline void validate_weights(const GridNetWeights& w, const GridNetConfig& cfg) {
  const auto specs = tensor_manifest(cfg);
  for (const auto& spec : specs) {
    const auto it = w.tensors.find(spec.name);
    if (it == w.tensors.end()) fail(Errc::missing_tensor, spec.name);
    if (it->second.shape != spec.shape) {
      fail(Errc::shape_mismatch, spec.name + ": stored " + shape_string(it->second.shape) +
                                     ", expected " + shape_string(spec.shape));
    }
    for (float v : it->second.values) {
      if (!std::isfinite(v)) fail(Errc::non_finite, spec.name);
    }
  }
  if (w.tensors.size() != specs.size()) {
    for (const auto& [name, t] : w.tensors) {
      bool known = false;
      for (const auto& spec : specs) known = known || spec.name == name;
      if (!known) fail(Errc::unexpected_tensor, name);
    }
  }
}

inline std::vector<std::uint8_t> encode_gnw1(const GridNetWeights& w) {
  bytes::Writer out;
  out.put_bytes("GNW1");
  out.put<std::uint32_t>(w.sample_rate);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(w.tensors.size()));
  for (const auto& [name, t] : w.tensors) {
    if (name.size() > UINT16_MAX) fail(Errc::invalid_argument, "tensor name too long");
    if (t.shape.size() > UINT8_MAX) fail(Errc::invalid_argument, name + ": too many dims");
    if (t.values.size() != t.numel()) fail(Errc::shape_mismatch, name + ": payload does not match shape");
    out.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    out.put_bytes(name);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) out.put<std::uint32_t>(d);
    for (float v : t.values) out.put<float>(v);
  }
  return std::move(out.buffer());
}

inline GridNetWeights decode_gnw1(const std::vector<std::uint8_t>& data) {
  bytes::Reader in(data, Errc::length_mismatch);
  if (data.size() < 4 || in.get_string(4) != "GNW1") fail(Errc::bad_magic, "not a GNW1 weight file");
  GridNetWeights w;
  w.sample_rate = in.get<std::uint32_t>();
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint16_t>();
    std::string name = in.get_string(name_len);
    Tensor t;
    const auto ndim = in.get<std::uint8_t>();
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim = in.get<std::uint32_t>();
      t.shape.push_back(dim);
      if (dim != 0 && numel > SIZE_MAX / 4 / dim) fail(Errc::dimension_overflow, name);
      numel *= dim;
    }
    if (numel > in.remaining() / sizeof(float)) {
      fail(Errc::length_mismatch, name + ": payload truncated");
    }
    t.values.resize(numel);
    for (auto& v : t.values) v = in.get<float>();
    if (!w.tensors.emplace(name, std::move(t)).second) fail(Errc::malformed_header, "duplicate tensor " + name);
  }
  if (in.remaining() != 0) fail(Errc::length_mismatch, "trailing bytes after last tensor");
  return w;
}

inline void save_weights(const std::filesystem::path& path, const GridNetWeights& w) {
  bytes::write_file(path, encode_gnw1(w));
}

inline GridNetWeights load_weights(const std::filesystem::path& path, const GridNetConfig& cfg) {
  auto w = decode_gnw1(bytes::read_file(path));
  validate_weights(w, cfg);
  return w;
}

inline GridNetWeights zero_weights(const GridNetConfig& cfg, std::uint32_t sample_rate = 16000) {
  GridNetWeights w;
  w.sample_rate = sample_rate;
  for (const auto& spec : tensor_manifest(cfg)) {
    Tensor t{spec.shape, {}};
    t.values.assign(t.numel(), 0.0f);
    w.tensors.emplace(spec.name, std::move(t));
  }
  return w;
}

// Uniform(-scale, scale) everywhere except normalization gains, which are
// drawn around 1.
inline GridNetWeights random_weights(const GridNetConfig& cfg, std::uint64_t seed, double scale = 0.3,
                                     std::uint32_t sample_rate = 16000) {
  auto w = zero_weights(cfg, sample_rate);
  Rng rng(seed);
  for (const auto& spec : tensor_manifest(cfg)) {
    const bool is_gain = spec.name.ends_with(".gain");
    for (auto& v : w.tensors.at(spec.name).values) {
      const double u = rng.uniform(-scale, scale);
      v = static_cast<float>(is_gain ? 1.0 + u : u);
    }
  }
  return w;
}

// Weights whose decoder emits M = 1 + 0i everywhere regardless of input.
inline GridNetWeights unity_mask_weights(const GridNetConfig& cfg, std::uint32_t sample_rate = 16000) {
  auto w = zero_weights(cfg, sample_rate);
  w.tensors.at("decoder.deconv.bias").values = {1.0f, 0.0f};
  return w;
}

}  // namespace gridunits::gridnet
