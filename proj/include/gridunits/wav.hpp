// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// RIFF/WAVE reader and writer for 16-bit PCM.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "gridunits/audio.hpp"
#include "gridunits/bytes.hpp"
#include "gridunits/error.hpp"

namespace gridunits {

inline constexpr double kPcmScale = 32768.0;

// Multichannel files are averaged down to mono. Unknown chunks are skipped.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader in(data, Errc::malformed_header);
  const std::string where = " in " + path.string();

  if (data.size() < 12) fail(Errc::malformed_header, "file too short" + where);
  if (in.get_string(4) != "RIFF") fail(Errc::malformed_header, "missing RIFF tag" + where);
  in.get<std::uint32_t>();
  if (in.get_string(4) != "WAVE") fail(Errc::malformed_header, "missing WAVE tag" + where);

  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;

  while (in.remaining() >= 8) {
    const std::string id = in.get_string(4);
    const std::uint32_t size = in.get<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) fail(Errc::malformed_header, "fmt chunk too small" + where);
      const auto format = in.get<std::uint16_t>();
      channels = in.get<std::uint16_t>();
      rate = in.get<std::uint32_t>();
      in.get<std::uint32_t>();  // byte rate
      block_align = in.get<std::uint16_t>();
      const auto bits = in.get<std::uint16_t>();
      in.skip(size - 16 + (size & 1u));
      if (format != 1) {
        fail(Errc::unsupported_encoding,
             "audio format " + std::to_string(format) + " is not PCM" + where);
      }
      if (bits != 16) {
        fail(Errc::unsupported_encoding,
             std::to_string(bits) + "-bit samples are not supported" + where);
      }
      if (channels == 0 || rate == 0 || block_align != 2u * channels) {
        fail(Errc::malformed_header, "inconsistent fmt chunk" + where);
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) fail(Errc::malformed_header, "data chunk before fmt" + where);
      // Streaming writers leave the size at 0xFFFFFFFF; take what is there.
      const std::size_t bytes_avail = std::min<std::size_t>(size, in.remaining());
      const std::size_t frames = bytes_avail / block_align;
      AudioBuffer buf;
      buf.sample_rate = static_cast<int>(rate);
      buf.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          acc += in.get<std::int16_t>() / kPcmScale;
        }
        buf.samples[i] = acc / channels;
      }
      return buf;
    } else {
      if (size + (size & 1u) > in.remaining()) break;
      in.skip(size + (size & 1u));
    }
  }
  fail(Errc::malformed_header, "no data chunk" + where);
}

inline std::int16_t quantize_pcm16(double sample) {
  const double scaled = std::nearbyint(std::clamp(sample, -1.0, 1.0) * kPcmScale);
  return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

// Writes 16-bit mono PCM. Returns how many samples had to be clamped into
// [-1, 1]; non-finite samples are written as zero and counted too.
inline std::size_t write_wav(const std::filesystem::path& path, const AudioBuffer& buf) {
  if (buf.samples.empty()) fail(Errc::empty_input, "refusing to write empty audio to " + path.string());
  if (buf.sample_rate <= 0) fail(Errc::invalid_argument, "sample rate must be positive");

  const auto n = buf.samples.size();
  const auto data_bytes = static_cast<std::uint32_t>(n * 2);
  bytes::Writer out;
  out.put_bytes("RIFF");
  out.put<std::uint32_t>(36 + data_bytes);
  out.put_bytes("WAVE");
  out.put_bytes("fmt ");
  out.put<std::uint32_t>(16);
  out.put<std::uint16_t>(1);
  out.put<std::uint16_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(buf.sample_rate));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(buf.sample_rate) * 2);
  out.put<std::uint16_t>(2);
  out.put<std::uint16_t>(16);
  out.put_bytes("data");
  out.put<std::uint32_t>(data_bytes);

  std::size_t clamped = 0;
  for (double s : buf.samples) {
    if (!std::isfinite(s)) {
      ++clamped;
      s = 0.0;
    } else if (s > 1.0 || s < -1.0) {
      ++clamped;
    }
    out.put<std::int16_t>(quantize_pcm16(s));
  }
  bytes::write_file(path, out.buffer());
  return clamped;
}

}  // namespace gridunits
