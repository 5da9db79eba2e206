// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

namespace gridunits {

// Mono signal. Samples are nominally in [-1, 1]; the clamp happens on write.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double seconds() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;
};

}  // namespace gridunits
