// Copyright 2026 The gridunits Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Brute-force edit-distance oracle for WER counts.
//
// Every alignment path to cell (i, j) has D - I = i - j, and an optimal one
// has S + D + I = cost(i, j), so the (S, D, I) triples reachable by minimal
// alignments are fixed by S alone; each cell keeps a bitmask of reachable S.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace gridunits::test {

struct WerOracle {
  static constexpr std::size_t kMax = 16;

  std::size_t cost = 0;
  std::uint32_t substitution_mask = 0;  // bit s set: some optimal alignment has S = s

  // True when (S, D, I) belongs to some minimal-cost alignment of lengths n, m.
  bool admits(std::size_t s, std::size_t d, std::size_t i, std::size_t n, std::size_t m) const {
    if (s + d + i != cost) return false;
    if (static_cast<long>(d) - static_cast<long>(i) != static_cast<long>(n) - static_cast<long>(m)) return false;
    return s < 32 && ((substitution_mask >> s) & 1u);
  }
};

template <typename Token>
WerOracle wer_oracle(const Token* r, std::size_t n, const Token* h, std::size_t m) {
  std::size_t cost[WerOracle::kMax + 1][WerOracle::kMax + 1];
  std::uint32_t mask[WerOracle::kMax + 1][WerOracle::kMax + 1];
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      if (i == 0 && j == 0) {
        cost[0][0] = 0;
        mask[0][0] = 1u;
        continue;
      }
      std::size_t best = SIZE_MAX;
      const std::size_t sub = (i && j) ? (r[i - 1] == h[j - 1] ? 0 : 1) : 0;
      if (i && j) best = std::min(best, cost[i - 1][j - 1] + sub);
      if (i) best = std::min(best, cost[i - 1][j] + 1);
      if (j) best = std::min(best, cost[i][j - 1] + 1);
      std::uint32_t bits = 0;
      if (i && j && cost[i - 1][j - 1] + sub == best) bits |= mask[i - 1][j - 1] << sub;
      if (i && cost[i - 1][j] + 1 == best) bits |= mask[i - 1][j];
      if (j && cost[i][j - 1] + 1 == best) bits |= mask[i][j - 1];
      cost[i][j] = best;
      mask[i][j] = bits;
    }
  }
  return {cost[n][m], mask[n][m]};
}

// Steps s to the next restricted-growth string over at most `symbols` values
// (s[0] == 0, each entry at most one above the running maximum). Returns false
// after the last one.
inline bool next_restricted_growth(std::vector<int>& s, int symbols) {
  std::vector<int> prefix_max(s.size(), 0);
  for (std::size_t k = 1; k < s.size(); ++k) prefix_max[k] = std::max(prefix_max[k - 1], s[k - 1]);
  for (std::size_t i = s.size(); i-- > 1;) {
    if (s[i] <= prefix_max[i] && s[i] + 1 < symbols) {
      ++s[i];
      std::fill(s.begin() + static_cast<std::ptrdiff_t>(i) + 1, s.end(), 0);
      return true;
    }
  }
  return false;
}

}  // namespace gridunits::test
