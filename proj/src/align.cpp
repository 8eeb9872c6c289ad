#include "ctcsim/align.hpp"

namespace ctcsim {

AlignmentStats edit_align(const std::vector<int>& ref,
                          const std::vector<int>& hyp) {
  if (ref.empty()) {
    throw DataError("edit_align requires a non-empty reference");
  }
  const int n = static_cast<int>(ref.size());
  const int m = static_cast<int>(hyp.size());
  std::vector<int> cost(static_cast<size_t>(n + 1) * (m + 1));
  auto c = [&](int i, int j) -> int& { return cost[static_cast<size_t>(i) * (m + 1) + j]; };

  for (int i = 0; i <= n; ++i) c(i, 0) = i;
  for (int j = 0; j <= m; ++j) c(0, j) = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      const int diag = c(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1] ? 1 : 0);
      const int del = c(i - 1, j) + 1;
      const int ins = c(i, j - 1) + 1;
      c(i, j) = std::min(diag, std::min(del, ins));
    }
  }

  AlignmentStats stats;
  stats.ref_len = n;
  int i = n;
  int j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        c(i, j) == c(i - 1, j - 1) + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) {
        ++stats.substitutions;
      }
      --i;
      --j;
    } else if (i > 0 && c(i, j) == c(i - 1, j) + 1) {
      ++stats.deletions;
      --i;
    } else {
      ++stats.insertions;
      --j;
    }
  }
  return stats;
}

double wer(const AlignmentStats& stats) {
  if (stats.ref_len < 1) {
    throw DataError("WER undefined for empty reference");
  }
  return 100.0 * static_cast<double>(stats.distance()) /
         static_cast<double>(stats.ref_len);
}

std::optional<int> bin_assign(double wer_pct, const WerBinScheme& scheme) {
  for (size_t k = 0; k < scheme.bins.size(); ++k) {
    const auto& b = scheme.bins[k];
    if (wer_pct >= b.lo && wer_pct <= b.hi) {
      return static_cast<int>(k) + 1;
    }
  }
  return std::nullopt;
}

}  // namespace ctcsim
