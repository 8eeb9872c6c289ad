// Edit-distance alignment, WER computation, and WER-bin assignment.
#pragma once

#include <optional>
#include <vector>

#include "ctcsim/core.hpp"

namespace ctcsim {

struct AlignmentStats {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_len = 0;

  int distance() const { return substitutions + deletions + insertions; }
};

/// Minimal-cost Levenshtein alignment with unit costs. Backtrace ties are
/// broken substitution/match first, then deletion, then insertion.
AlignmentStats edit_align(const std::vector<int>& ref,
                          const std::vector<int>& hyp);

/// 100 * (S + D + I) / N, in percent. May exceed 100.
double wer(const AlignmentStats& stats);

/// 1-based index of the unique interval containing wer_pct (boundaries
/// inclusive), or nullopt when the value falls in a gap or above the top bin.
std::optional<int> bin_assign(double wer_pct, const WerBinScheme& scheme);

}  // namespace ctcsim
