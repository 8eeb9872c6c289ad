// CTC greedy decoding, label collapse, and label-synchronous compression of
// posterior sequences (blank-dominant frame removal + same-label run merging).
#pragma once

#include <span>
#include <vector>

#include "ctcsim/core.hpp"

namespace ctcsim {

struct LsdConfig {
  double tau = 0.6;  // blank-probability drop threshold, (0, 1]

  void validate() const;
};

/// Argmax index of one frame; ties broken by lowest index.
int argmax_frame(std::span<const double> frame);

/// Per-frame argmax labels, length T.
std::vector<int> argmax_labels(const PosteriorSeq& p);

/// Standard CTC collapse: merge consecutive duplicates, then remove blanks.
std::vector<int> collapse(const std::vector<int>& labels, int blank_id);

/// collapse(argmax_labels(p)).
std::vector<int> greedy_decode(const PosteriorSeq& p, int blank_id);

/// Drops every frame whose blank probability exceeds tau, then replaces each
/// maximal run of surviving frames sharing an argmax label by the arithmetic
/// mean of the run. Runs are computed over the surviving subsequence; frames
/// dropped in the first step do not split a run. May return an empty sequence.
PosteriorSeq lsd_compress(const PosteriorSeq& p, const LsdConfig& cfg,
                          int blank_id);

}  // namespace ctcsim
