// Parametric noisy-channel oracle standing in for a teacher ASR system plus
// acoustic augmentation. Generates CTC-like posterior sequences from text
// whose realized WER rises with a noise level eta.
#pragma once

#include <vector>

#include "ctcsim/core.hpp"

namespace ctcsim {

struct EtaRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct TeacherConfig {
  double eta = 0.0;        // noise level used when eta_strata is empty
  int dur_min = 1;         // frames per token
  int dur_max = 3;
  double blank_gap_prob = 0.5;   // blank frame between tokens
  std::vector<double> confusion;  // V x V row-stochastic, row-major
  double peak_lo = 0.75;   // per-frame mass on the emitted label
  double peak_hi = 0.95;
  int variants = 7;        // J, augmented variants per utterance
  double q_del = 0.5;      // deletion prob scale: P(del) = eta * q_del
  double q_ins = 0.5;      // insertion prob scale: P(ins) = eta * q_ins
  // Per-variant eta strata, cycled j % size; keeps every WER bin populated.
  std::vector<EtaRange> eta_strata;

  void validate(const Vocab& vocab) const;
};

/// Banded confusion matrix: tokens near each other in id space receive
/// elevated confusion mass, blank is never a confusion target.
std::vector<double> banded_confusion(const Vocab& vocab, int band = 4,
                                     double decay = 2.0);

/// Config with banded confusion and eta strata matched to the default
/// low/medium/high WER bins.
TeacherConfig default_teacher_config(const Vocab& vocab);

/// Emits acoustic-like posteriors for one utterance at noise level eta.
/// Per token: skip with prob eta*q_del; else sample the emitted label from
/// (1-eta)*delta_token + eta*confusion[token] and emit d ~ U[dur_min,dur_max]
/// frames with mass p ~ U[peak_lo,peak_hi] on the label, half of the rest on
/// blank and half spread over the confusion row. Spurious token groups are
/// inserted with prob eta*q_ins; blank gap frames are interleaved between
/// groups with blank_gap_prob and forced between equal-label groups so that
/// eta=0 always greedy-decodes back to the transcript.
PosteriorSeq synth_posteriors(const Transcript& y, const Vocab& vocab,
                              const TeacherConfig& cfg, double eta, Rng& rng);

struct TeacherVariant {
  PosteriorSeq posterior;
  std::vector<int> hypothesis;  // greedy decode of `posterior`
  double realized_wer = 0.0;    // percent vs. the source transcript
  double eta = 0.0;
};

/// Runs `cfg.variants` stratified-eta variants for one utterance. Streams are
/// derived per (utterance, variant) so results are independent of processing
/// order.
std::vector<TeacherVariant> teach(const Transcript& y, const Vocab& vocab,
                                  const TeacherConfig& cfg,
                                  const SeedSpec& seed, uint64_t utt_index);

}  // namespace ctcsim
