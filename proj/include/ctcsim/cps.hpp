// Uncontrolled stochastic CTC posterior simulation: per-token label-smoothed
// frames with random deletions and insertions. Serves as the comparison
// baseline for the learned simulator.
#pragma once

#include "ctcsim/core.hpp"

namespace ctcsim {

struct CpsConfig {
  double alpha_lo = 0.6;   // per-frame smoothing draw range
  double alpha_hi = 0.95;
  double p_del = 0.05;     // per-token deletion probability
  double p_ins = 0.05;     // per-gap insertion probability
  double ins_blank_frac = 0.5;  // fraction of insertions that are blank frames

  void validate() const;
};

/// For each surviving token emits alpha * one_hot(token) + (1-alpha)/V.
/// Tokens drop independently with p_del; after each emitted position an extra
/// frame is inserted with p_ins (blank-smoothed or a duplicate of the frame
/// just emitted, split by ins_blank_frac). Empty output is possible.
PosteriorSeq cps_simulate(const Transcript& y, const Vocab& vocab,
                          const CpsConfig& cfg, Rng& rng);

}  // namespace ctcsim
