// Fidelity metrics between teacher and simulated posteriors (CE / KL / Acc /
// ProbDiff), WER-controllability evaluation across bin codes, and the
// side-by-side baseline comparison report.
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctcsim/core.hpp"
#include "ctcsim/cps.hpp"
#include "ctcsim/dataset.hpp"
#include "ctcsim/simulator.hpp"

namespace ctcsim {

struct FidelityReport {
  double ce = 0.0;
  double kl = 0.0;
  double acc = 0.0;
  double probdiff = 0.0;
  int64_t n = 0;  // valid frames
};

/// Frame-wise accumulator so reports aggregate deterministically in a fixed
/// order across any number of tuples.
class FidelityAccumulator {
 public:
  void add_frame(std::span<const double> teacher,
                 std::span<const double> simulated);
  void add_seq(const PosteriorSeq& teacher, const PosteriorSeq& simulated);
  void merge(const FidelityAccumulator& other);
  FidelityReport report() const;

 private:
  double sum_ce_ = 0.0;
  double sum_kl_ = 0.0;
  double sum_probdiff_ = 0.0;
  int64_t agree_ = 0;
  int64_t n_ = 0;
};

/// Metrics over two frame-aligned sequences of equal length N >= 1. Logs are
/// clamped at 1e-12; 0*log(0/q) counts as 0.
FidelityReport fidelity(const PosteriorSeq& teacher,
                        const PosteriorSeq& simulated);

enum class AlignPolicy {
  kTeacherForced,  // caller produced the simulated frames teacher-forced
  kTruncate,       // compare over the minimum length
};

/// Produces an equal-length pair. Under kTeacherForced the lengths must
/// already match (by construction); under kTruncate both are cut to the
/// shorter one.
std::pair<PosteriorSeq, PosteriorSeq> align_for_fidelity(
    const PosteriorSeq& teacher, const PosteriorSeq& simulated,
    AlignPolicy policy);

/// Mask-averaged teacher entropy (1/sum m) * sum_t m_t * H(p_t); the Gibbs
/// floor of the training CE.
double masked_teacher_entropy(const MaskedPosteriorSeq& target);

struct ControlRecord {
  int bin = 0;
  int64_t utterance = 0;
  double realized_wer = 0.0;
};

struct ControlSummary {
  int bin = 0;
  int64_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct ControlResult {
  std::vector<ControlRecord> records;    // per (bin, utterance)
  std::vector<ControlSummary> summary;   // per bin
};

/// For every bin code and held-out transcript: simulate(y, c), greedy-decode
/// with a fixed decoder, and measure realized WER against y. Generation
/// consumes only (y, c) - no teacher posteriors enter this path.
ControlResult controllability_eval(const SimulatorParams& params,
                                   const std::vector<Transcript>& held_out,
                                   const Vocab& vocab,
                                   const WerBinScheme& scheme,
                                   int samples_per_bin, int max_t,
                                   int workers = 1);

struct TupleFidelity {
  std::string system;
  int64_t utt = 0;
  int64_t variant = 0;
  FidelityReport metrics;
};

struct CompareReport {
  FidelityReport cps;        // stochastic baseline, truncate-aligned
  FidelityReport simulator;  // learned simulator, teacher-forced
  std::vector<TupleFidelity> per_tuple;
};

/// Evaluates the stochastic baseline and the teacher-forced simulator against
/// the same held-out teacher posteriors.
CompareReport compare_report(const LoadedCorpus& held_out, const Vocab& vocab,
                             const CpsConfig& cps_cfg,
                             const SimulatorParams& params,
                             const SeedSpec& seed, int workers = 1);

// Text renderings of the reports (byte-stable across runs).
std::string fidelity_csv(const CompareReport& report);       // one row/system
std::string fidelity_long_csv(const CompareReport& report);  // (system,metric)
std::string fidelity_records_jsonl(const CompareReport& report);
std::string control_records_csv(const ControlResult& result);
std::string control_summary_csv(const ControlResult& result);

}  // namespace ctcsim
