// Builds, persists, and loads the WER-conditioned supervision corpus: a text
// manifest (one structured key-value record per line) plus a binary blob of
// little-endian float32 posterior frames with per-record checksums.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctcsim/core.hpp"
#include "ctcsim/teacher.hpp"

namespace ctcsim {

struct CorpusHeader {
  int format_version = 1;
  int vocab_size = 0;
  int blank_id = 0;
  int t_train = 0;
  WerBinScheme scheme;
  uint64_t global_seed = 0;
  std::string blob_name;  // blob filename relative to the manifest
};

struct CorpusRecord {
  int64_t utt = 0;
  int64_t variant = 0;
  int code = 0;           // 1-based bin index
  double realized_wer = 0.0;
  int64_t frames = 0;
  int64_t offset = 0;     // byte offset into the blob
  uint64_t checksum = 0;  // fnv1a64 of the record's blob bytes
  std::vector<int> tokens;
};

struct BuildSummary {
  std::vector<int64_t> per_bin;  // accepted tuples per bin, 1-based bins
  int64_t accepted = 0;
  int64_t rejected = 0;   // realized WER fell outside every bin
  int64_t truncated = 0;  // posteriors cut to the training horizon
  int64_t total = 0;      // utterances x variants
};

/// Runs the teacher over every (utterance, variant), assigns bin codes,
/// discards gap-WER samples, and persists accepted tuples sorted by
/// (utterance, variant). Parallelizes over utterances; output is identical
/// for any worker count.
BuildSummary build_dataset(const std::vector<Transcript>& corpus,
                           const Vocab& vocab, const TeacherConfig& teacher_cfg,
                           const WerBinScheme& scheme, int t_train,
                           const SeedSpec& seed,
                           const std::string& manifest_path,
                           const std::string& blob_path, int workers = 1);

/// Same computation and counts as build_dataset but writes nothing.
BuildSummary plan_dataset(const std::vector<Transcript>& corpus,
                          const Vocab& vocab, const TeacherConfig& teacher_cfg,
                          const WerBinScheme& scheme, int t_train,
                          const SeedSpec& seed, int workers = 1);

/// Pads with blank one-hot frames up to t_train (prefix mask), or truncates
/// to t_train with a full mask, bumping *truncation_counter when given.
MaskedPosteriorSeq pad_and_mask(const PosteriorSeq& p, int t_train,
                                int blank_id,
                                int64_t* truncation_counter = nullptr);

/// Read-only view of a persisted corpus; all accessors are const and
/// shareable across threads.
class LoadedCorpus {
 public:
  const CorpusHeader& header() const { return header_; }
  size_t size() const { return records_.size(); }
  const CorpusRecord& record(size_t i) const { return records_[i]; }

  /// Stored teacher posterior (float32 values widened to double).
  PosteriorSeq posterior(size_t i) const;
  SupervisionTuple tuple(size_t i) const;
  MaskedPosteriorSeq masked(size_t i) const;

 private:
  friend LoadedCorpus load_dataset(const std::string& manifest_path);
  CorpusHeader header_;
  std::vector<CorpusRecord> records_;
  std::vector<float> blob_;
};

/// Verifies format version, offsets, checksums, and bin validity; throws
/// DataError on any mismatch. load(build(X)) reproduces tuples bit-exactly.
LoadedCorpus load_dataset(const std::string& manifest_path);

}  // namespace ctcsim
