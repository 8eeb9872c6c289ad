// Shared domain types for the CTC posterior simulation toolkit: vocabulary,
// transcripts, posterior sequences, WER bin schemes, and seeded randomness.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctcsim {

// Error taxonomy mirrored by the CLI exit codes (usage=1, data=2, numeric=3).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Token vocabulary. Index 0 is the CTC blank everywhere in the toolkit.
struct Vocab {
  int size = 0;  // V, includes blank
  int blank_id = 0;
  std::vector<std::string> token_labels;  // optional display names

  void validate() const;
};

/// A token sequence y_1..y_U. Never contains blank; never empty.
struct Transcript {
  std::vector<int> tokens;

  int length() const { return static_cast<int>(tokens.size()); }
  void validate(const Vocab& vocab) const;
};

using PosteriorFrame = std::vector<double>;

/// T x V row-major matrix of per-frame distributions over the vocabulary.
class PosteriorSeq {
 public:
  PosteriorSeq() = default;
  PosteriorSeq(int frames, int vocab)
      : frames_(frames), vocab_(vocab),
        data_(static_cast<size_t>(frames) * vocab, 0.0) {}

  int frames() const { return frames_; }
  int vocab() const { return vocab_; }
  bool empty() const { return frames_ == 0; }

  std::span<double> frame(int t) {
    return {data_.data() + static_cast<size_t>(t) * vocab_,
            static_cast<size_t>(vocab_)};
  }
  std::span<const double> frame(int t) const {
    return {data_.data() + static_cast<size_t>(t) * vocab_,
            static_cast<size_t>(vocab_)};
  }
  double& at(int t, int v) { return data_[static_cast<size_t>(t) * vocab_ + v]; }
  double at(int t, int v) const {
    return data_[static_cast<size_t>(t) * vocab_ + v];
  }

  void append(std::span<const double> frame);
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  int frames_ = 0;
  int vocab_ = 0;
  std::vector<double> data_;
};

/// PosteriorSeq padded to a fixed horizon with a prefix validity mask.
/// Frames at masked-out positions are one-hot on blank.
struct MaskedPosteriorSeq {
  PosteriorSeq padded;
  std::vector<uint8_t> mask;  // prefix mask: all 1s precede all 0s
  int valid_len = 0;

  int horizon() const { return padded.frames(); }
  void validate(int blank_id) const;
};

/// One WER interval in percent, boundaries inclusive.
struct WerBin {
  double lo = 0.0;
  double hi = 0.0;
};

/// K disjoint WER intervals; bin codes are 1-based indices into `bins`.
struct WerBinScheme {
  std::vector<WerBin> bins;

  int count() const { return static_cast<int>(bins.size()); }
  void validate() const;
  std::string to_string() const;               // "0:6,10:40,50:150"
  static WerBinScheme parse(const std::string& text);
  static WerBinScheme default_scheme();        // low/medium/high
};

/// One training record: transcript, bin code, teacher posteriors, audit WER.
struct SupervisionTuple {
  Transcript transcript;
  int code = 0;  // 1-based bin index
  PosteriorSeq teacher;
  double realized_wer = 0.0;  // percent, recorded for audit
};

struct PosteriorValidation {
  bool ok = true;
  int frame = -1;
  std::string what;
};

/// Checks every frame for entries in [0,1] and sums within `tol` of 1.
/// Reports the first violating frame; empty sequences are vacuously ok.
PosteriorValidation validate_posterior_seq(const PosteriorSeq& p, double tol);

/// Frame with probability 1 at `token`, 0 elsewhere.
PosteriorFrame one_hot(int token, int vocab_size);

// ---------------------------------------------------------------------------
// Seeded randomness.
//
// Stream derivation is splittable and order-independent: the stream for an
// item is seed = mix(global_seed, stream_tag, a, b) where mix chains
// splitmix64 over the inputs, and the generator state is filled from further
// splitmix64 outputs. Identical (global_seed, tag, a, b) always yields a
// bit-identical stream, no matter in which order items are processed.
// ---------------------------------------------------------------------------

enum class Stream : uint64_t {
  kCorpusGen = 1,
  kTeacher = 2,
  kCps = 3,
  kParamInit = 4,
  kShuffle = 5,
  kTest = 6,
};

struct SeedSpec {
  uint64_t global_seed = 0;
};

uint64_t splitmix64(uint64_t& state);

/// xoshiro256++ with hand-rolled distributions so streams are identical
/// across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  static Rng derive(const SeedSpec& spec, Stream tag, uint64_t a = 0,
                    uint64_t b = 0);

  uint64_t next();
  double uniform();                          // [0, 1)
  double uniform(double lo, double hi);      // [lo, hi)
  uint64_t bounded(uint64_t n);              // [0, n)
  int uniform_int(int lo, int hi);           // [lo, hi] inclusive
  bool bernoulli(double p) { return uniform() < p; }
  /// Samples an index from non-negative weights summing to ~1.
  int categorical(std::span<const double> weights);

 private:
  uint64_t s_[4];
};

}  // namespace ctcsim
