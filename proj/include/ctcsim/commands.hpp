// Subcommand implementations shared by the CLI binary and the integration
// tests. Each command reads its inputs, writes its outputs plus a resolved
// config snapshot, and throws UsageError/DataError/NumericalError on failure.
#pragma once

#include <string>
#include <vector>

#include "ctcsim/config.hpp"
#include "ctcsim/dataset.hpp"
#include "ctcsim/eval.hpp"

namespace ctcsim {

// Transcript corpus files: one transcript per line, space-separated token ids.
std::vector<Transcript> read_transcripts(const std::string& path,
                                         const Vocab& vocab);
void write_transcripts(const std::string& path,
                       const std::vector<Transcript>& corpus);

/// Deterministic synthetic corpus: per-utterance derived streams, uniform
/// token ids over [1, V), uniform lengths over [gen_len_min, gen_len_max].
std::vector<Transcript> gen_corpus(const RunConfig& cfg);

TrainSet make_train_set(const LoadedCorpus& corpus);

// Single-posterior binary file (simulate subcommand output).
void save_posterior(const std::string& path, const PosteriorSeq& p);
PosteriorSeq load_posterior(const std::string& path);

struct GenCorpusArgs {
  std::string out;
};
int cmd_gen_corpus(const RunConfig& cfg, const GenCorpusArgs& args);

struct BuildDataArgs {
  std::string corpus;
  std::string manifest;
  std::string blob;
  bool dry_run = false;
};
int cmd_build_data(const RunConfig& cfg, const BuildDataArgs& args);

struct TrainArgs {
  std::string manifest;
  std::string checkpoint_out;
  std::string trace_out;
  std::string resume;  // optional checkpoint to continue from
};
int cmd_train(const RunConfig& cfg, const TrainArgs& args);

struct SimulateArgs {
  std::string checkpoint;
  std::string tokens;  // inline transcript, space-separated ids
  std::string corpus;  // or a corpus file plus index
  int index = 0;
  int code = 1;
  std::string out;  // posterior file
};
int cmd_simulate(const RunConfig& cfg, const SimulateArgs& args);

struct EvalFidelityArgs {
  std::string manifest;  // held-out dataset
  std::string checkpoint;
  std::string out_dir;
};
int cmd_eval_fidelity(const RunConfig& cfg, const EvalFidelityArgs& args);

struct EvalControlArgs {
  std::string checkpoint;
  std::string corpus;  // held-out transcripts
  std::string out_dir;
  int samples_per_bin = 200;
};
int cmd_eval_control(const RunConfig& cfg, const EvalControlArgs& args);

std::string loss_trace_csv(const std::vector<EpochStats>& trace);

}  // namespace ctcsim
