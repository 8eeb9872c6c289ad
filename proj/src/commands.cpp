#include "ctcsim/commands.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "ctcsim/align.hpp"
#include "ctcsim/ctc_ops.hpp"
#include "ctcsim/io_util.hpp"

namespace ctcsim {

std::vector<Transcript> read_transcripts(const std::string& path,
                                         const Vocab& vocab) {
  std::istringstream in(read_text_file(path));
  std::vector<Transcript> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Transcript t;
    std::istringstream ls(line);
    int id;
    while (ls >> id) {
      t.tokens.push_back(id);
    }
    if (!ls.eof()) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": non-numeric token");
    }
    t.validate(vocab);
    out.push_back(std::move(t));
  }
  if (out.empty()) {
    throw DataError("corpus file contains no transcripts: " + path);
  }
  return out;
}

void write_transcripts(const std::string& path,
                       const std::vector<Transcript>& corpus) {
  std::string text;
  for (const auto& t : corpus) {
    for (size_t i = 0; i < t.tokens.size(); ++i) {
      if (i) text += ' ';
      text += std::to_string(t.tokens[i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::vector<Transcript> gen_corpus(const RunConfig& cfg) {
  const Vocab vocab = cfg.vocab();
  const int size = cfg.get_int("cli.gen_size");
  const int len_min = cfg.get_int("cli.gen_len_min");
  const int len_max = cfg.get_int("cli.gen_len_max");
  if (size < 1) {
    throw UsageError("cli.gen_size must be >= 1");
  }
  if (len_min < 1 || len_min > len_max) {
    throw UsageError("corpus length range must satisfy 1 <= min <= max");
  }
  const SeedSpec seed = cfg.seed_spec();
  std::vector<Transcript> corpus(size);
  for (int u = 0; u < size; ++u) {
    Rng rng = Rng::derive(seed, Stream::kCorpusGen, static_cast<uint64_t>(u));
    const int len = rng.uniform_int(len_min, len_max);
    corpus[u].tokens.resize(len);
    for (int i = 0; i < len; ++i) {
      corpus[u].tokens[i] = rng.uniform_int(1, vocab.size - 1);
    }
  }
  return corpus;
}

TrainSet make_train_set(const LoadedCorpus& corpus) {
  TrainSet set;
  set.reserve(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    TrainSample s;
    s.transcript.tokens = corpus.record(i).tokens;
    s.code = corpus.record(i).code;
    s.target = corpus.masked(i);
    set.push_back(std::move(s));
  }
  return set;
}

namespace {

constexpr char kPosteriorMagic[9] = "CTCSIMPO";

}  // namespace

void save_posterior(const std::string& path, const PosteriorSeq& p) {
  ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kPosteriorMagic), 8});
  w.u32(1);
  w.u32(static_cast<uint32_t>(p.frames()));
  w.u32(static_cast<uint32_t>(p.vocab()));
  std::vector<float> data(p.data().size());
  for (size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<float>(p.data()[i]);
  }
  const auto* bytes = reinterpret_cast<const uint8_t*>(data.data());
  const size_t nbytes = data.size() * sizeof(float);
  w.bytes({bytes, nbytes});
  w.u64(fnv1a64({bytes, nbytes}));
  write_file(path, w.data());
}

PosteriorSeq load_posterior(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  const auto magic = r.raw(8);
  if (std::memcmp(magic.data(), kPosteriorMagic, 8) != 0) {
    throw DataError("not a posterior file: " + path);
  }
  if (r.u32() != 1) {
    throw DataError("unsupported posterior file version");
  }
  const int frames = static_cast<int>(r.u32());
  const int vocab = static_cast<int>(r.u32());
  const size_t nbytes = static_cast<size_t>(frames) * vocab * sizeof(float);
  const auto raw = r.raw(nbytes);
  if (fnv1a64(raw) != r.u64()) {
    throw DataError("checksum failure in posterior file: " + path);
  }
  PosteriorSeq p(frames, vocab);
  const float* data = reinterpret_cast<const float*>(raw.data());
  for (size_t i = 0; i < p.data().size(); ++i) {
    p.data()[i] = static_cast<double>(data[i]);
  }
  return p;
}

int cmd_gen_corpus(const RunConfig& cfg, const GenCorpusArgs& args) {
  if (args.out.empty()) {
    throw UsageError("gen-corpus requires --out");
  }
  const auto corpus = gen_corpus(cfg);
  write_transcripts(args.out, corpus);
  write_config_snapshot(cfg, args.out);
  std::printf("wrote %zu transcripts to %s\n", corpus.size(),
              args.out.c_str());
  return 0;
}

int cmd_build_data(const RunConfig& cfg, const BuildDataArgs& args) {
  if (args.corpus.empty()) {
    throw UsageError("build-data requires --corpus");
  }
  if (!args.dry_run && (args.manifest.empty() || args.blob.empty())) {
    throw UsageError("build-data requires --manifest and --blob");
  }
  const Vocab vocab = cfg.vocab();
  const auto corpus = read_transcripts(args.corpus, vocab);
  const auto scheme = cfg.scheme();
  BuildSummary summary;
  if (args.dry_run) {
    summary = plan_dataset(corpus, vocab, cfg.teacher(), scheme, cfg.t_train(),
                           cfg.seed_spec(), cfg.workers());
  } else {
    summary = build_dataset(corpus, vocab, cfg.teacher(), scheme,
                            cfg.t_train(), cfg.seed_spec(), args.manifest,
                            args.blob, cfg.workers());
    write_config_snapshot(cfg, args.manifest);
  }
  std::printf("%s%lld tuples from %lld (utterance, variant) pairs\n",
              args.dry_run ? "[dry run] planned " : "stored ",
              static_cast<long long>(summary.accepted),
              static_cast<long long>(summary.total));
  for (size_t k = 0; k < summary.per_bin.size(); ++k) {
    std::printf("  bin %zu [%s, %s]: %lld\n", k + 1,
                format_double(scheme.bins[k].lo).c_str(),
                format_double(scheme.bins[k].hi).c_str(),
                static_cast<long long>(summary.per_bin[k]));
    if (summary.per_bin[k] == 0) {
      std::printf("  warning: bin %zu received no tuples\n", k + 1);
    }
  }
  std::printf("  rejected (gap WER): %lld, truncated: %lld\n",
              static_cast<long long>(summary.rejected),
              static_cast<long long>(summary.truncated));
  return 0;
}

std::string loss_trace_csv(const std::vector<EpochStats>& trace) {
  std::string out = "epoch,loss,ce,stop\n";
  for (const auto& e : trace) {
    out += std::to_string(e.epoch) + "," + format_double(e.loss) + "," +
           format_double(e.ce) + "," + format_double(e.stop) + "\n";
  }
  return out;
}

int cmd_train(const RunConfig& cfg, const TrainArgs& args) {
  if (args.manifest.empty() || args.checkpoint_out.empty()) {
    throw UsageError("train requires --data and --out");
  }
  const auto corpus = load_dataset(args.manifest);
  const auto data = make_train_set(corpus);
  const SimArch arch = cfg.arch();
  if (arch.vocab_size != corpus.header().vocab_size ||
      arch.max_t != corpus.header().t_train) {
    throw DataError("configured arch does not match the dataset header");
  }
  const TrainConfig tcfg = cfg.train_config();

  TrainState resume_state;
  const TrainState* resume = nullptr;
  if (!args.resume.empty()) {
    resume_state = load_checkpoint(args.resume);
    resume = &resume_state;
  }
  const TrainState state = train(data, arch, tcfg, resume);
  save_checkpoint(args.checkpoint_out, state);
  write_config_snapshot(cfg, args.checkpoint_out);
  if (!args.trace_out.empty()) {
    write_text_file(args.trace_out, loss_trace_csv(state.trace));
  }
  for (const auto& e : state.trace) {
    std::printf("epoch %d: loss %.6f (ce %.6f, stop %.6f)\n", e.epoch, e.loss,
                e.ce, e.stop);
  }
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const SimulateArgs& args) {
  if (args.checkpoint.empty()) {
    throw UsageError("simulate requires --ckpt");
  }
  const TrainState state = load_checkpoint(args.checkpoint);
  Vocab vocab;
  vocab.size = state.params.arch.vocab_size;
  vocab.blank_id = 0;

  Transcript y;
  if (!args.tokens.empty()) {
    std::istringstream in(args.tokens);
    int id;
    while (in >> id) {
      y.tokens.push_back(id);
    }
    if (!in.eof()) {
      throw UsageError("--tokens must be space-separated integers");
    }
  } else if (!args.corpus.empty()) {
    const auto corpus = read_transcripts(args.corpus, vocab);
    if (args.index < 0 || args.index >= static_cast<int>(corpus.size())) {
      throw UsageError("--index out of range for corpus of size " +
                       std::to_string(corpus.size()));
    }
    y = corpus[args.index];
  } else {
    throw UsageError("simulate requires --tokens or --corpus/--index");
  }
  y.validate(vocab);

  const PosteriorSeq sim =
      simulate(y, args.code, state.params, state.params.arch.max_t);
  const auto check = validate_posterior_seq(sim, 1e-6);
  if (!check.ok) {
    throw NumericalError("simulated posterior failed validation at frame " +
                         std::to_string(check.frame) + ": " + check.what);
  }
  const auto hyp = greedy_decode(sim, vocab.blank_id);
  const double realized = wer(edit_align(y.tokens, hyp));

  if (!args.out.empty()) {
    save_posterior(args.out, sim);
    write_config_snapshot(cfg, args.out);
  }
  std::string hyp_text;
  for (size_t i = 0; i < hyp.size(); ++i) {
    if (i) hyp_text += ' ';
    hyp_text += std::to_string(hyp[i]);
  }
  std::printf("frames: %d\nhypothesis: %s\nwer: %s\n", sim.frames(),
              hyp_text.c_str(), format_double(realized).c_str());
  return 0;
}

int cmd_eval_fidelity(const RunConfig& cfg, const EvalFidelityArgs& args) {
  if (args.manifest.empty() || args.checkpoint.empty() ||
      args.out_dir.empty()) {
    throw UsageError("eval-fidelity requires --data, --ckpt and --out-dir");
  }
  const auto corpus = load_dataset(args.manifest);
  const TrainState state = load_checkpoint(args.checkpoint);
  Vocab vocab;
  vocab.size = corpus.header().vocab_size;
  vocab.blank_id = corpus.header().blank_id;

  const CompareReport report =
      compare_report(corpus, vocab, cfg.cps(), state.params, cfg.seed_spec(),
                     cfg.workers());
  std::filesystem::create_directories(args.out_dir);
  const auto dir = std::filesystem::path(args.out_dir);
  write_text_file((dir / "fidelity.csv").string(), fidelity_csv(report));
  write_text_file((dir / "fidelity_long.csv").string(),
                  fidelity_long_csv(report));
  write_text_file((dir / "fidelity_records.jsonl").string(),
                  fidelity_records_jsonl(report));
  write_config_snapshot(cfg, (dir / "fidelity.csv").string());
  std::fputs(fidelity_csv(report).c_str(), stdout);
  return 0;
}

int cmd_eval_control(const RunConfig& cfg, const EvalControlArgs& args) {
  if (args.checkpoint.empty() || args.corpus.empty() || args.out_dir.empty()) {
    throw UsageError("eval-control requires --ckpt, --corpus and --out-dir");
  }
  const TrainState state = load_checkpoint(args.checkpoint);
  Vocab vocab;
  vocab.size = state.params.arch.vocab_size;
  vocab.blank_id = 0;
  const auto held_out = read_transcripts(args.corpus, vocab);
  const auto scheme = cfg.scheme();
  if (scheme.count() != state.params.arch.code_count) {
    throw DataError("bin scheme size does not match the checkpoint code count");
  }

  const ControlResult result = controllability_eval(
      state.params, held_out, vocab, scheme, args.samples_per_bin,
      state.params.arch.max_t, cfg.workers());
  std::filesystem::create_directories(args.out_dir);
  const auto dir = std::filesystem::path(args.out_dir);
  write_text_file((dir / "control_records.csv").string(),
                  control_records_csv(result));
  write_text_file((dir / "control_summary.csv").string(),
                  control_summary_csv(result));
  write_config_snapshot(cfg, (dir / "control_summary.csv").string());
  std::fputs(control_summary_csv(result).c_str(), stdout);
  return 0;
}

}  // namespace ctcsim
