#include "ctcsim/dataset.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "ctcsim/align.hpp"
#include "ctcsim/io_util.hpp"
#include "ctcsim/parallel.hpp"

namespace ctcsim {

namespace {

constexpr int kFormatVersion = 1;

struct PendingRecord {
  int64_t utt = 0;
  int64_t variant = 0;
  int code = 0;
  double realized_wer = 0.0;
  std::vector<float> frames;  // frame-major f32, quantized storage form
  std::vector<int> tokens;
  bool truncated = false;
};

std::vector<float> quantize_frames(const PosteriorSeq& p, int t_train,
                                   bool* truncated) {
  const int keep = std::min(p.frames(), t_train);
  *truncated = p.frames() > t_train;
  std::vector<float> out(static_cast<size_t>(keep) * p.vocab());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(p.data()[i]);
  }
  return out;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) {
    throw DataError("bad checksum field: " + s);
  }
  return std::stoull(s, nullptr, 16);
}

}  // namespace

MaskedPosteriorSeq pad_and_mask(const PosteriorSeq& p, int t_train,
                                int blank_id, int64_t* truncation_counter) {
  if (t_train < 1) {
    throw DataError("t_train must be >= 1");
  }
  MaskedPosteriorSeq out;
  const int v = p.vocab();
  out.padded = PosteriorSeq(t_train, v);
  out.mask.assign(t_train, 0);
  const int keep = std::min(p.frames(), t_train);
  if (p.frames() > t_train && truncation_counter != nullptr) {
    ++*truncation_counter;
  }
  for (int t = 0; t < keep; ++t) {
    const auto src = p.frame(t);
    std::copy(src.begin(), src.end(), out.padded.frame(t).begin());
    out.mask[t] = 1;
  }
  for (int t = keep; t < t_train; ++t) {
    out.padded.at(t, blank_id) = 1.0;
  }
  out.valid_len = keep;
  return out;
}

namespace {

BuildSummary build_impl(const std::vector<Transcript>& corpus,
                        const Vocab& vocab, const TeacherConfig& teacher_cfg,
                        const WerBinScheme& scheme, int t_train,
                        const SeedSpec& seed,
                        const std::string* manifest_path,
                        const std::string* blob_path, int workers) {
  vocab.validate();
  scheme.validate();
  teacher_cfg.validate(vocab);
  if (corpus.empty()) {
    throw DataError("cannot build a dataset from an empty corpus");
  }
  if (t_train < 1) {
    throw DataError("t_train must be >= 1");
  }

  // Per-utterance slots keep output independent of scheduling; the final
  // write iterates in (utterance, variant) order.
  std::vector<std::vector<PendingRecord>> slots(corpus.size());
  parallel_for(static_cast<int64_t>(corpus.size()), workers, [&](int64_t u) {
    const auto variants = teach(corpus[u], vocab, teacher_cfg, seed,
                                static_cast<uint64_t>(u));
    auto& mine = slots[u];
    for (size_t j = 0; j < variants.size(); ++j) {
      const auto& var = variants[j];
      const auto bin = bin_assign(var.realized_wer, scheme);
      PendingRecord rec;
      rec.utt = u;
      rec.variant = static_cast<int64_t>(j);
      rec.code = bin.value_or(0);  // 0 marks rejected
      rec.realized_wer = var.realized_wer;
      if (bin.has_value()) {
        rec.frames = quantize_frames(var.posterior, t_train, &rec.truncated);
        rec.tokens = corpus[u].tokens;
      }
      mine.push_back(std::move(rec));
    }
  });

  BuildSummary summary;
  summary.per_bin.assign(scheme.count(), 0);

  std::vector<uint8_t> blob;
  std::string manifest;
  std::vector<std::string> record_lines;
  int64_t offset = 0;
  for (const auto& utt_slot : slots) {
    for (const auto& rec : utt_slot) {
      ++summary.total;
      if (rec.code == 0) {
        ++summary.rejected;
        continue;
      }
      ++summary.accepted;
      ++summary.per_bin[rec.code - 1];
      if (rec.truncated) {
        ++summary.truncated;
      }
      const auto* bytes = reinterpret_cast<const uint8_t*>(rec.frames.data());
      const size_t nbytes = rec.frames.size() * sizeof(float);
      const uint64_t checksum = fnv1a64({bytes, nbytes});
      std::string line = "record utt=" + std::to_string(rec.utt) +
                         " variant=" + std::to_string(rec.variant) +
                         " code=" + std::to_string(rec.code) +
                         " wer=" + format_double(rec.realized_wer) +
                         " frames=" +
                         std::to_string(rec.frames.size() / vocab.size) +
                         " offset=" + std::to_string(offset) +
                         " checksum=" + hex64(checksum) + " tokens=";
      for (size_t i = 0; i < rec.tokens.size(); ++i) {
        if (i) line += ' ';
        line += std::to_string(rec.tokens[i]);
      }
      record_lines.push_back(std::move(line));
      blob.insert(blob.end(), bytes, bytes + nbytes);
      offset += static_cast<int64_t>(nbytes);
    }
  }

  if (manifest_path == nullptr || blob_path == nullptr) {
    return summary;  // dry run
  }

  const std::string blob_name =
      std::filesystem::path(*blob_path).filename().string();
  manifest += "format_version = " + std::to_string(kFormatVersion) + "\n";
  manifest += "vocab_size = " + std::to_string(vocab.size) + "\n";
  manifest += "blank_id = " + std::to_string(vocab.blank_id) + "\n";
  manifest += "t_train = " + std::to_string(t_train) + "\n";
  manifest += "bins = " + scheme.to_string() + "\n";
  manifest += "global_seed = " + std::to_string(seed.global_seed) + "\n";
  manifest += "blob = " + blob_name + "\n";
  manifest += "records = " + std::to_string(record_lines.size()) + "\n";
  for (const auto& line : record_lines) {
    manifest += line;
    manifest += '\n';
  }

  write_file(*blob_path, blob);
  write_text_file(*manifest_path, manifest);
  return summary;
}

}  // namespace

BuildSummary build_dataset(const std::vector<Transcript>& corpus,
                           const Vocab& vocab, const TeacherConfig& teacher_cfg,
                           const WerBinScheme& scheme, int t_train,
                           const SeedSpec& seed,
                           const std::string& manifest_path,
                           const std::string& blob_path, int workers) {
  return build_impl(corpus, vocab, teacher_cfg, scheme, t_train, seed,
                    &manifest_path, &blob_path, workers);
}

BuildSummary plan_dataset(const std::vector<Transcript>& corpus,
                          const Vocab& vocab, const TeacherConfig& teacher_cfg,
                          const WerBinScheme& scheme, int t_train,
                          const SeedSpec& seed, int workers) {
  return build_impl(corpus, vocab, teacher_cfg, scheme, t_train, seed, nullptr,
                    nullptr, workers);
}

PosteriorSeq LoadedCorpus::posterior(size_t i) const {
  const auto& rec = records_[i];
  PosteriorSeq p(static_cast<int>(rec.frames), header_.vocab_size);
  const size_t base = static_cast<size_t>(rec.offset) / sizeof(float);
  for (size_t k = 0; k < p.data().size(); ++k) {
    p.data()[k] = static_cast<double>(blob_[base + k]);
  }
  return p;
}

SupervisionTuple LoadedCorpus::tuple(size_t i) const {
  const auto& rec = records_[i];
  SupervisionTuple t;
  t.transcript.tokens = rec.tokens;
  t.code = rec.code;
  t.teacher = posterior(i);
  t.realized_wer = rec.realized_wer;
  return t;
}

MaskedPosteriorSeq LoadedCorpus::masked(size_t i) const {
  return pad_and_mask(posterior(i), header_.t_train, header_.blank_id);
}

LoadedCorpus load_dataset(const std::string& manifest_path) {
  const std::string text = read_text_file(manifest_path);
  std::istringstream in(text);
  std::string line;
  LoadedCorpus corpus;
  CorpusHeader& h = corpus.header_;
  int64_t declared_records = -1;

  auto parse_header = [&](const std::string& key, const std::string& value) {
    if (key == "format_version") {
      h.format_version = std::stoi(value);
      if (h.format_version != kFormatVersion) {
        throw DataError("unsupported corpus format version " + value);
      }
    } else if (key == "vocab_size") {
      h.vocab_size = std::stoi(value);
    } else if (key == "blank_id") {
      h.blank_id = std::stoi(value);
    } else if (key == "t_train") {
      h.t_train = std::stoi(value);
    } else if (key == "bins") {
      h.scheme = WerBinScheme::parse(value);
    } else if (key == "global_seed") {
      h.global_seed = std::stoull(value);
    } else if (key == "blob") {
      h.blob_name = value;
    } else if (key == "records") {
      declared_records = std::stoll(value);
    } else {
      throw DataError("unknown manifest key: " + key);
    }
  };

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word != "record") {
      std::string eq, value;
      ls >> eq;
      std::getline(ls, value);
      if (eq != "=") {
        throw DataError("malformed manifest line: " + line);
      }
      if (!value.empty() && value.front() == ' ') {
        value.erase(0, 1);
      }
      parse_header(word, value);
      continue;
    }
    CorpusRecord rec;
    bool in_tokens = false;
    while (ls >> word) {
      if (in_tokens) {
        rec.tokens.push_back(std::stoi(word));
        continue;
      }
      const auto eq = word.find('=');
      if (eq == std::string::npos) {
        throw DataError("malformed record field: " + word);
      }
      const std::string key = word.substr(0, eq);
      const std::string value = word.substr(eq + 1);
      if (key == "utt") {
        rec.utt = std::stoll(value);
      } else if (key == "variant") {
        rec.variant = std::stoll(value);
      } else if (key == "code") {
        rec.code = std::stoi(value);
      } else if (key == "wer") {
        rec.realized_wer = std::stod(value);
      } else if (key == "frames") {
        rec.frames = std::stoll(value);
      } else if (key == "offset") {
        rec.offset = std::stoll(value);
      } else if (key == "checksum") {
        rec.checksum = parse_hex64(value);
      } else if (key == "tokens") {
        in_tokens = true;
        if (!value.empty()) {
          rec.tokens.push_back(std::stoi(value));
        }
      } else {
        throw DataError("unknown record field: " + key);
      }
    }
    corpus.records_.push_back(std::move(rec));
  }

  if (h.vocab_size < 2 || h.t_train < 1 || h.blob_name.empty()) {
    throw DataError("incomplete corpus manifest header");
  }
  if (declared_records !=
      static_cast<int64_t>(corpus.records_.size())) {
    throw DataError("manifest record count mismatch: declared " +
                    std::to_string(declared_records) + ", found " +
                    std::to_string(corpus.records_.size()));
  }

  const auto blob_file =
      (std::filesystem::path(manifest_path).parent_path() / h.blob_name)
          .string();
  const auto blob_bytes = read_file(blob_file);
  if (blob_bytes.size() % sizeof(float) != 0) {
    throw DataError("corpus blob size is not a multiple of 4");
  }
  corpus.blob_.resize(blob_bytes.size() / sizeof(float));
  if (!blob_bytes.empty()) {
    std::memcpy(corpus.blob_.data(), blob_bytes.data(), blob_bytes.size());
  }

  int64_t prev_end = 0;
  for (const auto& rec : corpus.records_) {
    const int64_t nbytes = rec.frames * h.vocab_size *
                           static_cast<int64_t>(sizeof(float));
    if (rec.offset < prev_end) {
      throw DataError("overlapping corpus records at offset " +
                      std::to_string(rec.offset));
    }
    if (rec.offset + nbytes > static_cast<int64_t>(blob_bytes.size())) {
      throw DataError("corpus record at offset " + std::to_string(rec.offset) +
                      " extends past the blob end");
    }
    prev_end = rec.offset + nbytes;
    const uint64_t got =
        fnv1a64({blob_bytes.data() + rec.offset, static_cast<size_t>(nbytes)});
    if (got != rec.checksum) {
      throw DataError("checksum failure for corpus record utt=" +
                      std::to_string(rec.utt) + " variant=" +
                      std::to_string(rec.variant));
    }
    if (rec.code < 1 || rec.code > h.scheme.count()) {
      throw DataError("corpus record bin code " + std::to_string(rec.code) +
                      " invalid under the stored scheme");
    }
    const auto& bin = h.scheme.bins[rec.code - 1];
    if (rec.realized_wer < bin.lo || rec.realized_wer > bin.hi) {
      throw DataError("corpus record WER " + format_double(rec.realized_wer) +
                      " falls outside bin " + std::to_string(rec.code));
    }
    if (rec.tokens.empty()) {
      throw DataError("corpus record with empty transcript");
    }
  }
  return corpus;
}

}  // namespace ctcsim
