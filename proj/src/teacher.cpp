#include "ctcsim/teacher.hpp"

#include <cmath>
#include <string>

#include "ctcsim/align.hpp"
#include "ctcsim/ctc_ops.hpp"

namespace ctcsim {

void TeacherConfig::validate(const Vocab& vocab) const {
  if (!(dur_min >= 0 && dur_min <= dur_max)) {
    throw DataError("teacher dur range must satisfy 0 <= dur_min <= dur_max");
  }
  if (!(peak_lo > 0.5 && peak_lo <= peak_hi && peak_hi <= 1.0)) {
    throw DataError("teacher peak range must satisfy 0.5 < lo <= hi <= 1");
  }
  if (variants < 1) {
    throw DataError("teacher variants must be >= 1");
  }
  auto prob = [](double p, const char* name) {
    if (p < 0.0 || p > 1.0) {
      throw DataError(std::string(name) + " must lie in [0, 1]");
    }
  };
  prob(blank_gap_prob, "teacher blank_gap_prob");
  prob(q_del, "teacher q_del");
  prob(q_ins, "teacher q_ins");
  prob(eta, "teacher eta");
  for (const auto& s : eta_strata) {
    if (!(s.lo >= 0.0 && s.lo <= s.hi && s.hi <= 1.0)) {
      throw DataError("teacher eta stratum must satisfy 0 <= lo <= hi <= 1");
    }
  }
  const size_t v = static_cast<size_t>(vocab.size);
  if (confusion.size() != v * v) {
    throw DataError("teacher confusion matrix must be V x V");
  }
  for (size_t r = 0; r < v; ++r) {
    double sum = 0.0;
    for (size_t c = 0; c < v; ++c) {
      sum += confusion[r * v + c];
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError("teacher confusion row " + std::to_string(r) +
                      " does not sum to 1");
    }
  }
}

std::vector<double> banded_confusion(const Vocab& vocab, int band,
                                     double decay) {
  const int v = vocab.size;
  std::vector<double> m(static_cast<size_t>(v) * v, 0.0);
  m[static_cast<size_t>(vocab.blank_id) * v + vocab.blank_id] = 1.0;
  for (int r = 0; r < v; ++r) {
    if (r == vocab.blank_id) continue;
    double total = 0.0;
    for (int c = 0; c < v; ++c) {
      if (c == r || c == vocab.blank_id) continue;
      const int dist = std::abs(r - c);
      if (dist > band) continue;
      const double w = std::exp(-static_cast<double>(dist) / decay);
      m[static_cast<size_t>(r) * v + c] = w;
      total += w;
    }
    if (total == 0.0) {
      // Degenerate vocab with no confusable neighbor: identity row.
      m[static_cast<size_t>(r) * v + r] = 1.0;
    } else {
      for (int c = 0; c < v; ++c) {
        m[static_cast<size_t>(r) * v + c] /= total;
      }
    }
  }
  return m;
}

TeacherConfig default_teacher_config(const Vocab& vocab) {
  TeacherConfig cfg;
  cfg.confusion = banded_confusion(vocab);
  // Strata calibrated so realized WER lands inside the default 0-6 / 10-40 /
  // 50-150 bins with high probability.
  cfg.eta_strata = {{0.0, 0.025}, {0.07, 0.17}, {0.35, 0.85}};
  return cfg;
}

namespace {

struct Emitter {
  const Vocab& vocab;
  const TeacherConfig& cfg;
  Rng& rng;
  PosteriorSeq out;
  int last_label = -1;  // label of the previously emitted token group

  explicit Emitter(const Vocab& v, const TeacherConfig& c, Rng& r)
      : vocab(v), cfg(c), rng(r), out(0, v.size) {}

  void blank_gap() {
    const double p = rng.uniform(cfg.peak_lo, cfg.peak_hi);
    PosteriorFrame f(vocab.size, 0.0);
    const int real_tokens = vocab.size - 1;
    for (int v = 0; v < vocab.size; ++v) {
      if (v != vocab.blank_id) {
        f[v] = (1.0 - p) / real_tokens;
      }
    }
    f[vocab.blank_id] = p;
    out.append(f);
  }

  void token_group(int label) {
    if (label == last_label) {
      blank_gap();  // keeps equal adjacent labels decodable as two tokens
    } else if (last_label != -1 && rng.bernoulli(cfg.blank_gap_prob)) {
      blank_gap();
    }
    const int dur = rng.uniform_int(cfg.dur_min, cfg.dur_max);
    const double* row =
        cfg.confusion.data() + static_cast<size_t>(label) * vocab.size;
    for (int d = 0; d < dur; ++d) {
      const double p = rng.uniform(cfg.peak_lo, cfg.peak_hi);
      PosteriorFrame f(vocab.size, 0.0);
      const double rest = (1.0 - p) * 0.5;
      for (int v = 0; v < vocab.size; ++v) {
        f[v] = rest * row[v];
      }
      f[vocab.blank_id] += rest;
      f[label] += p;
      out.append(f);
    }
    if (dur > 0) {
      last_label = label;
    }
  }
};

}  // namespace

PosteriorSeq synth_posteriors(const Transcript& y, const Vocab& vocab,
                              const TeacherConfig& cfg, double eta, Rng& rng) {
  y.validate(vocab);
  cfg.validate(vocab);
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw DataError("teacher eta must lie in [0, 1]");
  }

  Emitter em(vocab, cfg, rng);
  for (int token : y.tokens) {
    if (rng.bernoulli(eta * cfg.q_del)) {
      continue;  // deletion
    }
    int label = token;
    if (rng.bernoulli(eta)) {
      const double* row =
          cfg.confusion.data() + static_cast<size_t>(token) * vocab.size;
      label = rng.categorical({row, static_cast<size_t>(vocab.size)});
    }
    em.token_group(label);
    if (rng.bernoulli(eta * cfg.q_ins)) {
      const int spurious = rng.uniform_int(1, vocab.size - 1);
      em.token_group(spurious);
    }
  }
  return em.out;
}

std::vector<TeacherVariant> teach(const Transcript& y, const Vocab& vocab,
                                  const TeacherConfig& cfg,
                                  const SeedSpec& seed, uint64_t utt_index) {
  std::vector<TeacherVariant> variants;
  variants.reserve(cfg.variants);
  for (int j = 0; j < cfg.variants; ++j) {
    Rng rng = Rng::derive(seed, Stream::kTeacher, utt_index,
                          static_cast<uint64_t>(j));
    EtaRange stratum{cfg.eta, cfg.eta};
    if (!cfg.eta_strata.empty()) {
      stratum = cfg.eta_strata[j % cfg.eta_strata.size()];
    }
    TeacherVariant var;
    var.eta = rng.uniform(stratum.lo, stratum.hi);
    var.posterior = synth_posteriors(y, vocab, cfg, var.eta, rng);
    var.hypothesis = greedy_decode(var.posterior, vocab.blank_id);
    var.realized_wer = wer(edit_align(y.tokens, var.hypothesis));
    variants.push_back(std::move(var));
  }
  return variants;
}

}  // namespace ctcsim
