#include "ctcsim/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ctcsim/align.hpp"
#include "ctcsim/ctc_ops.hpp"
#include "ctcsim/io_util.hpp"
#include "ctcsim/parallel.hpp"

namespace ctcsim {

namespace {

constexpr double kClamp = 1e-12;

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) {
    return 0.0;
  }
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) {
    return sorted.back();
  }
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

void FidelityAccumulator::add_frame(std::span<const double> teacher,
                                    std::span<const double> simulated) {
  if (teacher.size() != simulated.size()) {
    throw DataError("fidelity frame width mismatch");
  }
  double ce = 0.0;
  double kl = 0.0;
  for (size_t v = 0; v < teacher.size(); ++v) {
    const double p = teacher[v];
    if (p > 0.0) {
      const double logq = std::log(std::max(simulated[v], kClamp));
      ce -= p * logq;
      kl += p * (std::log(p) - logq);
    }
  }
  sum_ce_ += ce;
  sum_kl_ += kl;
  const int at = argmax_frame(teacher);
  const int as = argmax_frame(simulated);
  if (at == as) {
    ++agree_;
  }
  sum_probdiff_ += std::abs(teacher[at] - simulated[as]);
  ++n_;
}

void FidelityAccumulator::add_seq(const PosteriorSeq& teacher,
                                  const PosteriorSeq& simulated) {
  if (teacher.frames() != simulated.frames()) {
    throw DataError("fidelity length mismatch: " +
                    std::to_string(teacher.frames()) + " vs " +
                    std::to_string(simulated.frames()));
  }
  for (int t = 0; t < teacher.frames(); ++t) {
    add_frame(teacher.frame(t), simulated.frame(t));
  }
}

void FidelityAccumulator::merge(const FidelityAccumulator& other) {
  sum_ce_ += other.sum_ce_;
  sum_kl_ += other.sum_kl_;
  sum_probdiff_ += other.sum_probdiff_;
  agree_ += other.agree_;
  n_ += other.n_;
}

FidelityReport FidelityAccumulator::report() const {
  if (n_ < 1) {
    throw DataError("fidelity requires at least one valid frame");
  }
  FidelityReport r;
  r.n = n_;
  const double inv = 1.0 / static_cast<double>(n_);
  r.ce = sum_ce_ * inv;
  r.kl = sum_kl_ * inv;
  r.acc = static_cast<double>(agree_) * inv;
  r.probdiff = sum_probdiff_ * inv;
  return r;
}

FidelityReport fidelity(const PosteriorSeq& teacher,
                        const PosteriorSeq& simulated) {
  FidelityAccumulator acc;
  acc.add_seq(teacher, simulated);
  return acc.report();
}

std::pair<PosteriorSeq, PosteriorSeq> align_for_fidelity(
    const PosteriorSeq& teacher, const PosteriorSeq& simulated,
    AlignPolicy policy) {
  if (teacher.empty() || simulated.empty()) {
    throw DataError("align_for_fidelity requires non-empty sequences");
  }
  if (policy == AlignPolicy::kTeacherForced) {
    if (teacher.frames() != simulated.frames()) {
      throw DataError(
          "teacher-forced fidelity expects equal lengths, got " +
          std::to_string(teacher.frames()) + " vs " +
          std::to_string(simulated.frames()));
    }
    return {teacher, simulated};
  }
  const int keep = std::min(teacher.frames(), simulated.frames());
  PosteriorSeq a(0, teacher.vocab());
  PosteriorSeq b(0, simulated.vocab());
  for (int t = 0; t < keep; ++t) {
    a.append(teacher.frame(t));
    b.append(simulated.frame(t));
  }
  return {a, b};
}

double masked_teacher_entropy(const MaskedPosteriorSeq& target) {
  double sum = 0.0;
  int64_t n = 0;
  for (int t = 0; t < target.horizon(); ++t) {
    if (!target.mask[t]) continue;
    double h = 0.0;
    for (double p : target.padded.frame(t)) {
      if (p > 0.0) {
        h -= p * std::log(p);
      }
    }
    sum += h;
    ++n;
  }
  if (n < 1) {
    throw DataError("masked entropy requires at least one valid frame");
  }
  return sum / static_cast<double>(n);
}

ControlResult controllability_eval(const SimulatorParams& params,
                                   const std::vector<Transcript>& held_out,
                                   const Vocab& vocab,
                                   const WerBinScheme& scheme,
                                   int samples_per_bin, int max_t,
                                   int workers) {
  if (held_out.empty()) {
    throw DataError("controllability eval requires a non-empty held-out set");
  }
  const int k = scheme.count();
  const int64_t per_bin =
      std::min<int64_t>(samples_per_bin, static_cast<int64_t>(held_out.size()));
  const int64_t total = per_bin * k;

  ControlResult result;
  result.records.assign(total, {});
  parallel_for(total, workers, [&](int64_t i) {
    const int bin = static_cast<int>(i / per_bin) + 1;
    const int64_t utt = i % per_bin;
    const auto& y = held_out[utt];
    const PosteriorSeq sim = simulate(y, bin, params, max_t);
    const auto hyp = greedy_decode(sim, vocab.blank_id);
    ControlRecord rec;
    rec.bin = bin;
    rec.utterance = utt;
    rec.realized_wer = wer(edit_align(y.tokens, hyp));
    result.records[i] = rec;
  });

  for (int bin = 1; bin <= k; ++bin) {
    std::vector<double> values;
    values.reserve(per_bin);
    for (const auto& rec : result.records) {
      if (rec.bin == bin) {
        values.push_back(rec.realized_wer);
      }
    }
    std::sort(values.begin(), values.end());
    ControlSummary s;
    s.bin = bin;
    s.count = static_cast<int64_t>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    result.summary.push_back(s);
  }
  return result;
}

CompareReport compare_report(const LoadedCorpus& held_out, const Vocab& vocab,
                             const CpsConfig& cps_cfg,
                             const SimulatorParams& params,
                             const SeedSpec& seed, int workers) {
  if (held_out.size() == 0) {
    throw DataError("compare report requires a non-empty held-out corpus");
  }
  const int64_t n = static_cast<int64_t>(held_out.size());
  struct Slot {
    FidelityAccumulator cps;
    FidelityAccumulator sim;
    TupleFidelity cps_tuple;
    TupleFidelity sim_tuple;
  };
  std::vector<Slot> slots(n);
  parallel_for(n, workers, [&](int64_t i) {
    const auto& rec = held_out.record(i);
    Transcript y;
    y.tokens = rec.tokens;
    const PosteriorSeq teacher = held_out.posterior(i);
    const MaskedPosteriorSeq masked = held_out.masked(i);

    // Learned simulator, teacher-forced: frame correspondence by construction.
    const auto tf = forward_teacher_forced(y, rec.code, masked, params);
    PosteriorSeq sim_valid(0, teacher.vocab());
    for (int t = 0; t < masked.valid_len; ++t) {
      sim_valid.append(tf.posterior.frame(t));
    }
    slots[i].sim.add_seq(teacher, sim_valid);
    slots[i].sim_tuple = {"ar_simulator", rec.utt, rec.variant,
                          fidelity(teacher, sim_valid)};

    // Stochastic baseline: no frame correspondence, truncate-aligned.
    Rng rng = Rng::derive(seed, Stream::kCps, static_cast<uint64_t>(rec.utt),
                          static_cast<uint64_t>(rec.variant));
    PosteriorSeq cps = cps_simulate(y, vocab, cps_cfg, rng);
    if (cps.empty()) {
      // All tokens deleted; a single blank frame keeps the pairing defined.
      cps.append(one_hot(vocab.blank_id, vocab.size));
    }
    const auto [ta, ca] =
        align_for_fidelity(teacher, cps, AlignPolicy::kTruncate);
    slots[i].cps.add_seq(ta, ca);
    slots[i].cps_tuple = {"cps_baseline", rec.utt, rec.variant,
                          fidelity(ta, ca)};
  });

  CompareReport report;
  FidelityAccumulator cps_acc;
  FidelityAccumulator sim_acc;
  for (const auto& slot : slots) {
    cps_acc.merge(slot.cps);
    sim_acc.merge(slot.sim);
    report.per_tuple.push_back(slot.cps_tuple);
    report.per_tuple.push_back(slot.sim_tuple);
  }
  report.cps = cps_acc.report();
  report.simulator = sim_acc.report();
  return report;
}

namespace {

std::string fidelity_row(const std::string& system, const FidelityReport& r) {
  return system + "," + format_double(r.ce) + "," + format_double(r.kl) + "," +
         format_double(r.acc) + "," + format_double(r.probdiff) + "," +
         std::to_string(r.n) + "\n";
}

}  // namespace

std::string fidelity_csv(const CompareReport& report) {
  std::string out = "system,ce,kl,acc,probdiff,n\n";
  out += fidelity_row("cps_baseline", report.cps);
  out += fidelity_row("ar_simulator", report.simulator);
  return out;
}

std::string fidelity_long_csv(const CompareReport& report) {
  std::string out = "system,metric,value\n";
  auto rows = [&](const std::string& system, const FidelityReport& r) {
    out += system + ",ce," + format_double(r.ce) + "\n";
    out += system + ",kl," + format_double(r.kl) + "\n";
    out += system + ",acc," + format_double(r.acc) + "\n";
    out += system + ",probdiff," + format_double(r.probdiff) + "\n";
    out += system + ",n," + std::to_string(r.n) + "\n";
  };
  rows("cps_baseline", report.cps);
  rows("ar_simulator", report.simulator);
  return out;
}

std::string fidelity_records_jsonl(const CompareReport& report) {
  std::string out;
  for (const auto& t : report.per_tuple) {
    nlohmann::ordered_json j;
    j["system"] = t.system;
    j["utt"] = t.utt;
    j["variant"] = t.variant;
    j["ce"] = t.metrics.ce;
    j["kl"] = t.metrics.kl;
    j["acc"] = t.metrics.acc;
    j["probdiff"] = t.metrics.probdiff;
    j["n"] = t.metrics.n;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string control_records_csv(const ControlResult& result) {
  std::string out = "bin,utterance_id,realized_wer\n";
  for (const auto& rec : result.records) {
    out += std::to_string(rec.bin) + "," + std::to_string(rec.utterance) +
           "," + format_double(rec.realized_wer) + "\n";
  }
  return out;
}

std::string control_summary_csv(const ControlResult& result) {
  std::string out = "bin,count,mean,median,q1,q3\n";
  for (const auto& s : result.summary) {
    out += std::to_string(s.bin) + "," + std::to_string(s.count) + "," +
           format_double(s.mean) + "," + format_double(s.median) + "," +
           format_double(s.q1) + "," + format_double(s.q3) + "\n";
  }
  return out;
}

}  // namespace ctcsim
