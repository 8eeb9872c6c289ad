#include "ctcsim/cps.hpp"

namespace ctcsim {

void CpsConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (p < 0.0 || p > 1.0) {
      throw DataError(std::string(name) + " must lie in [0, 1]");
    }
  };
  prob(p_del, "cps p_del");
  prob(p_ins, "cps p_ins");
  prob(ins_blank_frac, "cps ins_blank_frac");
  if (!(alpha_lo > 0.0 && alpha_lo <= alpha_hi && alpha_hi <= 1.0)) {
    throw DataError("cps alpha range must satisfy 0 < lo <= hi <= 1");
  }
}

namespace {

PosteriorFrame smoothed(int token, int vocab_size, double alpha) {
  PosteriorFrame f(vocab_size, (1.0 - alpha) / vocab_size);
  f[token] += alpha;
  return f;
}

}  // namespace

PosteriorSeq cps_simulate(const Transcript& y, const Vocab& vocab,
                          const CpsConfig& cfg, Rng& rng) {
  cfg.validate();
  y.validate(vocab);
  PosteriorSeq out(0, vocab.size);
  for (int token : y.tokens) {
    if (rng.bernoulli(cfg.p_del)) {
      continue;
    }
    const double alpha = rng.uniform(cfg.alpha_lo, cfg.alpha_hi);
    const PosteriorFrame frame = smoothed(token, vocab.size, alpha);
    out.append(frame);
    if (rng.bernoulli(cfg.p_ins)) {
      if (rng.bernoulli(cfg.ins_blank_frac)) {
        const double a = rng.uniform(cfg.alpha_lo, cfg.alpha_hi);
        out.append(smoothed(vocab.blank_id, vocab.size, a));
      } else {
        out.append(frame);  // duplicate of the already-smoothed neighbor
      }
    }
  }
  return out;
}

}  // namespace ctcsim
