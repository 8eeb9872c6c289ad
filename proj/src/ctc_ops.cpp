#include "ctcsim/ctc_ops.hpp"

#include <string>

namespace ctcsim {

void LsdConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw DataError("lsd tau must lie in (0, 1], got " + std::to_string(tau));
  }
}

int argmax_frame(std::span<const double> frame) {
  int best = 0;
  for (int v = 1; v < static_cast<int>(frame.size()); ++v) {
    if (frame[v] > frame[best]) {
      best = v;
    }
  }
  return best;
}

std::vector<int> argmax_labels(const PosteriorSeq& p) {
  std::vector<int> labels(p.frames());
  for (int t = 0; t < p.frames(); ++t) {
    labels[t] = argmax_frame(p.frame(t));
  }
  return labels;
}

std::vector<int> collapse(const std::vector<int>& labels, int blank_id) {
  std::vector<int> out;
  int prev = -1;
  for (int l : labels) {
    if (l != prev && l != blank_id) {
      out.push_back(l);
    }
    prev = l;
  }
  return out;
}

std::vector<int> greedy_decode(const PosteriorSeq& p, int blank_id) {
  return collapse(argmax_labels(p), blank_id);
}

PosteriorSeq lsd_compress(const PosteriorSeq& p, const LsdConfig& cfg,
                          int blank_id) {
  cfg.validate();
  std::vector<int> kept;
  kept.reserve(p.frames());
  for (int t = 0; t < p.frames(); ++t) {
    if (p.frame(t)[blank_id] > cfg.tau) {
      continue;
    }
    kept.push_back(t);
  }

  PosteriorSeq out(0, p.vocab());
  std::vector<double> mean(p.vocab());
  size_t i = 0;
  while (i < kept.size()) {
    const int label = argmax_frame(p.frame(kept[i]));
    size_t j = i;
    while (j + 1 < kept.size() &&
           argmax_frame(p.frame(kept[j + 1])) == label) {
      ++j;
    }
    const double inv = 1.0 / static_cast<double>(j - i + 1);
    for (int v = 0; v < p.vocab(); ++v) {
      double sum = 0.0;
      for (size_t k = i; k <= j; ++k) {
        sum += p.at(kept[k], v);
      }
      mean[v] = sum * inv;
    }
    out.append(mean);
    i = j + 1;
  }
  return out;
}

}  // namespace ctcsim
