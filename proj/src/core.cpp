#include "ctcsim/core.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace ctcsim {

void Vocab::validate() const {
  if (size < 2) {
    throw DataError("vocab size must be >= 2 (blank plus one real token), got " +
                    std::to_string(size));
  }
  if (blank_id < 0 || blank_id >= size) {
    throw DataError("blank_id " + std::to_string(blank_id) +
                    " out of range [0, " + std::to_string(size) + ")");
  }
}

void Transcript::validate(const Vocab& vocab) const {
  if (tokens.empty()) {
    throw DataError("transcript must contain at least one token");
  }
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= vocab.size) {
      throw DataError("transcript token " + std::to_string(t) + " at position " +
                      std::to_string(i) + " out of range [0, " +
                      std::to_string(vocab.size) + ")");
    }
    if (t == vocab.blank_id) {
      throw DataError("transcript contains blank token at position " +
                      std::to_string(i));
    }
  }
}

void PosteriorSeq::append(std::span<const double> frame) {
  if (vocab_ == 0) {
    vocab_ = static_cast<int>(frame.size());
  }
  if (static_cast<int>(frame.size()) != vocab_) {
    throw DataError("appending frame of width " + std::to_string(frame.size()) +
                    " to sequence of width " + std::to_string(vocab_));
  }
  data_.insert(data_.end(), frame.begin(), frame.end());
  ++frames_;
}

void MaskedPosteriorSeq::validate(int blank_id) const {
  if (valid_len < 1) {
    throw DataError("masked sequence must have valid_len >= 1");
  }
  if (static_cast<int>(mask.size()) != padded.frames()) {
    throw DataError("mask length does not match padded frame count");
  }
  bool seen_zero = false;
  int ones = 0;
  for (size_t t = 0; t < mask.size(); ++t) {
    if (mask[t] != 0 && mask[t] != 1) {
      throw DataError("mask entries must be 0 or 1");
    }
    if (mask[t] == 1) {
      if (seen_zero) {
        throw DataError("mask is not a prefix mask: 1 after 0 at position " +
                        std::to_string(t));
      }
      ++ones;
    } else {
      seen_zero = true;
      for (int v = 0; v < padded.vocab(); ++v) {
        const double want = (v == blank_id) ? 1.0 : 0.0;
        if (padded.at(static_cast<int>(t), v) != want) {
          throw DataError("padded frame " + std::to_string(t) +
                          " is not one-hot on blank");
        }
      }
    }
  }
  if (ones != valid_len) {
    throw DataError("valid_len does not match number of mask ones");
  }
}

void WerBinScheme::validate() const {
  if (bins.empty()) {
    throw DataError("WER bin scheme must contain at least one interval");
  }
  double prev_hi = -1.0;
  for (size_t k = 0; k < bins.size(); ++k) {
    const auto& b = bins[k];
    if (b.lo > b.hi) {
      throw DataError("WER bin " + std::to_string(k + 1) + " has lo > hi");
    }
    if (k == 0 && b.lo < 0.0) {
      throw DataError("first WER bin starts below 0");
    }
    if (k > 0 && b.lo <= prev_hi) {
      throw DataError("WER bins are not disjoint/sorted at bin " +
                      std::to_string(k + 1));
    }
    prev_hi = b.hi;
  }
}

namespace {

std::string format_pct(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string WerBinScheme::to_string() const {
  std::string out;
  for (size_t k = 0; k < bins.size(); ++k) {
    if (k) out += ',';
    out += format_pct(bins[k].lo);
    out += ':';
    out += format_pct(bins[k].hi);
  }
  return out;
}

WerBinScheme WerBinScheme::parse(const std::string& text) {
  WerBinScheme scheme;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      throw DataError("bad WER bin '" + part + "', expected lo:hi");
    }
    WerBin b;
    try {
      b.lo = std::stod(part.substr(0, colon));
      b.hi = std::stod(part.substr(colon + 1));
    } catch (const std::exception&) {
      throw DataError("bad WER bin '" + part + "', expected numeric lo:hi");
    }
    scheme.bins.push_back(b);
  }
  scheme.validate();
  return scheme;
}

WerBinScheme WerBinScheme::default_scheme() {
  return WerBinScheme{{{0.0, 6.0}, {10.0, 40.0}, {50.0, 150.0}}};
}

PosteriorValidation validate_posterior_seq(const PosteriorSeq& p, double tol) {
  for (int t = 0; t < p.frames(); ++t) {
    double sum = 0.0;
    for (double x : p.frame(t)) {
      if (!std::isfinite(x)) {
        return {false, t, "non-finite entry"};
      }
      if (x < 0.0 || x > 1.0) {
        return {false, t, "entry " + format_pct(x) + " outside [0, 1]"};
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > tol) {
      return {false, t, "sum=" + format_pct(sum)};
    }
  }
  return {};
}

PosteriorFrame one_hot(int token, int vocab_size) {
  if (token < 0 || token >= vocab_size) {
    throw DataError("one_hot token " + std::to_string(token) +
                    " out of range [0, " + std::to_string(vocab_size) + ")");
  }
  PosteriorFrame f(vocab_size, 0.0);
  f[token] = 1.0;
  return f;
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(uint64_t seed) {
  uint64_t sm = seed;
  for (auto& s : s_) {
    s = splitmix64(sm);
  }
}

Rng Rng::derive(const SeedSpec& spec, Stream tag, uint64_t a, uint64_t b) {
  uint64_t sm = spec.global_seed;
  uint64_t h = splitmix64(sm);
  sm = h ^ static_cast<uint64_t>(tag);
  h = splitmix64(sm);
  sm = h ^ a;
  h = splitmix64(sm);
  sm = h ^ b;
  h = splitmix64(sm);
  return Rng(h);
}

uint64_t Rng::next() {
  const uint64_t result = std::rotl(s_[0] + s_[3], 23) + s_[0];
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

uint64_t Rng::bounded(uint64_t n) {
  // Debiased multiply-shift (Lemire).
  uint64_t x = next();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  uint64_t l = static_cast<uint64_t>(m);
  if (l < n) {
    const uint64_t t = (0 - n) % n;
    while (l < t) {
      x = next();
      m = static_cast<__uint128_t>(x) * n;
      l = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(bounded(static_cast<uint64_t>(hi - lo) + 1));
}

int Rng::categorical(std::span<const double> weights) {
  const double r = uniform();
  double c = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    c += weights[i];
    if (r < c) {
      return static_cast<int>(i);
    }
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace ctcsim
