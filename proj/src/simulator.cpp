#include "ctcsim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ctcsim/io_util.hpp"
#include "ctcsim/parallel.hpp"

namespace ctcsim {

void SimArch::validate() const {
  if (enc_layers < 1 || dec_layers < 1) {
    throw DataError("simulator needs at least one encoder and decoder layer");
  }
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
    throw DataError("d_model must be a positive multiple of n_heads");
  }
  if (d_ff < 1) {
    throw DataError("d_ff must be positive");
  }
  if (max_t < 1) {
    throw DataError("max_t must be >= 1");
  }
  if (vocab_size < 2) {
    throw DataError("vocab_size must be >= 2");
  }
  if (code_count < 1) {
    throw DataError("code_count must be >= 1");
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) {
    throw DataError("train lr must be positive");
  }
  if (epochs < 1) {
    throw DataError("train epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw DataError("train batch_size must be >= 1");
  }
  if (clip_norm < 0.0) {
    throw DataError("train clip_norm must be >= 0");
  }
  if (lambda_stop < 0.0) {
    throw DataError("train lambda_stop must be >= 0");
  }
}

std::vector<ParamSlot> param_schema(const SimArch& arch) {
  arch.validate();
  const int d = arch.d_model;
  std::vector<ParamSlot> slots;
  auto emb = [&](std::string name, int rows, int cols) {
    slots.push_back({std::move(name), rows, cols, ParamKind::kEmbedding});
  };
  auto weight = [&](std::string name, int rows, int cols) {
    slots.push_back({std::move(name), rows, cols, ParamKind::kWeight});
  };
  auto bias = [&](std::string name, int cols) {
    slots.push_back({std::move(name), 1, cols, ParamKind::kBias});
  };
  auto norm = [&](const std::string& name) {
    slots.push_back({name + "_g", 1, d, ParamKind::kGain});
    slots.push_back({name + "_b", 1, d, ParamKind::kBias});
  };
  auto attention = [&](const std::string& p) {
    weight(p + ".wq", d, d);
    bias(p + ".bq", d);
    weight(p + ".wk", d, d);
    bias(p + ".bk", d);
    weight(p + ".wv", d, d);
    bias(p + ".bv", d);
    weight(p + ".wo", d, d);
    bias(p + ".bo", d);
  };
  auto ffn = [&](const std::string& p) {
    weight(p + ".w1", d, arch.d_ff);
    bias(p + ".b1", arch.d_ff);
    weight(p + ".w2", arch.d_ff, d);
    bias(p + ".b2", d);
  };

  emb("token_emb", arch.vocab_size, d);
  emb("code_emb", arch.code_count, d);
  weight("frame_w", arch.vocab_size, d);
  bias("frame_b", d);
  emb("bos", 1, d);
  for (int l = 0; l < arch.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    norm(p + ".ln1");
    attention(p + ".attn");
    norm(p + ".ln2");
    ffn(p + ".ffn");
  }
  norm("enc_ln");
  for (int l = 0; l < arch.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    norm(p + ".ln1");
    attention(p + ".self");
    norm(p + ".ln2");
    attention(p + ".cross");
    norm(p + ".ln3");
    ffn(p + ".ffn");
  }
  norm("dec_ln");
  weight("out_w", d, arch.vocab_size);
  bias("out_b", arch.vocab_size);
  weight("stop_w", d, 1);
  bias("stop_b", 1);
  return slots;
}

std::vector<Tensor*> SimulatorParams::tensor_ptrs() {
  std::vector<Tensor*> out;
  out.reserve(tensors.size());
  for (auto& t : tensors) out.push_back(&t);
  return out;
}

std::vector<const Tensor*> SimulatorParams::tensor_ptrs() const {
  std::vector<const Tensor*> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back(&t);
  return out;
}

SimulatorParams init_params(const SimArch& arch, uint64_t seed) {
  const auto schema = param_schema(arch);
  Rng rng = Rng::derive(SeedSpec{seed}, Stream::kParamInit);
  SimulatorParams params;
  params.arch = arch;
  params.seed = seed;
  params.tensors.reserve(schema.size());
  const double emb_bound = 1.0 / std::sqrt(static_cast<double>(arch.d_model));
  for (const auto& slot : schema) {
    Tensor t(slot.rows, slot.cols);
    switch (slot.kind) {
      case ParamKind::kEmbedding:
      case ParamKind::kWeight: {
        const double bound =
            slot.kind == ParamKind::kEmbedding
                ? emb_bound
                : 1.0 / std::sqrt(static_cast<double>(slot.rows));
        for (size_t i = 0; i < t.size(); ++i) {
          t.data()[i] = rng.uniform(-bound, bound);
        }
        break;
      }
      case ParamKind::kBias:
        break;  // zeros
      case ParamKind::kGain:
        for (size_t i = 0; i < t.size(); ++i) {
          t.data()[i] = 1.0;
        }
        break;
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

Tensor sinusoid_table(int rows, int d_model) {
  Tensor pe(rows, d_model);
  for (int pos = 0; pos < rows; ++pos) {
    for (int i = 0; i < d_model; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / d_model);
      pe.at(pos, i) = std::sin(pos * rate);
      if (i + 1 < d_model) {
        pe.at(pos, i + 1) = std::cos(pos * rate);
      }
    }
  }
  return pe;
}

namespace {

Tensor posterior_to_tensor(const PosteriorSeq& p) {
  return {p.frames(), p.vocab(), p.data()};
}

PosteriorSeq tensor_to_posterior(const Tensor& t) {
  PosteriorSeq p(t.rows(), t.cols());
  p.data().assign(t.data(), t.data() + t.size());
  return p;
}

Tensor causal_mask(int t) {
  Tensor m(t, t);
  for (int i = 0; i < t; ++i) {
    for (int j = i + 1; j < t; ++j) {
      m.at(i, j) = -1e30;  // exp underflows to exactly zero attention
    }
  }
  return m;
}

struct DecoderOut {
  int posterior = -1;    // T x V node
  int stop_logits = -1;  // T x 1 node
};

struct LossNodes {
  int total = -1;
  int ce = -1;
  int stop = -1;
};

// Binds one parameter set to one graph and builds the model forward pass.
// Parameter leaves follow param_schema order.
class ModelGraph {
 public:
  ModelGraph(Graph& g, const SimArch& arch, std::vector<int> param_leaves)
      : g_(g), arch_(arch), leaves_(std::move(param_leaves)) {
    const auto schema = param_schema(arch);
    if (leaves_.size() != schema.size()) {
      throw DataError("parameter leaf count does not match schema");
    }
    for (size_t i = 0; i < schema.size(); ++i) {
      index_.emplace(schema[i].name, static_cast<int>(i));
    }
  }

  static ModelGraph from_params(Graph& g, const SimulatorParams& params,
                                bool requires_grad) {
    std::vector<int> leaves;
    leaves.reserve(params.tensors.size());
    for (const auto& t : params.tensors) {
      leaves.push_back(g.leaf(t, requires_grad));
    }
    return {g, params.arch, std::move(leaves)};
  }

  int p(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) {
      throw DataError("unknown parameter slot: " + name);
    }
    return leaves_[it->second];
  }

  int encode(const Transcript& y, int code) {
    if (code < 1 || code > arch_.code_count) {
      throw DataError("WER code " + std::to_string(code) +
                      " out of range [1, " + std::to_string(arch_.code_count) +
                      "]");
    }
    if (y.tokens.empty()) {
      throw DataError("cannot encode an empty transcript");
    }
    const int u = y.length();
    const int tok = g_.embedding_lookup(p("token_emb"), y.tokens);
    const int pos = g_.constant(sinusoid_table(u, arch_.d_model));
    int x = g_.add(tok, pos);
    const int code_row = g_.embedding_lookup(p("code_emb"), {code - 1});
    if (arch_.fusion == SimArch::Fusion::kPrepend) {
      x = g_.concat_rows(code_row, x);
    } else {
      x = g_.add_row(x, code_row);
    }
    for (int l = 0; l < arch_.enc_layers; ++l) {
      const std::string pref = "enc" + std::to_string(l);
      const int h1 = norm(x, pref + ".ln1");
      x = g_.add(x, attention(h1, h1, pref + ".attn", false));
      const int h2 = norm(x, pref + ".ln2");
      x = g_.add(x, ffn(h2, pref + ".ffn"));
    }
    return norm(x, "enc_ln");
  }

  // Decoder over steps 0..L where step 0 sees the BOS vector and step t sees
  // the projection of prev_frames row t-1. Causal by construction.
  DecoderOut decode(int memory, const Tensor& prev_frames) {
    const int steps = prev_frames.rows() + 1;
    if (prev_frames.rows() > 0 && prev_frames.cols() != arch_.vocab_size) {
      throw DataError("decoder feedback width " +
                      std::to_string(prev_frames.cols()) +
                      " does not match vocab " +
                      std::to_string(arch_.vocab_size));
    }
    int x;
    if (prev_frames.rows() > 0) {
      const int prev = g_.constant(prev_frames);
      const int proj =
          g_.add_row(g_.matmul(prev, p("frame_w")), p("frame_b"));
      x = g_.concat_rows(p("bos"), proj);
    } else {
      x = p("bos");
    }
    x = g_.add(x, g_.constant(sinusoid_table(steps, arch_.d_model)));
    for (int l = 0; l < arch_.dec_layers; ++l) {
      const std::string pref = "dec" + std::to_string(l);
      const int h1 = norm(x, pref + ".ln1");
      x = g_.add(x, attention(h1, h1, pref + ".self", true));
      const int h2 = norm(x, pref + ".ln2");
      x = g_.add(x, attention(h2, memory, pref + ".cross", false));
      const int h3 = norm(x, pref + ".ln3");
      x = g_.add(x, ffn(h3, pref + ".ffn"));
    }
    x = norm(x, "dec_ln");
    DecoderOut out;
    out.posterior =
        g_.row_softmax(g_.add_row(g_.matmul(x, p("out_w")), p("out_b")));
    out.stop_logits = g_.add_row(g_.matmul(x, p("stop_w")), p("stop_b"));
    return out;
  }

  DecoderOut teacher_forced(int memory, const MaskedPosteriorSeq& target) {
    check_target(target);
    const int horizon = target.horizon();
    Tensor prev(horizon - 1, arch_.vocab_size);
    if (horizon > 1) {
      std::copy_n(target.padded.data().data(),
                  static_cast<size_t>(horizon - 1) * arch_.vocab_size,
                  prev.data());
    }
    return decode(memory, prev);
  }

  LossNodes loss(const DecoderOut& dec, const MaskedPosteriorSeq& target,
                 double lambda_stop) {
    check_target(target);
    const int horizon = target.horizon();
    std::vector<double> mask(target.mask.begin(), target.mask.end());
    const int tgt = g_.constant(posterior_to_tensor(target.padded));
    const int ce_rows =
        g_.scale(g_.row_sum(g_.mul(tgt, g_.log_clamped(dec.posterior))), -1.0);
    LossNodes nodes;
    nodes.ce = g_.masked_mean(ce_rows, mask);
    Tensor stop_target(horizon, 1);
    stop_target.at(target.valid_len - 1, 0) = 1.0;
    nodes.stop = g_.masked_mean(
        g_.bce_with_logits(dec.stop_logits, std::move(stop_target)), mask);
    nodes.total = g_.add(nodes.ce, g_.scale(nodes.stop, lambda_stop));
    return nodes;
  }

  std::vector<Tensor> gather_grads() const {
    std::vector<Tensor> out;
    out.reserve(leaves_.size());
    for (int id : leaves_) {
      out.push_back(g_.grad(id));
    }
    return out;
  }

 private:
  void check_target(const MaskedPosteriorSeq& target) const {
    if (target.padded.vocab() != arch_.vocab_size) {
      throw DataError("target vocab " + std::to_string(target.padded.vocab()) +
                      " does not match arch vocab " +
                      std::to_string(arch_.vocab_size));
    }
    if (target.valid_len < 1 ||
        static_cast<int>(target.mask.size()) != target.horizon()) {
      throw DataError("malformed masked target sequence");
    }
  }

  int attention(int q_src, int kv_src, const std::string& prefix,
                bool causal) {
    const int dh = arch_.head_dim();
    const int q =
        g_.add_row(g_.matmul(q_src, p(prefix + ".wq")), p(prefix + ".bq"));
    const int k =
        g_.add_row(g_.matmul(kv_src, p(prefix + ".wk")), p(prefix + ".bk"));
    const int v =
        g_.add_row(g_.matmul(kv_src, p(prefix + ".wv")), p(prefix + ".bv"));
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    int mask = -1;
    if (causal) {
      mask = g_.constant(causal_mask(g_.value(q).rows()));
    }
    std::vector<int> heads;
    heads.reserve(arch_.n_heads);
    for (int h = 0; h < arch_.n_heads; ++h) {
      const int qh = g_.slice_cols(q, h * dh, (h + 1) * dh);
      const int kh = g_.slice_cols(k, h * dh, (h + 1) * dh);
      const int vh = g_.slice_cols(v, h * dh, (h + 1) * dh);
      int scores = g_.scale(g_.matmul(qh, g_.transpose(kh)), inv_scale);
      if (causal) {
        scores = g_.add(scores, mask);
      }
      heads.push_back(g_.matmul(g_.row_softmax(scores), vh));
    }
    const int ctx = g_.concat_cols(heads);
    return g_.add_row(g_.matmul(ctx, p(prefix + ".wo")), p(prefix + ".bo"));
  }

  int ffn(int x, const std::string& prefix) {
    const int h =
        g_.relu(g_.add_row(g_.matmul(x, p(prefix + ".w1")), p(prefix + ".b1")));
    return g_.add_row(g_.matmul(h, p(prefix + ".w2")), p(prefix + ".b2"));
  }

  int norm(int x, const std::string& prefix) {
    return g_.layer_norm(x, p(prefix + "_g"), p(prefix + "_b"));
  }

  Graph& g_;
  SimArch arch_;
  std::vector<int> leaves_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace

Tensor encode_memory(const Transcript& y, int code,
                     const SimulatorParams& params) {
  Graph g;
  auto m = ModelGraph::from_params(g, params, false);
  return g.value(m.encode(y, code));
}

TeacherForcedResult forward_teacher_forced(const Transcript& y, int code,
                                           const MaskedPosteriorSeq& target,
                                           const SimulatorParams& params) {
  Graph g;
  auto m = ModelGraph::from_params(g, params, false);
  const auto dec = m.teacher_forced(m.encode(y, code), target);
  TeacherForcedResult out;
  out.posterior = tensor_to_posterior(g.value(dec.posterior));
  const Tensor& stop = g.value(dec.stop_logits);
  out.stop_logits.assign(stop.data(), stop.data() + stop.size());
  return out;
}

double loss_sim(const PosteriorSeq& predicted,
                std::span<const double> stop_logits,
                const MaskedPosteriorSeq& target, double lambda_stop) {
  if (predicted.frames() != target.horizon() ||
      predicted.vocab() != target.padded.vocab()) {
    throw DataError("predicted shape does not match target horizon");
  }
  if (static_cast<int>(stop_logits.size()) != target.horizon()) {
    throw DataError("stop logits length does not match target horizon");
  }
  Graph g;
  const int post = g.leaf(posterior_to_tensor(predicted));
  Tensor stop(target.horizon(), 1);
  std::copy(stop_logits.begin(), stop_logits.end(), stop.data());
  const int stop_node = g.leaf(std::move(stop));

  const std::vector<double> mask(target.mask.begin(), target.mask.end());
  const int tgt = g.constant(posterior_to_tensor(target.padded));
  const int ce_rows =
      g.scale(g.row_sum(g.mul(tgt, g.log_clamped(post))), -1.0);
  const int ce = g.masked_mean(ce_rows, mask);
  Tensor stop_target(target.horizon(), 1);
  stop_target.at(target.valid_len - 1, 0) = 1.0;
  const int stop_loss = g.masked_mean(
      g.bce_with_logits(stop_node, std::move(stop_target)), mask);
  return g.value(g.add(ce, g.scale(stop_loss, lambda_stop))).item();
}

int build_loss_graph(Graph& g, const std::vector<int>& param_leaves,
                     const SimArch& arch, const Transcript& y, int code,
                     const MaskedPosteriorSeq& target, double lambda_stop) {
  ModelGraph m(g, arch, param_leaves);
  const auto dec = m.teacher_forced(m.encode(y, code), target);
  return m.loss(dec, target, lambda_stop).total;
}

PosteriorSeq simulate(const Transcript& y, int code,
                      const SimulatorParams& params, int max_t) {
  if (max_t < 1) {
    throw DataError("simulate requires max_t >= 1");
  }
  const int v = params.arch.vocab_size;
  PosteriorSeq out(0, v);
  for (int t = 0; t < max_t; ++t) {
    Graph g;
    auto m = ModelGraph::from_params(g, params, false);
    const int mem = m.encode(y, code);
    const auto dec = m.decode(mem, posterior_to_tensor(out));
    const Tensor& post = g.value(dec.posterior);
    out.append({post.data() + static_cast<size_t>(t) * v,
                static_cast<size_t>(v)});
    // sigmoid(logit) > 0.5 is exactly logit > 0
    if (g.value(dec.stop_logits).at(t, 0) > 0.0) {
      break;
    }
  }
  return out;
}

namespace {

double grad_global_norm(const std::vector<Tensor>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (size_t i = 0; i < g.size(); ++i) {
      sq += g.data()[i] * g.data()[i];
    }
  }
  return std::sqrt(sq);
}

}  // namespace

TrainState train(const TrainSet& data, const SimArch& arch,
                 const TrainConfig& cfg, const TrainState* resume) {
  arch.validate();
  cfg.validate();
  if (data.empty()) {
    throw DataError("training set is empty");
  }

  TrainState st;
  if (resume) {
    st = *resume;
    const auto schema = param_schema(arch);
    if (st.params.tensors.size() != schema.size()) {
      throw DataError("resume checkpoint does not match architecture");
    }
  } else {
    st.params = init_params(arch, cfg.seed);
  }

  auto ptrs = st.params.tensor_ptrs();
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.beta1 = cfg.beta1;
  acfg.beta2 = cfg.beta2;
  acfg.eps = cfg.adam_eps;
  acfg.weight_decay = cfg.weight_decay;

  const int64_t n = static_cast<int64_t>(data.size());
  const int start_epoch = static_cast<int>(st.trace.size());
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::derive(SeedSpec{cfg.seed}, Stream::kShuffle,
                                  static_cast<uint64_t>(epoch));
    for (int64_t i = n - 1; i > 0; --i) {
      const int64_t j =
          static_cast<int64_t>(shuffle_rng.bounded(static_cast<uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }

    double sum_loss = 0.0;
    double sum_ce = 0.0;
    double sum_stop = 0.0;
    int64_t batch_index = 0;
    for (int64_t b0 = 0; b0 < n; b0 += cfg.batch_size, ++batch_index) {
      const int64_t bn = std::min<int64_t>(cfg.batch_size, n - b0);
      std::vector<std::vector<Tensor>> sample_grads(bn);
      std::vector<std::array<double, 3>> sample_loss(bn);
      parallel_for(bn, cfg.workers, [&](int64_t i) {
        const TrainSample& s = data[order[b0 + i]];
        Graph g;
        auto m = ModelGraph::from_params(g, st.params, true);
        const auto dec = m.teacher_forced(m.encode(s.transcript, s.code), s.target);
        const auto ln = m.loss(dec, s.target, cfg.lambda_stop);
        sample_loss[i] = {g.value(ln.total).item(), g.value(ln.ce).item(),
                          g.value(ln.stop).item()};
        g.backward(ln.total, 1.0 / static_cast<double>(bn));
        sample_grads[i] = m.gather_grads();
      });

      const std::string batch_name = "epoch " + std::to_string(epoch + 1) +
                                     " batch " + std::to_string(batch_index + 1);
      for (int64_t i = 0; i < bn; ++i) {
        if (!std::isfinite(sample_loss[i][0])) {
          throw NumericalError("non-finite loss in " + batch_name);
        }
        sum_loss += sample_loss[i][0];
        sum_ce += sample_loss[i][1];
        sum_stop += sample_loss[i][2];
      }

      // Fixed-order reduction keeps results identical across worker counts.
      std::vector<Tensor> acc = std::move(sample_grads[0]);
      for (int64_t i = 1; i < bn; ++i) {
        for (size_t p = 0; p < acc.size(); ++p) {
          double* dst = acc[p].data();
          const double* src = sample_grads[i][p].data();
          for (size_t k = 0; k < acc[p].size(); ++k) {
            dst[k] += src[k];
          }
        }
      }

      if (cfg.clip_norm > 0.0) {
        const double norm = grad_global_norm(acc);
        if (norm > cfg.clip_norm && norm > 0.0) {
          const double scale = cfg.clip_norm / norm;
          for (auto& g : acc) {
            for (size_t k = 0; k < g.size(); ++k) {
              g.data()[k] *= scale;
            }
          }
        }
      }

      if (!adamw_step(ptrs, acc, st.opt, acfg)) {
        throw NumericalError("non-finite gradient in " + batch_name);
      }
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.loss = sum_loss / static_cast<double>(n);
    stats.ce = sum_ce / static_cast<double>(n);
    stats.stop = sum_stop / static_cast<double>(n);
    st.trace.push_back(stats);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Checkpoint format (little-endian):
//   magic "CTCSIMCK", version u32,
//   arch (9 x u32), seed u64,
//   trace count u32, entries (epoch u32, loss/ce/stop f64),
//   has_opt u8 [, adam step i64],
//   tensor count u32, per tensor: name, rows u32, cols u32, f64 data,
//   fnv1a64 checksum of the data bytes.
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[9] = "CTCSIMCK";
constexpr uint32_t kCheckpointVersion = 1;

void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u32(static_cast<uint32_t>(t.rows()));
  w.u32(static_cast<uint32_t>(t.cols()));
  const auto* bytes = reinterpret_cast<const uint8_t*>(t.data());
  const size_t n = t.size() * sizeof(double);
  w.bytes({bytes, n});
  w.u64(fnv1a64({bytes, n}));
}

Tensor read_tensor(ByteReader& r, const std::string& expect_name) {
  const std::string name = r.str();
  if (name != expect_name) {
    throw DataError("checkpoint tensor order mismatch: expected " +
                    expect_name + ", found " + name);
  }
  const uint32_t rows = r.u32();
  const uint32_t cols = r.u32();
  const size_t n = static_cast<size_t>(rows) * cols * sizeof(double);
  const auto raw = r.raw(n);
  const uint64_t want = r.u64();
  if (fnv1a64(raw) != want) {
    throw DataError("checksum failure in checkpoint tensor " + name);
  }
  Tensor t(static_cast<int>(rows), static_cast<int>(cols));
  std::memcpy(t.data(), raw.data(), n);
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  const auto schema = param_schema(state.params.arch);
  if (schema.size() != state.params.tensors.size()) {
    throw DataError("checkpoint params do not match architecture schema");
  }
  ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kCheckpointMagic), 8});
  w.u32(kCheckpointVersion);
  const SimArch& a = state.params.arch;
  for (int v : {a.enc_layers, a.dec_layers, a.d_model, a.n_heads, a.d_ff,
                a.max_t, a.vocab_size, a.code_count,
                static_cast<int>(a.fusion)}) {
    w.u32(static_cast<uint32_t>(v));
  }
  w.u64(state.params.seed);
  w.u32(static_cast<uint32_t>(state.trace.size()));
  for (const auto& e : state.trace) {
    w.u32(static_cast<uint32_t>(e.epoch));
    w.f64(e.loss);
    w.f64(e.ce);
    w.f64(e.stop);
  }
  const bool has_opt = state.opt.initialized();
  w.u8(has_opt ? 1 : 0);
  if (has_opt) {
    if (state.opt.m.size() != schema.size()) {
      throw DataError("checkpoint optimizer state does not match params");
    }
    w.i64(state.opt.step);
  }
  const uint32_t tensor_count =
      static_cast<uint32_t>(schema.size() * (has_opt ? 3 : 1));
  w.u32(tensor_count);
  for (size_t i = 0; i < schema.size(); ++i) {
    write_tensor(w, schema[i].name, state.params.tensors[i]);
  }
  if (has_opt) {
    for (size_t i = 0; i < schema.size(); ++i) {
      write_tensor(w, "adam.m." + schema[i].name, state.opt.m[i]);
    }
    for (size_t i = 0; i < schema.size(); ++i) {
      write_tensor(w, "adam.v." + schema[i].name, state.opt.v[i]);
    }
  }
  write_file(path, w.data());
}

TrainState load_checkpoint(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes);
  const auto magic = r.raw(8);
  if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0) {
    throw DataError("not a checkpoint file: " + path);
  }
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  }
  TrainState st;
  SimArch a;
  a.enc_layers = static_cast<int>(r.u32());
  a.dec_layers = static_cast<int>(r.u32());
  a.d_model = static_cast<int>(r.u32());
  a.n_heads = static_cast<int>(r.u32());
  a.d_ff = static_cast<int>(r.u32());
  a.max_t = static_cast<int>(r.u32());
  a.vocab_size = static_cast<int>(r.u32());
  a.code_count = static_cast<int>(r.u32());
  a.fusion = static_cast<SimArch::Fusion>(r.u32());
  st.params.arch = a;
  st.params.seed = r.u64();
  const uint32_t trace_count = r.u32();
  for (uint32_t i = 0; i < trace_count; ++i) {
    EpochStats e;
    e.epoch = static_cast<int>(r.u32());
    e.loss = r.f64();
    e.ce = r.f64();
    e.stop = r.f64();
    st.trace.push_back(e);
  }
  const bool has_opt = r.u8() != 0;
  if (has_opt) {
    st.opt.step = r.i64();
  }
  const auto schema = param_schema(a);
  const uint32_t tensor_count = r.u32();
  if (tensor_count != schema.size() * (has_opt ? 3 : 1)) {
    throw DataError("checkpoint tensor count does not match architecture");
  }
  st.params.tensors.reserve(schema.size());
  for (const auto& slot : schema) {
    Tensor t = read_tensor(r, slot.name);
    if (t.rows() != slot.rows || t.cols() != slot.cols) {
      throw DataError("checkpoint tensor " + slot.name + " has shape " +
                      t.shape_str() + ", expected " +
                      std::to_string(slot.rows) + "x" +
                      std::to_string(slot.cols));
    }
    st.params.tensors.push_back(std::move(t));
  }
  if (has_opt) {
    for (const auto& slot : schema) {
      st.opt.m.push_back(read_tensor(r, "adam.m." + slot.name));
    }
    for (const auto& slot : schema) {
      st.opt.v.push_back(read_tensor(r, "adam.v." + slot.name));
    }
  }
  if (r.remaining() != 0) {
    throw DataError("trailing bytes in checkpoint: " + path);
  }
  return st;
}

}  // namespace ctcsim
