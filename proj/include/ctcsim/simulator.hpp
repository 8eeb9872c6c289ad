// Conditional text-to-posterior simulator: a small Transformer
// encoder-decoder that maps (transcript, WER-bin code) to a CTC posterior
// frame sequence. Teacher-forced training with masked posterior-level
// cross-entropy plus a stop-flag head; autoregressive greedy inference.
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctcsim/core.hpp"
#include "ctcsim/grad.hpp"

namespace ctcsim {

struct SimArch {
  int enc_layers = 2;
  int dec_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 128;
  int max_t = 64;       // decoding cap, equals the training horizon
  int vocab_size = 32;  // V, includes blank
  int code_count = 3;   // K

  // How the WER-code embedding conditions the encoder: prepended as an extra
  // memory position (default) or added to every token embedding.
  enum class Fusion { kPrepend, kAdd };
  Fusion fusion = Fusion::kPrepend;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
};

enum class ParamKind { kEmbedding, kWeight, kBias, kGain };

/// Canonical enumeration of every learned tensor: slot index, name, shape and
/// init kind. Single source of truth for parameter ordering, initialization,
/// checkpoints, and gradient gathering.
struct ParamSlot {
  std::string name;
  int rows = 0;
  int cols = 0;
  ParamKind kind = ParamKind::kWeight;
};

std::vector<ParamSlot> param_schema(const SimArch& arch);

/// All learned weights, stored in param_schema order.
struct SimulatorParams {
  SimArch arch;
  uint64_t seed = 0;
  std::vector<Tensor> tensors;

  std::vector<Tensor*> tensor_ptrs();
  std::vector<const Tensor*> tensor_ptrs() const;
};

struct TrainConfig {
  double lr = 5e-5;
  int epochs = 5;
  int batch_size = 16;
  uint64_t seed = 0;
  double clip_norm = 1.0;  // global gradient norm, 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  double lambda_stop = 0.1;  // weight of the stop-flag binary CE
  int workers = 1;

  void validate() const;
};

/// Scaled-uniform initialization (bound 1/sqrt(fan_in); biases zero, norm
/// gains one), deterministic under the seed.
SimulatorParams init_params(const SimArch& arch, uint64_t seed);

/// Encoder memory for (y, c): token embeddings + sinusoidal positions with
/// the WER-code embedding fused per arch.fusion. Shape (U+1) x d_model when
/// prepended, U x d_model when additive.
Tensor encode_memory(const Transcript& y, int code,
                     const SimulatorParams& params);

struct TeacherForcedResult {
  PosteriorSeq posterior;           // horizon x V, every row on the simplex
  std::vector<double> stop_logits;  // horizon entries
};

/// Teacher-forced decode over the padded target: decoder input at step t is a
/// learned projection of the teacher frame at t-1 (a learned BOS vector at
/// step 0), causal self-attention, cross-attention to the encoder memory.
TeacherForcedResult forward_teacher_forced(const Transcript& y, int code,
                                           const MaskedPosteriorSeq& target,
                                           const SimulatorParams& params);

/// Mask-normalized posterior cross-entropy plus lambda_stop times the
/// stop-flag binary CE (stop target is 1 exactly at the last valid frame).
/// Identical formula to the training loss.
double loss_sim(const PosteriorSeq& predicted,
                std::span<const double> stop_logits,
                const MaskedPosteriorSeq& target, double lambda_stop);

/// Autoregressive greedy generation conditioned only on (y, c): each emitted
/// frame feeds back through the input projection; stops when the stop-flag
/// sigmoid exceeds 0.5 or at max_t. Output length is in [1, max_t].
PosteriorSeq simulate(const Transcript& y, int code,
                      const SimulatorParams& params, int max_t);

/// Builds the full teacher-forced loss graph over parameter leaves given in
/// param_schema order; returns the scalar loss node. Gradient-check hook.
int build_loss_graph(Graph& g, const std::vector<int>& param_leaves,
                     const SimArch& arch, const Transcript& y, int code,
                     const MaskedPosteriorSeq& target, double lambda_stop);

struct TrainSample {
  Transcript transcript;
  int code = 0;
  MaskedPosteriorSeq target;
};
using TrainSet = std::vector<TrainSample>;

struct EpochStats {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double ce = 0.0;
  double stop = 0.0;
};

/// Parameters plus optimizer state and loss history; the checkpoint unit.
struct TrainState {
  SimulatorParams params;
  AdamState opt;
  std::vector<EpochStats> trace;  // one entry per completed epoch
};

/// Epochs of shuffled mini-batch AdamW over teacher-forced losses. Per-epoch
/// shuffles are derived statelessly from (seed, epoch), so resuming from a
/// checkpoint continues the exact trajectory of an uninterrupted run.
/// Per-sample gradients are reduced in sample order: any worker count yields
/// bit-identical results. Throws NumericalError naming the batch when the
/// loss goes non-finite.
TrainState train(const TrainSet& data, const SimArch& arch,
                 const TrainConfig& cfg,
                 const TrainState* resume = nullptr);

// Checkpoint file: header (arch, seed, trace) + named little-endian f64
// tensors with per-tensor checksums; save/load round-trips bit-exactly.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

/// Sinusoidal position table, rows x d_model.
Tensor sinusoid_table(int rows, int d_model);

}  // namespace ctcsim
