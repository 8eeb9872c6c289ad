// Minimal reverse-mode automatic differentiation over dense 2-D tensors of
// 64-bit reals: a record-and-replay tape with just the primitives the
// conditional simulator and its loss need.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctcsim/core.hpp"

namespace ctcsim {

/// Row-major dense matrix of doubles. Vectors are 1xN or Nx1, scalars 1x1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols)
      : rows_(rows), cols_(cols),
        data_(static_cast<size_t>(rows) * cols, 0.0) {}
  Tensor(int rows, int cols, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor full(int rows, int cols, double v);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  std::array<int, 2> shape() const { return {rows_, cols_}; }
  std::string shape_str() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double at(int r, int c) const {
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  double item() const;  // value of a 1x1 tensor

  void set_zero();
  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Forward-eager computation tape. Node ids index creation order, which is
/// also a valid topological order for the backward sweep; a graph instance is
/// single-threaded, separate instances may run in parallel.
class Graph {
 public:
  int leaf(Tensor value, bool requires_grad = false);
  int constant(Tensor value) { return leaf(std::move(value), false); }

  int matmul(int a, int b);
  int transpose(int a);
  int add(int a, int b);                    // same shape
  int add_row(int a, int row);              // broadcast 1xN over rows
  int scale(int a, double s);
  int mul(int a, int b);                    // elementwise
  int relu(int a);
  int sigmoid(int a);
  int row_softmax(int a);                   // max-subtracted, rows on simplex
  int log_clamped(int a);                   // log(max(x, 1e-12))
  int layer_norm(int x, int gamma, int beta);  // per row, eps 1e-5
  int embedding_lookup(int table, std::vector<int> ids);
  int concat_rows(int top, int bottom);
  int concat_cols(const std::vector<int>& parts);
  int slice_rows(int a, int r0, int r1);    // rows [r0, r1)
  int slice_cols(int a, int c0, int c1);    // cols [c0, c1)
  int row_sum(int a);                       // MxN -> Mx1
  int masked_mean(int a, std::vector<double> mask);  // MxN -> 1xN
  /// Numerically stable binary cross-entropy from logits, per element.
  int bce_with_logits(int logits, Tensor targets);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 node; gradients accumulate into every
  /// requires_grad node reachable from it.
  void backward(int node, double seed = 1.0);

  static constexpr double kLogClamp = 1e-12;
  static constexpr double kLayerNormEps = 1e-5;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Graph&, int)> backward_fn;
  };

  int add_node(Tensor value, bool requires_grad,
               std::function<void(Graph&, int)> backward_fn);
  Tensor& grad_buf(int id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

/// Builds a scalar-valued graph over leaves made from `inputs`, returning the
/// scalar node id. Used by grad_check to rebuild the graph per evaluation.
using GraphFn = std::function<int(Graph&, const std::vector<int>&)>;

/// Central finite differences vs. analytic gradients over every coordinate of
/// every input. Returns the max relative error |a-n| / max(1, |a|, |n|).
/// Throws NumericalError on non-finite values.
double grad_check(const GraphFn& build, const std::vector<Tensor>& inputs,
                  double eps = 1e-5);

// ---------------------------------------------------------------------------
// AdamW (decoupled weight decay, bias-corrected moments).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamState {
  int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init_like(std::span<const Tensor* const> params);
  bool initialized() const { return !m.empty(); }
};

/// One AdamW update. Returns false and leaves params and state untouched when
/// any gradient is non-finite.
bool adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                AdamState& state, const AdamConfig& cfg);

/// Scalar-loop reference implementation; bit-identical to adamw_step.
bool adamw_step_loop(std::span<Tensor* const> params,
                     std::span<const Tensor> grads, AdamState& state,
                     const AdamConfig& cfg);

}  // namespace ctcsim
