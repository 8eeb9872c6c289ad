#include "ctcsim/grad.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace ctcsim {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;

Eigen::Map<EMat> M(Tensor& t) {
  return {t.data(), t.rows(), t.cols()};
}
Eigen::Map<const EMat> M(const Tensor& t) {
  return {t.data(), t.rows(), t.cols()};
}
Eigen::Map<Eigen::ArrayXd> A(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}
Eigen::Map<const Eigen::ArrayXd> A(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.size())};
}

double sigmoid_stable(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != static_cast<size_t>(rows) * cols) {
    throw DataError("tensor data length does not match shape " + shape_str());
  }
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

Tensor Tensor::full(int rows, int cols, double v) {
  Tensor t(rows, cols);
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

double Tensor::item() const {
  if (rows_ != 1 || cols_ != 1) {
    throw DataError("item() on non-scalar tensor " + shape_str());
  }
  return data_[0];
}

void Tensor::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

int Graph::add_node(Tensor value, bool requires_grad,
                    std::function<void(Graph&, int)> backward_fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.backward_fn = std::move(backward_fn);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::leaf(Tensor value, bool requires_grad) {
  return add_node(std::move(value), requires_grad, nullptr);
}

const Tensor& Graph::grad(int id) const {
  if (!nodes_[id].requires_grad) {
    throw DataError("gradient requested for a node without requires_grad");
  }
  return nodes_[id].grad;
}

void Graph::backward(int node, double seed) {
  const Tensor& out = nodes_[node].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw DataError("backward requires a 1x1 node, got " + out.shape_str());
  }
  if (!nodes_[node].requires_grad) {
    return;  // nothing reachable requires gradients
  }
  nodes_[node].grad.at(0, 0) += seed;
  for (int i = node; i >= 0; --i) {
    if (nodes_[i].requires_grad && nodes_[i].backward_fn) {
      nodes_[i].backward_fn(*this, i);
    }
  }
}

int Graph::matmul(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (va.cols() != vb.rows()) {
    throw DataError("matmul shape mismatch: " + va.shape_str() + " x " +
                    vb.shape_str());
  }
  Tensor out(va.rows(), vb.cols());
  M(out).noalias() = M(va) * M(vb);
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return add_node(std::move(out), req, [a, b](Graph& g, int self) {
    const Tensor& gc = g.nodes_[self].grad;
    if (g.nodes_[a].requires_grad) {
      M(g.nodes_[a].grad).noalias() += M(gc) * M(g.nodes_[b].value).transpose();
    }
    if (g.nodes_[b].requires_grad) {
      M(g.nodes_[b].grad).noalias() += M(g.nodes_[a].value).transpose() * M(gc);
    }
  });
}

int Graph::transpose(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.cols(), va.rows());
  M(out) = M(va).transpose();
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    M(g.nodes_[a].grad) += M(g.nodes_[self].grad).transpose();
                  });
}

int Graph::add(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (va.shape() != vb.shape()) {
    throw DataError("add shape mismatch: " + va.shape_str() + " vs " +
                    vb.shape_str());
  }
  Tensor out(va.rows(), va.cols());
  A(out) = A(va) + A(vb);
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return add_node(std::move(out), req, [a, b](Graph& g, int self) {
    const Tensor& gc = g.nodes_[self].grad;
    if (g.nodes_[a].requires_grad) A(g.nodes_[a].grad) += A(gc);
    if (g.nodes_[b].requires_grad) A(g.nodes_[b].grad) += A(gc);
  });
}

int Graph::add_row(int a, int row) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vr = nodes_[row].value;
  if (vr.rows() != 1 || vr.cols() != va.cols()) {
    throw DataError("add_row shape mismatch: " + va.shape_str() + " + " +
                    vr.shape_str());
  }
  Tensor out(va.rows(), va.cols());
  M(out) = M(va).rowwise() + M(vr).row(0);
  const bool req = nodes_[a].requires_grad || nodes_[row].requires_grad;
  return add_node(std::move(out), req, [a, row](Graph& g, int self) {
    const Tensor& gc = g.nodes_[self].grad;
    if (g.nodes_[a].requires_grad) A(g.nodes_[a].grad) += A(gc);
    if (g.nodes_[row].requires_grad) {
      M(g.nodes_[row].grad).row(0) += M(gc).colwise().sum();
    }
  });
}

int Graph::scale(int a, double s) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), va.cols());
  A(out) = A(va) * s;
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a, s](Graph& g, int self) {
                    A(g.nodes_[a].grad) += A(g.nodes_[self].grad) * s;
                  });
}

int Graph::mul(int a, int b) {
  const Tensor& va = nodes_[a].value;
  const Tensor& vb = nodes_[b].value;
  if (va.shape() != vb.shape()) {
    throw DataError("mul shape mismatch: " + va.shape_str() + " vs " +
                    vb.shape_str());
  }
  Tensor out(va.rows(), va.cols());
  A(out) = A(va) * A(vb);
  const bool req = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return add_node(std::move(out), req, [a, b](Graph& g, int self) {
    const Tensor& gc = g.nodes_[self].grad;
    if (g.nodes_[a].requires_grad) {
      A(g.nodes_[a].grad) += A(gc) * A(g.nodes_[b].value);
    }
    if (g.nodes_[b].requires_grad) {
      A(g.nodes_[b].grad) += A(gc) * A(g.nodes_[a].value);
    }
  });
}

int Graph::relu(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), va.cols());
  A(out) = A(va).max(0.0);
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    A(g.nodes_[a].grad) +=
                        A(g.nodes_[self].grad) *
                        (A(g.nodes_[a].value) > 0.0).cast<double>();
                  });
}

int Graph::sigmoid(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), va.cols());
  for (size_t i = 0; i < va.size(); ++i) {
    out.data()[i] = sigmoid_stable(va.data()[i]);
  }
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    const auto s = A(g.nodes_[self].value);
                    A(g.nodes_[a].grad) +=
                        A(g.nodes_[self].grad) * s * (1.0 - s);
                  });
}

int Graph::row_softmax(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), va.cols());
  for (int r = 0; r < va.rows(); ++r) {
    const auto row = M(va).row(r);
    const double mx = row.maxCoeff();
    auto orow = M(out).row(r);
    orow = (row.array() - mx).exp();
    orow /= orow.sum();
  }
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    const Tensor& s = g.nodes_[self].value;
                    const Tensor& gc = g.nodes_[self].grad;
                    auto ga = M(g.nodes_[a].grad);
                    for (int r = 0; r < s.rows(); ++r) {
                      const auto srow = M(s).row(r).array();
                      const auto grow = M(gc).row(r).array();
                      const double dot = (srow * grow).sum();
                      ga.row(r).array() += srow * (grow - dot);
                    }
                  });
}

int Graph::log_clamped(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), va.cols());
  A(out) = A(va).max(kLogClamp).log();
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    const auto x = A(g.nodes_[a].value);
                    A(g.nodes_[a].grad) += A(g.nodes_[self].grad) *
                                           (x > kLogClamp).cast<double>() /
                                           x.max(kLogClamp);
                  });
}

int Graph::layer_norm(int x, int gamma, int beta) {
  const Tensor& vx = nodes_[x].value;
  const Tensor& vg = nodes_[gamma].value;
  const Tensor& vb = nodes_[beta].value;
  if (vg.rows() != 1 || vb.rows() != 1 || vg.cols() != vx.cols() ||
      vb.cols() != vx.cols()) {
    throw DataError("layer_norm shape mismatch: x " + vx.shape_str() +
                    ", gamma " + vg.shape_str() + ", beta " + vb.shape_str());
  }
  const int n = vx.cols();
  Tensor xhat(vx.rows(), n);
  Tensor inv_std(vx.rows(), 1);
  for (int r = 0; r < vx.rows(); ++r) {
    const auto row = M(vx).row(r).array();
    const double mu = row.mean();
    const double var = (row - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    inv_std.at(r, 0) = is;
    M(xhat).row(r).array() = (row - mu) * is;
  }
  Tensor out(vx.rows(), n);
  M(out) = (M(xhat).array().rowwise() * M(vg).row(0).array()).matrix();
  M(out).rowwise() += M(vb).row(0);

  const bool req = nodes_[x].requires_grad || nodes_[gamma].requires_grad ||
                   nodes_[beta].requires_grad;
  return add_node(
      std::move(out), req,
      [x, gamma, beta, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Graph& g, int self) {
        const Tensor& gc = g.nodes_[self].grad;
        if (g.nodes_[beta].requires_grad) {
          M(g.nodes_[beta].grad).row(0) += M(gc).colwise().sum();
        }
        if (g.nodes_[gamma].requires_grad) {
          M(g.nodes_[gamma].grad).row(0) +=
              (M(gc).array() * M(xhat).array()).colwise().sum().matrix();
        }
        if (g.nodes_[x].requires_grad) {
          const auto grow = M(g.nodes_[gamma].value).row(0).array();
          auto gx = M(g.nodes_[x].grad);
          for (int r = 0; r < gc.rows(); ++r) {
            const auto dxhat = M(gc).row(r).array() * grow;
            const auto xh = M(xhat).row(r).array();
            const double m1 = dxhat.mean();
            const double m2 = (dxhat * xh).mean();
            gx.row(r).array() += inv_std.at(r, 0) * (dxhat - m1 - xh * m2);
          }
        }
      });
}

int Graph::embedding_lookup(int table, std::vector<int> ids) {
  const Tensor& vt = nodes_[table].value;
  for (int id : ids) {
    if (id < 0 || id >= vt.rows()) {
      throw DataError("embedding index " + std::to_string(id) +
                      " out of range [0, " + std::to_string(vt.rows()) + ")");
    }
  }
  Tensor out(static_cast<int>(ids.size()), vt.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    M(out).row(static_cast<int>(i)) = M(vt).row(ids[i]);
  }
  return add_node(std::move(out), nodes_[table].requires_grad,
                  [table, ids = std::move(ids)](Graph& g, int self) {
                    auto gt = M(g.nodes_[table].grad);
                    const auto gc = M(g.nodes_[self].grad);
                    for (size_t i = 0; i < ids.size(); ++i) {
                      gt.row(ids[i]) += gc.row(static_cast<int>(i));
                    }
                  });
}

int Graph::concat_rows(int top, int bottom) {
  const Tensor& vt = nodes_[top].value;
  const Tensor& vb = nodes_[bottom].value;
  if (vt.cols() != vb.cols()) {
    throw DataError("concat_rows width mismatch: " + vt.shape_str() + " vs " +
                    vb.shape_str());
  }
  Tensor out(vt.rows() + vb.rows(), vt.cols());
  M(out).topRows(vt.rows()) = M(vt);
  M(out).bottomRows(vb.rows()) = M(vb);
  const bool req = nodes_[top].requires_grad || nodes_[bottom].requires_grad;
  const int tr = vt.rows();
  const int br = vb.rows();
  return add_node(std::move(out), req, [top, bottom, tr, br](Graph& g,
                                                             int self) {
    const Tensor& gc = g.nodes_[self].grad;
    if (g.nodes_[top].requires_grad) {
      M(g.nodes_[top].grad) += M(gc).topRows(tr);
    }
    if (g.nodes_[bottom].requires_grad) {
      M(g.nodes_[bottom].grad) += M(gc).bottomRows(br);
    }
  });
}

int Graph::concat_cols(const std::vector<int>& parts) {
  if (parts.empty()) {
    throw DataError("concat_cols requires at least one part");
  }
  const int rows = nodes_[parts[0]].value.rows();
  int cols = 0;
  bool req = false;
  for (int p : parts) {
    if (nodes_[p].value.rows() != rows) {
      throw DataError("concat_cols height mismatch: " +
                      nodes_[parts[0]].value.shape_str() + " vs " +
                      nodes_[p].value.shape_str());
    }
    cols += nodes_[p].value.cols();
    req = req || nodes_[p].requires_grad;
  }
  Tensor out(rows, cols);
  int off = 0;
  for (int p : parts) {
    const int w = nodes_[p].value.cols();
    M(out).middleCols(off, w) = M(nodes_[p].value);
    off += w;
  }
  return add_node(std::move(out), req,
                  [parts = parts](Graph& g, int self) {
                    const Tensor& gc = g.nodes_[self].grad;
                    int off = 0;
                    for (int p : parts) {
                      const int w = g.nodes_[p].value.cols();
                      if (g.nodes_[p].requires_grad) {
                        M(g.nodes_[p].grad) += M(gc).middleCols(off, w);
                      }
                      off += w;
                    }
                  });
}

int Graph::slice_rows(int a, int r0, int r1) {
  const Tensor& va = nodes_[a].value;
  if (r0 < 0 || r1 > va.rows() || r0 >= r1) {
    throw DataError("slice_rows [" + std::to_string(r0) + ", " +
                    std::to_string(r1) + ") out of range for " +
                    va.shape_str());
  }
  Tensor out(r1 - r0, va.cols());
  M(out) = M(va).middleRows(r0, r1 - r0);
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a, r0, r1](Graph& g, int self) {
                    M(g.nodes_[a].grad).middleRows(r0, r1 - r0) +=
                        M(g.nodes_[self].grad);
                  });
}

int Graph::slice_cols(int a, int c0, int c1) {
  const Tensor& va = nodes_[a].value;
  if (c0 < 0 || c1 > va.cols() || c0 >= c1) {
    throw DataError("slice_cols [" + std::to_string(c0) + ", " +
                    std::to_string(c1) + ") out of range for " +
                    va.shape_str());
  }
  Tensor out(va.rows(), c1 - c0);
  M(out) = M(va).middleCols(c0, c1 - c0);
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a, c0, c1](Graph& g, int self) {
                    M(g.nodes_[a].grad).middleCols(c0, c1 - c0) +=
                        M(g.nodes_[self].grad);
                  });
}

int Graph::row_sum(int a) {
  const Tensor& va = nodes_[a].value;
  Tensor out(va.rows(), 1);
  M(out).col(0) = M(va).rowwise().sum();
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a](Graph& g, int self) {
                    M(g.nodes_[a].grad).colwise() +=
                        M(g.nodes_[self].grad).col(0);
                  });
}

int Graph::masked_mean(int a, std::vector<double> mask) {
  const Tensor& va = nodes_[a].value;
  if (static_cast<int>(mask.size()) != va.rows()) {
    throw DataError("masked_mean mask length " + std::to_string(mask.size()) +
                    " does not match " + va.shape_str());
  }
  double total = 0.0;
  for (double m : mask) total += m;
  if (total <= 0.0) {
    throw DataError("masked_mean requires a mask with at least one valid row");
  }
  const double inv = 1.0 / total;
  Tensor out(1, va.cols());
  for (int r = 0; r < va.rows(); ++r) {
    if (mask[r] != 0.0) {
      M(out).row(0) += mask[r] * M(va).row(r);
    }
  }
  M(out).row(0) *= inv;
  return add_node(std::move(out), nodes_[a].requires_grad,
                  [a, mask = std::move(mask), inv](Graph& g, int self) {
                    auto ga = M(g.nodes_[a].grad);
                    const auto gc = M(g.nodes_[self].grad);
                    for (size_t r = 0; r < mask.size(); ++r) {
                      if (mask[r] != 0.0) {
                        ga.row(static_cast<int>(r)) +=
                            (mask[r] * inv) * gc.row(0);
                      }
                    }
                  });
}

int Graph::bce_with_logits(int logits, Tensor targets) {
  const Tensor& vz = nodes_[logits].value;
  if (vz.shape() != targets.shape()) {
    throw DataError("bce_with_logits shape mismatch: " + vz.shape_str() +
                    " vs " + targets.shape_str());
  }
  Tensor out(vz.rows(), vz.cols());
  for (size_t i = 0; i < vz.size(); ++i) {
    const double z = vz.data()[i];
    const double s = targets.data()[i];
    out.data()[i] =
        std::max(z, 0.0) - z * s + std::log1p(std::exp(-std::abs(z)));
  }
  return add_node(std::move(out), nodes_[logits].requires_grad,
                  [logits, targets = std::move(targets)](Graph& g, int self) {
                    const Tensor& vz = g.nodes_[logits].value;
                    auto gz = g.nodes_[logits].grad.data();
                    const auto gc = g.nodes_[self].grad.data();
                    for (size_t i = 0; i < vz.size(); ++i) {
                      gz[i] += gc[i] * (sigmoid_stable(vz.data()[i]) -
                                        targets.data()[i]);
                    }
                  });
}

double grad_check(const GraphFn& build, const std::vector<Tensor>& inputs,
                  double eps) {
  Graph g;
  std::vector<int> ids;
  ids.reserve(inputs.size());
  for (const auto& t : inputs) {
    ids.push_back(g.leaf(t, true));
  }
  const int out = build(g, ids);
  if (g.value(out).rows() != 1 || g.value(out).cols() != 1) {
    throw DataError("grad_check requires a scalar-valued graph");
  }
  if (!std::isfinite(g.value(out).item())) {
    throw NumericalError("grad_check: non-finite function value");
  }
  g.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(ids.size());
  for (int id : ids) {
    analytic.push_back(g.grad(id));
  }

  auto eval = [&](const std::vector<Tensor>& xs) {
    Graph g2;
    std::vector<int> ids2;
    ids2.reserve(xs.size());
    for (const auto& t : xs) {
      ids2.push_back(g2.leaf(t, false));
    }
    const double v = g2.value(build(g2, ids2)).item();
    if (!std::isfinite(v)) {
      throw NumericalError("grad_check: non-finite function value");
    }
    return v;
  };

  double max_rel = 0.0;
  std::vector<Tensor> xs = inputs;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = xs[i].data()[j];
      xs[i].data()[j] = orig + eps;
      const double fp = eval(xs);
      xs[i].data()[j] = orig - eps;
      const double fm = eval(xs);
      xs[i].data()[j] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic_v = analytic[i].data()[j];
      if (!std::isfinite(numeric) || !std::isfinite(analytic_v)) {
        throw NumericalError("grad_check: non-finite gradient");
      }
      const double rel =
          std::abs(analytic_v - numeric) /
          std::max({1.0, std::abs(analytic_v), std::abs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

void AdamState::init_like(std::span<const Tensor* const> params) {
  m.clear();
  v.clear();
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.emplace_back(p->rows(), p->cols());
    v.emplace_back(p->rows(), p->cols());
  }
  step = 0;
}

namespace {

bool adam_preflight(std::span<Tensor* const> params,
                    std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw DataError("adamw: params/grads count mismatch");
  }
  if (!state.initialized()) {
    std::vector<const Tensor*> view(params.begin(), params.end());
    state.init_like(view);
  }
  if (state.m.size() != params.size()) {
    throw DataError("adamw: optimizer state does not match params");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape()) {
      throw DataError("adamw: grad shape " + grads[i].shape_str() +
                      " does not match param " + params[i]->shape_str());
    }
    if (!grads[i].all_finite()) {
      return false;  // skip the step, caller reports
    }
  }
  return true;
}

}  // namespace

bool adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                AdamState& state, const AdamConfig& cfg) {
  if (!adam_preflight(params, grads, state)) {
    return false;
  }
  state.step += 1;
  const double inv_bc1 = 1.0 / (1.0 - std::pow(cfg.beta1, state.step));
  const double inv_bc2 = 1.0 / (1.0 - std::pow(cfg.beta2, state.step));
  const double lw = cfg.lr * cfg.weight_decay;
  for (size_t p = 0; p < params.size(); ++p) {
    auto m = A(state.m[p]);
    auto v = A(state.v[p]);
    const auto gr = A(grads[p]);
    auto w = A(*params[p]);
    // Statements stay decomposed so the scalar-loop twin is bit-identical.
    m *= cfg.beta1;
    Eigen::ArrayXd t1 = (1.0 - cfg.beta1) * gr;
    m += t1;
    v *= cfg.beta2;
    Eigen::ArrayXd t2 = gr * gr;
    t2 *= (1.0 - cfg.beta2);
    v += t2;
    Eigen::ArrayXd mhat = m * inv_bc1;
    Eigen::ArrayXd vhat = v * inv_bc2;
    Eigen::ArrayXd denom = vhat.sqrt();
    denom += cfg.eps;
    Eigen::ArrayXd upd = mhat / denom;
    upd *= cfg.lr;
    Eigen::ArrayXd wd = w * lw;
    w -= upd;
    w -= wd;
  }
  return true;
}

bool adamw_step_loop(std::span<Tensor* const> params,
                     std::span<const Tensor> grads, AdamState& state,
                     const AdamConfig& cfg) {
  if (!adam_preflight(params, grads, state)) {
    return false;
  }
  state.step += 1;
  const double inv_bc1 = 1.0 / (1.0 - std::pow(cfg.beta1, state.step));
  const double inv_bc2 = 1.0 / (1.0 - std::pow(cfg.beta2, state.step));
  const double lw = cfg.lr * cfg.weight_decay;
  for (size_t p = 0; p < params.size(); ++p) {
    double* m = state.m[p].data();
    double* v = state.v[p].data();
    const double* gr = grads[p].data();
    double* w = params[p]->data();
    const size_t n = params[p]->size();
    for (size_t i = 0; i < n; ++i) {
      m[i] *= cfg.beta1;
      const double t1 = (1.0 - cfg.beta1) * gr[i];
      m[i] += t1;
      v[i] *= cfg.beta2;
      double t2 = gr[i] * gr[i];
      t2 *= (1.0 - cfg.beta2);
      v[i] += t2;
      const double mhat = m[i] * inv_bc1;
      const double vhat = v[i] * inv_bc2;
      double denom = std::sqrt(vhat);
      denom += cfg.eps;
      double upd = mhat / denom;
      upd *= cfg.lr;
      const double wd = w[i] * lw;
      w[i] -= upd;
      w[i] -= wd;
    }
  }
  return true;
}

}  // namespace ctcsim
