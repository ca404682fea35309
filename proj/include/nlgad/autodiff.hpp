#pragma once

// Minimal define-by-run reverse-mode differentiation over dense matrices.
//
// A Tape records every operation executed through it together with a
// backward closure. Tape::backward seeds d(loss)/d(loss) = 1 and replays the
// closures in exact reverse order, skipping records whose output does not
// feed the loss. Parameters are leaf tensors that outlive tapes; their
// gradients accumulate until zero_grad().

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace nlgad::ad {

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::uint64_t reach_mark = 0;

  Matrix& ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix(value.rows(), value.cols());
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor scalar(double v) { return constant(Matrix(1, 1, v)); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  /// Direct access for optimizers and finite-difference probes.
  Matrix& value_mut() { return node_->value; }
  const Matrix& grad() const { return node_->ensure_grad(); }
  Matrix& grad_mut() { return node_->ensure_grad(); }
  void zero_grad() { node_->ensure_grad().fill(0.0); }

  bool requires_grad() const noexcept { return node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const {
    if (rows() != 1 || cols() != 1) throw DimensionError("item() on " + value().shape_string());
    return node_->value[0];
  }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  friend class Tape;
  Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  using Backward = std::function<void(const Node& out)>;

  Tape() : id_(next_id()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Wraps `value` as the output of an operation on `inputs`. The closure is
  /// kept only if some input requires a gradient.
  Tensor record(Matrix value, std::initializer_list<Tensor> inputs, Backward backward) {
    bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    auto out = std::make_shared<Node>();
    out->value = std::move(value);
    out->requires_grad = needs;
    if (needs) {
      Record r;
      r.output = out;
      for (const auto& t : inputs) r.inputs.push_back(t.node());
      r.backward = std::move(backward);
      records_.push_back(std::move(r));
    }
    return Tensor(std::move(out));
  }

  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }

  void backward(const Tensor& loss) {
    if (consumed_) throw InternalError("tape already consumed by a previous backward()");
    if (loss.rows() != 1 || loss.cols() != 1)
      throw DimensionError("backward() needs a scalar loss, got " + loss.value().shape_string());
    consumed_ = true;
    if (!loss.requires_grad()) return;

    Node* root = loss.node().get();
    root->ensure_grad()[0] += 1.0;
    root->reach_mark = id_;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->output->reach_mark != id_) continue;
      for (auto& in : it->inputs)
        if (in->requires_grad) in->reach_mark = id_;
      it->output->ensure_grad();
      it->backward(*it->output);
    }
    records_.clear();
  }

 private:
  struct Record {
    std::shared_ptr<Node> output;
    std::vector<std::shared_ptr<Node>> inputs;
    Backward backward;
  };

  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  std::uint64_t id_;
  bool consumed_ = false;
  std::vector<Record> records_;
};

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

namespace kernel {

/// c += a * b
inline void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = c.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

/// c += a * b^T
inline void gemm_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = c.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += pa[i * k + p] * pb[j * k + p];
      pc[i * n + j] += s;
    }
}

/// c += a^T * b
inline void gemm_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = c.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = pb + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      double* crow = pc + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace kernel

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": " + a.value().shape_string() + " vs " + b.value().shape_string());
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + a.value().shape_string() + " vs " + b.value().shape_string());
  Matrix out(a.rows(), b.cols());
  kernel::gemm_acc(a.value(), b.value(), out);
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return tape.record(std::move(out), {a, b}, [na, nb](const Node& o) {
    const Matrix& g = o.grad;
    if (na->requires_grad) kernel::gemm_nt_acc(g, nb->value, na->ensure_grad());
    if (nb->requires_grad) kernel::gemm_tn_acc(na->value, g, nb->ensure_grad());
  });
}

/// a + b, where b has a's shape or is a 1 x cols row broadcast over a's rows.
inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!broadcast) detail::require_same_shape("add", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b.value()(broadcast ? 0 : i, j);
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return tape.record(std::move(out), {a, b}, [na, nb, broadcast](const Node& o) {
    const Matrix& g = o.grad;
    if (na->requires_grad) {
      auto& ga = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (nb->requires_grad) {
      auto& gb = nb->ensure_grad();
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(broadcast ? 0 : i, j) += g(i, j);
    }
  });
}

inline Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return tape.record(std::move(out), {a, b}, [na, nb](const Node& o) {
    const Matrix& g = o.grad;
    if (na->requires_grad) {
      auto& ga = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (nb->requires_grad) {
      auto& gb = nb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

/// Elementwise product.
inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return tape.record(std::move(out), {a, b}, [na, nb](const Node& o) {
    const Matrix& g = o.grad;
    if (na->requires_grad) {
      auto& ga = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb->value[i];
    }
    if (nb->requires_grad) {
      auto& gb = nb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * na->value[i];
    }
  });
}

inline Tensor scale(Tape& tape, const Tensor& a, double s) {
  Matrix out = a.value();
  for (auto& x : out.values()) x *= s;
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na, s](const Node& o) {
    const Matrix& g = o.grad;
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

inline Tensor add_scalar(Tape& tape, const Tensor& a, double s) {
  Matrix out = a.value();
  for (auto& x : out.values()) x += s;
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na](const Node& o) {
    const Matrix& g = o.grad;
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

inline Tensor relu(Tape& tape, const Tensor& a) {
  Matrix out = a.value();
  for (auto& x : out.values()) x = x > 0.0 ? x : 0.0;
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na](const Node& o) {
    const Matrix& g = o.grad;
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (na->value[i] > 0.0) ga[i] += g[i];
  });
}

inline Tensor sigmoid(Tape& tape, const Tensor& a) {
  Matrix out = a.value();
  for (auto& x : out.values()) x = detail::stable_sigmoid(x);
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na](const Node& o) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double s = o.value[i];
      ga[i] += o.grad[i] * s * (1.0 - s);
    }
  });
}

inline Tensor transpose(Tape& tape, const Tensor& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a.value()(i, j);
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na](const Node& o) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += o.grad(j, i);
  });
}

/// Sum of all entries, as a 1 x 1 tensor.
inline Tensor sum(Tape& tape, const Tensor& a) {
  double s = 0.0;
  for (double x : a.value().values()) s += x;
  Node* na = a.node().get();
  return tape.record(Matrix(1, 1, s), {a}, [na](const Node& o) {
    auto& ga = na->ensure_grad();
    const double g = o.grad[0];
    for (auto& x : ga.values()) x += g;
  });
}

/// Mean over consecutive groups of `block` rows: (k*block x n) -> (k x n).
inline Tensor block_row_mean(Tape& tape, const Tensor& a, std::size_t block) {
  if (block == 0 || a.rows() % block != 0)
    throw DimensionError("block_row_mean: " + a.value().shape_string() + " not divisible into blocks of " +
                         std::to_string(block));
  const std::size_t groups = a.rows() / block, n = a.cols();
  const double inv = 1.0 / static_cast<double>(block);
  Matrix out(groups, n);
  for (std::size_t gi = 0; gi < groups; ++gi)
    for (std::size_t r = 0; r < block; ++r) {
      auto src = a.value().row(gi * block + r);
      auto dst = out.row(gi);
      for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
  for (auto& x : out.values()) x *= inv;
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na, block, inv](const Node& o) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < ga.rows(); ++i) {
      auto src = o.grad.row(i / block);
      auto dst = ga.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += inv * src[j];
    }
  });
}

/// Mean over all rows: (m x n) -> (1 x n).
inline Tensor row_mean(Tape& tape, const Tensor& a) { return block_row_mean(tape, a, a.rows()); }

/// Applies a fixed (non-differentiable) c x c matrix to each consecutive block
/// of c rows of `h`: out[block b] = blocks[b] * h[block b].
inline Tensor block_aggregate(Tape& tape, std::shared_ptr<const std::vector<Matrix>> blocks, const Tensor& h) {
  if (blocks->empty()) throw DimensionError("block_aggregate: no blocks");
  const std::size_t c = blocks->front().rows();
  for (const auto& b : *blocks)
    if (b.rows() != c || b.cols() != c) throw DimensionError("block_aggregate: blocks must all be square and equal size");
  if (h.rows() != blocks->size() * c)
    throw DimensionError("block_aggregate: " + std::to_string(blocks->size()) + " blocks of " + std::to_string(c) +
                         " vs " + h.value().shape_string());
  const std::size_t n = h.cols();
  Matrix out(h.rows(), n);
  for (std::size_t b = 0; b < blocks->size(); ++b) {
    const Matrix& adj = (*blocks)[b];
    for (std::size_t i = 0; i < c; ++i) {
      auto dst = out.row(b * c + i);
      for (std::size_t k = 0; k < c; ++k) {
        const double w = adj(i, k);
        if (w == 0.0) continue;
        auto src = h.value().row(b * c + k);
        for (std::size_t j = 0; j < n; ++j) dst[j] += w * src[j];
      }
    }
  }
  Node* nh = h.node().get();
  return tape.record(std::move(out), {h}, [nh, blocks, c](const Node& o) {
    auto& gh = nh->ensure_grad();
    for (std::size_t b = 0; b < blocks->size(); ++b) {
      const Matrix& adj = (*blocks)[b];
      for (std::size_t i = 0; i < c; ++i) {
        auto src = o.grad.row(b * c + i);
        for (std::size_t k = 0; k < c; ++k) {
          const double w = adj(i, k);
          if (w == 0.0) continue;
          auto dst = gh.row(b * c + k);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
        }
      }
    }
  });
}

/// Selects rows by index (repeats allowed).
inline Tensor gather_rows(Tape& tape, const Tensor& a, std::vector<std::size_t> index) {
  for (auto i : index)
    if (i >= a.rows()) throw DimensionError("gather_rows: index " + std::to_string(i) + " vs " + a.value().shape_string());
  Matrix out(index.size(), a.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    auto src = a.value().row(index[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  Node* na = a.node().get();
  return tape.record(std::move(out), {a}, [na, index = std::move(index)](const Node& o) {
    auto& ga = na->ensure_grad();
    for (std::size_t r = 0; r < index.size(); ++r) {
      auto src = o.grad.row(r);
      auto dst = ga.row(index[r]);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  });
}

/// Per-row inner products: (m x n), (m x n) -> (m x 1).
inline Tensor rowwise_dot(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require_same_shape("rowwise_dot", a, b);
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto x = a.value().row(i);
    auto y = b.value().row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += x[j] * y[j];
    out(i, 0) = s;
  }
  Node* na = a.node().get();
  Node* nb = b.node().get();
  return tape.record(std::move(out), {a, b}, [na, nb](const Node& o) {
    for (std::size_t i = 0; i < o.grad.rows(); ++i) {
      const double g = o.grad(i, 0);
      if (na->requires_grad) {
        auto dst = na->ensure_grad().row(i);
        auto y = nb->value.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g * y[j];
      }
      if (nb->requires_grad) {
        auto dst = nb->ensure_grad().row(i);
        auto x = na->value.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g * x[j];
      }
    }
  });
}

/// Row-wise bilinear similarity sigmoid(z_i W e_i^T): (m x k), (k x k), (m x k) -> (m x 1).
inline Tensor bilinear(Tape& tape, const Tensor& z, const Tensor& w, const Tensor& e) {
  if (w.rows() != w.cols() || z.cols() != w.rows())
    throw DimensionError("bilinear: z " + z.value().shape_string() + " W " + w.value().shape_string());
  detail::require_same_shape("bilinear", z, e);
  return sigmoid(tape, rowwise_dot(tape, matmul(tape, z, w), e));
}

inline constexpr double kBceClamp = 1e-7;

/// Summed binary cross-entropy of an (m x 1) score column against 0/1 labels.
/// Scores are clamped to [1e-7, 1 - 1e-7]; the clamp's derivative is zero
/// outside that band.
inline Tensor bce_loss(Tape& tape, const Tensor& scores, std::span<const double> labels) {
  if (labels.empty()) throw ConfigError("bce_loss: empty batch");
  if (scores.cols() != 1 || scores.rows() != labels.size())
    throw DimensionError("bce_loss: scores " + scores.value().shape_string() + " vs " + std::to_string(labels.size()) +
                         " labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double s = std::clamp(scores.value()[i], kBceClamp, 1.0 - kBceClamp);
    loss -= labels[i] * std::log(s) + (1.0 - labels[i]) * std::log(1.0 - s);
  }
  Node* ns = scores.node().get();
  std::vector<double> y(labels.begin(), labels.end());
  return tape.record(Matrix(1, 1, loss), {scores}, [ns, y = std::move(y)](const Node& o) {
    auto& gs = ns->ensure_grad();
    const double g = o.grad[0];
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double s = ns->value[i];
      if (s < kBceClamp || s > 1.0 - kBceClamp) continue;
      gs[i] += g * (-y[i] / s + (1.0 - y[i]) / (1.0 - s));
    }
  });
}

inline Tensor bce_loss(Tape& tape, const Tensor& scores, double label) {
  std::vector<double> y(scores.rows(), label);
  return bce_loss(tape, scores, y);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamOptions opts) : options(opts) {}
};

/// One bias-corrected Adam update over `params`, then zeroes their gradients.
inline void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.rows(), p.cols());
      state.second_moment.emplace_back(p.rows(), p.cols());
    }
  }
  if (state.first_moment.size() != params.size()) throw InternalError("adam_step: parameter set changed");
  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& w = params[k].value_mut();
    Matrix& g = params[k].grad_mut();
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    if (m.rows() != w.rows() || m.cols() != w.cols()) throw InternalError("adam_step: moment shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
    g.fill(0.0);
  }
}

}  // namespace nlgad::ad
