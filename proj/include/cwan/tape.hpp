#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cwan/tensor.hpp"

namespace cwan {

enum class OpKind {
  leaf,
  affine,
  leaky_relu,
  relu,
  softmax_cross_entropy,
  squared_error,
  add,
  sub,
  scale,
  mul_scalar,
  sum_squares,
  abs_sum,
  sigmoid,
  add_n,
  left_matmul,
  scale_rows,
};

class Tape;
class Gradients;
struct Var;
Gradients backward(Tape& tape, Var loss);

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

/**
 * Ordered record of primitive operations for reverse-mode differentiation.
 *
 * Nodes are appended in evaluation order, so a node's inputs always have
 * smaller ids. Each node keeps its forward rule so the whole graph can be
 * replayed from the leaves.
 */
class Tape {
 public:
  using Inputs = std::span<const Tensor* const>;
  using ForwardFn = std::function<Tensor(Inputs)>;
  /// Returns one gradient per input; entries whose `needs` flag is false are ignored.
  using BackwardFn =
      std::function<std::vector<Tensor>(Inputs, const Tensor& out, const Tensor& grad_out,
                                        const std::vector<bool>& needs)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var parameter(Tensor value) { return push_leaf(std::move(value), true); }
  Var constant(Tensor value) { return push_leaf(std::move(value), false); }

  Var apply(OpKind op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward) {
    Node node;
    node.op = op;
    for (const Var& v : inputs) {
      check_owned(v);
      node.inputs.push_back(v.id);
      node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }
    auto in = input_values(node.inputs);
    node.value = forward(std::span<const Tensor* const>(in));
    node.value.check_finite();
    node.forward = std::move(forward);
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  const Tensor& value(Var v) const {
    check_owned(v);
    return nodes_[v.id].value;
  }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  OpKind op(Var v) const { return nodes_[v.id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Recomputes every non-leaf node from the leaves and reports whether
  /// each saved activation is reproduced exactly.
  bool replay_matches() const {
    std::vector<Tensor> replayed;
    replayed.reserve(nodes_.size());
    for (const Node& n : nodes_) {
      if (n.op == OpKind::leaf) {
        replayed.push_back(n.value);
        continue;
      }
      std::vector<const Tensor*> in;
      for (std::size_t i : n.inputs) in.push_back(&replayed[i]);
      replayed.push_back(n.forward(std::span<const Tensor* const>(in)));
      if (!(replayed.back() == n.value)) return false;
    }
    return true;
  }

 private:
  friend Gradients backward(Tape& tape, Var loss);

  struct Node {
    OpKind op = OpKind::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    ForwardFn forward;
    BackwardFn backward;
  };

  Var push_leaf(Tensor value, bool requires_grad) {
    value.check_finite();
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var{this, nodes_.size() - 1};
  }

  void check_owned(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw ValidationError("variable does not belong to this tape");
    }
  }

  std::vector<const Tensor*> input_values(const std::vector<std::size_t>& ids) const {
    std::vector<const Tensor*> in;
    in.reserve(ids.size());
    for (std::size_t i : ids) in.push_back(&nodes_[i].value);
    return in;
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

/// Gradients of one scalar loss with respect to every node of a tape.
class Gradients {
 public:
  /// Gradient for `v`; zeros when `v` does not reach the loss.
  Tensor operator[](Var v) const {
    if (v.id < grads_.size() && grads_[v.id]) return *grads_[v.id];
    return Tensor::zeros(shapes_.at(v.id));
  }

 private:
  friend Gradients backward(Tape& tape, Var loss);
  std::vector<std::optional<Tensor>> grads_;
  std::vector<std::vector<std::size_t>> shapes_;
};

/// Reverse-mode accumulation from a scalar loss node.
inline Gradients backward(Tape& tape, Var loss) {
  tape.check_owned(loss);
  const Tensor& lv = tape.value(loss);
  if (lv.numel() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + lv.shape_string());
  }
  Gradients g;
  const std::size_t n = tape.nodes_.size();
  g.grads_.assign(n, std::nullopt);
  g.shapes_.reserve(n);
  for (const auto& node : tape.nodes_) g.shapes_.push_back(node.value.shape());

  g.grads_[loss.id] = Tensor::filled(lv.shape(), 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& node = tape.nodes_[id];
    if (!g.grads_[id] || !node.requires_grad || node.op == OpKind::leaf) continue;
    std::vector<bool> needs;
    for (std::size_t i : node.inputs) needs.push_back(tape.nodes_[i].requires_grad);
    auto in = tape.input_values(node.inputs);
    auto input_grads =
        node.backward(std::span<const Tensor* const>(in), node.value, *g.grads_[id], needs);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!needs[k]) continue;
      const std::size_t dst = node.inputs[k];
      if (g.grads_[dst]) {
        g.grads_[dst]->mat() += input_grads[k].mat();
      } else {
        g.grads_[dst] = std::move(input_grads[k]);
      }
    }
  }
  return g;
}

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

inline Tensor like(const Tensor& t) { return Tensor::zeros(t.shape()); }

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor out = like(x);
  auto src = x.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace detail

/// out[i,j] = sum_k x[i,k] W[k,j] + b[j]
inline Var matmul_affine(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.cols() != wv.rows() || bv.rank() != 1 ||
      bv.cols() != wv.cols()) {
    throw DimensionError("matmul_affine: incompatible shapes x" + xv.shape_string() + " W" +
                         wv.shape_string() + " b" + bv.shape_string());
  }
  auto fwd = [](Tape::Inputs in) {
    const Tensor& x = *in[0];
    const Tensor& w = *in[1];
    const Tensor& b = *in[2];
    Tensor out = Tensor::zeros({x.rows(), w.cols()});
    out.mat().noalias() = x.mat() * w.mat();
    out.mat().rowwise() += b.mat().row(0);
    return out;
  };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>& needs) {
    const Tensor& x = *in[0];
    const Tensor& w = *in[1];
    std::vector<Tensor> out(3);
    if (needs[0]) {
      out[0] = Tensor::zeros(x.shape());
      out[0].mat().noalias() = g.mat() * w.mat().transpose();
    }
    if (needs[1]) {
      out[1] = Tensor::zeros(w.shape());
      out[1].mat().noalias() = x.mat().transpose() * g.mat();
    }
    if (needs[2]) {
      out[2] = Tensor::zeros({w.cols()});
      out[2].mat() = g.mat().colwise().sum();
    }
    return out;
  };
  return x.tape->apply(OpKind::affine, {x, w, b}, fwd, bwd);
}

/// Elementwise max(x, slope * x).
inline Var leaky_relu(Var x, double slope) {
  if (!(slope >= 0.0)) throw ValidationError("leaky_relu: slope must be non-negative");
  auto fwd = [slope](Tape::Inputs in) {
    return detail::map(*in[0], [slope](double v) { return v >= slope * v ? v : slope * v; });
  };
  auto bwd = [slope](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    const Tensor& x = *in[0];
    Tensor gx = detail::like(x);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      gx[i] = g[i] * (x[i] >= slope * x[i] ? 1.0 : slope);
    }
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::leaky_relu, {x}, fwd, bwd);
}

inline Var relu(Var x) {
  auto fwd = [](Tape::Inputs in) {
    return detail::map(*in[0], [](double v) { return v > 0.0 ? v : 0.0; });
  };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    const Tensor& x = *in[0];
    Tensor gx = detail::like(x);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] = x[i] > 0.0 ? g[i] : 0.0;
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::relu, {x}, fwd, bwd);
}

/// Checks that every row of `y` is one-hot.
inline void validate_onehot(const Tensor& y) {
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const double v = y(i, c);
      if (v != 0.0 && v != 1.0) {
        throw ValidationError("row " + std::to_string(i) + " is not one-hot");
      }
      sum += v;
    }
    if (sum != 1.0) throw ValidationError("row " + std::to_string(i) + " is not one-hot");
  }
}

/// Mean over rows of the cross-entropy between softmax(logits) and one-hot targets.
inline Var softmax_cross_entropy(Var logits, const Tensor& onehot) {
  const Tensor& lv = logits.value();
  if (lv.rank() != 2 || !lv.same_shape(onehot)) {
    throw DimensionError("softmax_cross_entropy: logits " + lv.shape_string() + " vs labels " +
                         onehot.shape_string());
  }
  if (lv.rows() == 0) throw DimensionError("softmax_cross_entropy: empty batch");
  validate_onehot(onehot);
  auto fwd = [onehot](Tape::Inputs in) {
    const Tensor& z = *in[0];
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double m = z(i, 0);
      for (std::size_t c = 1; c < z.cols(); ++c) m = std::max(m, z(i, c));
      double s = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) s += std::exp(z(i, c) - m);
      const double lse = m + std::log(s);
      for (std::size_t c = 0; c < z.cols(); ++c) total += onehot(i, c) * (lse - z(i, c));
    }
    return Tensor::scalar(total / static_cast<double>(z.rows()));
  };
  auto bwd = [onehot](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    const Tensor& z = *in[0];
    Tensor gz = detail::like(z);
    const double scale = g.item() / static_cast<double>(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double m = z(i, 0);
      for (std::size_t c = 1; c < z.cols(); ++c) m = std::max(m, z(i, c));
      double s = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) s += std::exp(z(i, c) - m);
      for (std::size_t c = 0; c < z.cols(); ++c) {
        gz(i, c) = scale * (std::exp(z(i, c) - m) / s - onehot(i, c));
      }
    }
    return std::vector<Tensor>{std::move(gz)};
  };
  return logits.tape->apply(OpKind::softmax_cross_entropy, {logits}, fwd, bwd);
}

/// Mean over rows of the squared Euclidean distance between rows.
inline Var squared_error(Var pred, Var label) {
  const Tensor& p = pred.value();
  const Tensor& l = label.value();
  detail::require_same_shape(p, l, "squared_error");
  if (p.rows() == 0) throw DimensionError("squared_error: empty batch");
  auto fwd = [](Tape::Inputs in) {
    const double n = static_cast<double>(in[0]->rows());
    return Tensor::scalar((in[0]->mat() - in[1]->mat()).squaredNorm() / n);
  };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>& needs) {
    const double k = 2.0 * g.item() / static_cast<double>(in[0]->rows());
    std::vector<Tensor> out(2);
    Tensor d = detail::like(*in[0]);
    d.mat() = k * (in[0]->mat() - in[1]->mat());
    if (needs[1]) {
      out[1] = d;
      out[1].mat() *= -1.0;
    }
    out[0] = std::move(d);
    return out;
  };
  return pred.tape->apply(OpKind::squared_error, {pred, label}, fwd, bwd);
}

inline Var add(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "add");
  auto fwd = [](Tape::Inputs in) {
    Tensor out = *in[0];
    out.mat() += in[1]->mat();
    return out;
  };
  auto bwd = [](Tape::Inputs, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g, g};
  };
  return a.tape->apply(OpKind::add, {a, b}, fwd, bwd);
}

inline Var sub(Var a, Var b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  auto fwd = [](Tape::Inputs in) {
    Tensor out = *in[0];
    out.mat() -= in[1]->mat();
    return out;
  };
  auto bwd = [](Tape::Inputs, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    Tensor neg = g;
    neg.mat() *= -1.0;
    return std::vector<Tensor>{g, std::move(neg)};
  };
  return a.tape->apply(OpKind::sub, {a, b}, fwd, bwd);
}

/// Multiplies by a fixed constant.
inline Var scale(Var x, double c) {
  auto fwd = [c](Tape::Inputs in) {
    Tensor out = *in[0];
    out.mat() *= c;
    return out;
  };
  auto bwd = [c](Tape::Inputs, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    Tensor gx = g;
    gx.mat() *= c;
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::scale, {x}, fwd, bwd);
}

/// Scalar node `s` times tensor `x`.
inline Var mul_scalar(Var s, Var x) {
  if (!s.value().is_scalar()) throw DimensionError("mul_scalar: first operand must be scalar");
  auto fwd = [](Tape::Inputs in) {
    Tensor out = *in[1];
    out.mat() *= in[0]->item();
    return out;
  };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> out(2);
    if (needs[0]) out[0] = Tensor::scalar(g.mat().cwiseProduct(in[1]->mat()).sum());
    if (needs[1]) {
      out[1] = g;
      out[1].mat() *= in[0]->item();
    }
    return out;
  };
  return s.tape->apply(OpKind::mul_scalar, {s, x}, fwd, bwd);
}

/// Sum of squared entries.
inline Var sum_squares(Var x) {
  auto fwd = [](Tape::Inputs in) { return Tensor::scalar(in[0]->mat().squaredNorm()); };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    Tensor gx = *in[0];
    gx.mat() *= 2.0 * g.item();
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::sum_squares, {x}, fwd, bwd);
}

/// Sum of absolute entries; the subgradient at 0 is 0.
inline Var abs_sum(Var x) {
  auto fwd = [](Tape::Inputs in) { return Tensor::scalar(in[0]->mat().cwiseAbs().sum()); };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    const double k = g.item();
    Tensor gx = detail::map(*in[0], [k](double v) { return v > 0.0 ? k : (v < 0.0 ? -k : 0.0); });
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::abs_sum, {x}, fwd, bwd);
}

/// Logistic function e^x / (1 + e^x), evaluated without overflow.
inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var x) {
  auto fwd = [](Tape::Inputs in) { return detail::map(*in[0], logistic); };
  auto bwd = [](Tape::Inputs, const Tensor& out, const Tensor& g, const std::vector<bool>&) {
    Tensor gx = detail::like(out);
    for (std::size_t i = 0; i < out.numel(); ++i) gx[i] = g[i] * out[i] * (1.0 - out[i]);
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::sigmoid, {x}, fwd, bwd);
}

/// Elementwise sum of same-shaped nodes, accumulated left to right.
inline Var add_n(std::span<const Var> xs) {
  if (xs.empty()) throw ValidationError("add_n: no operands");
  for (const Var& v : xs) detail::require_same_shape(xs[0].value(), v.value(), "add_n");
  auto fwd = [](Tape::Inputs in) {
    Tensor out = *in[0];
    for (std::size_t i = 1; i < in.size(); ++i) out.mat() += in[i]->mat();
    return out;
  };
  auto bwd = [](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>(in.size(), g);
  };
  return xs[0].tape->apply(OpKind::add_n, std::vector<Var>(xs.begin(), xs.end()), fwd, bwd);
}

/// Constant matrix A (m x n) times node x (n x d).
inline Var left_matmul(const Tensor& a, Var x) {
  const Tensor& xv = x.value();
  if (a.rank() != 2 || xv.rank() != 2 || a.cols() != xv.rows()) {
    throw DimensionError("left_matmul: incompatible shapes A" + a.shape_string() + " x" +
                         xv.shape_string());
  }
  auto fwd = [a](Tape::Inputs in) {
    Tensor out = Tensor::zeros({a.rows(), in[0]->cols()});
    out.mat().noalias() = a.mat() * in[0]->mat();
    return out;
  };
  auto bwd = [a](Tape::Inputs in, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    Tensor gx = detail::like(*in[0]);
    gx.mat().noalias() = a.mat().transpose() * g.mat();
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::left_matmul, {x}, fwd, bwd);
}

/// Row i of x multiplied by the constant s[i].
inline Var scale_rows(Var x, const Tensor& s) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || s.rank() != 1 || s.cols() != xv.rows()) {
    throw DimensionError("scale_rows: incompatible shapes x" + xv.shape_string() + " s" +
                         s.shape_string());
  }
  auto fwd = [s](Tape::Inputs in) {
    Tensor out = *in[0];
    for (std::size_t i = 0; i < out.rows(); ++i) out.mat().row(static_cast<Eigen::Index>(i)) *= s[i];
    return out;
  };
  auto bwd = [s](Tape::Inputs, const Tensor&, const Tensor& g, const std::vector<bool>&) {
    Tensor gx = g;
    for (std::size_t i = 0; i < gx.rows(); ++i) gx.mat().row(static_cast<Eigen::Index>(i)) *= s[i];
    return std::vector<Tensor>{std::move(gx)};
  };
  return x.tape->apply(OpKind::scale_rows, {x}, fwd, bwd);
}

}  // namespace cwan
