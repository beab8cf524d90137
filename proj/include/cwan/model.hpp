#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwan/data.hpp"
#include "cwan/tape.hpp"
#include "cwan/tensor.hpp"

namespace cwan {

/// Fully connected layer: weight (in x out) and bias (out).
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

/// Two-layer feature transformer into the common subspace. The output
/// layer is absent when the model shares one output layer across domains.
struct TransformerParams {
  DenseLayer hidden;
  std::optional<DenseLayer> output;

  std::size_t input_dim() const { return hidden.in(); }
};

struct DiscriminatorParams {
  DenseLayer hidden;
  DenseLayer output;  // 2 outputs: source vs. target
};

/// Every learnable parameter of the network.
struct CwanParams {
  std::vector<TransformerParams> sources;
  TransformerParams target;
  DenseLayer classifier;
  DiscriminatorParams discriminator;
  bool shared_output = false;

  std::size_t num_sources() const { return sources.size(); }
  std::size_t embedding_dim() const { return classifier.in(); }
  std::size_t num_classes() const { return classifier.out(); }

  /// Output layer used by source k, or by the target when k == num_sources().
  const DenseLayer& output_layer(std::size_t k) const {
    if (k == sources.size() || shared_output) return *target.output;
    return *sources.at(k).output;
  }
  const DenseLayer& hidden_layer(std::size_t k) const {
    return k == sources.size() ? target.hidden : sources.at(k).hidden;
  }

  void validate() const {
    if (sources.empty()) throw ConfigError("model needs at least one source transformer");
    if (!target.output) throw ConfigError("target transformer has no output layer");
    const DenseLayer& ref = *target.output;
    auto check_layer = [](const DenseLayer& l, const std::string& what) {
      if (l.weight.rank() != 2 || l.bias.rank() != 1 || l.bias.cols() != l.weight.cols()) {
        throw DimensionError(what + ": malformed layer " + l.weight.shape_string() + " / " +
                             l.bias.shape_string());
      }
    };
    check_layer(target.hidden, "target hidden");
    check_layer(ref, "target output");
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const auto& s = sources[k];
      check_layer(s.hidden, "source hidden");
      if (shared_output == s.output.has_value()) {
        throw ConfigError("source " + std::to_string(k + 1) +
                          (shared_output ? " owns an output layer in shared mode"
                                         : " is missing its output layer"));
      }
      const DenseLayer& o = output_layer(k);
      if (!o.weight.same_shape(ref.weight) || !o.bias.same_shape(ref.bias)) {
        throw DimensionError("second layers differ in shape across domains");
      }
      if (s.hidden.out() != o.in()) throw DimensionError("source hidden/output widths disagree");
    }
    if (target.hidden.out() != ref.in()) throw DimensionError("target hidden/output widths disagree");
    check_layer(classifier, "classifier");
    if (classifier.in() != ref.out()) throw DimensionError("classifier input must equal d_c");
    check_layer(discriminator.hidden, "discriminator hidden");
    check_layer(discriminator.output, "discriminator output");
    if (discriminator.hidden.in() != ref.out()) throw DimensionError("discriminator input must equal d_c");
    if (discriminator.output.out() != 2) throw DimensionError("discriminator must have 2 outputs");
  }

  /// Parameters of the transformers and classifier, in a fixed order.
  std::vector<Tensor*> feature_classifier_tensors() {
    std::vector<Tensor*> out;
    auto push = [&](DenseLayer& l) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    };
    for (auto& s : sources) {
      push(s.hidden);
      if (s.output) push(*s.output);
    }
    push(target.hidden);
    push(*target.output);
    push(classifier);
    return out;
  }

  std::vector<Tensor*> discriminator_tensors() {
    return {&discriminator.hidden.weight, &discriminator.hidden.bias, &discriminator.output.weight,
            &discriminator.output.bias};
  }
};

/// Domain labels for the discriminator: sources [1,0], target [0,1];
/// the inverted label swaps the two components.
struct DomainLabeling {
  enum class Role { source, target };

  static Tensor true_label(Role r) {
    return r == Role::source ? Tensor::vector({1.0, 0.0}) : Tensor::vector({0.0, 1.0});
  }
  static Tensor inverted_label(Role r) {
    return true_label(r == Role::source ? Role::target : Role::source);
  }
  /// n copies of the (possibly inverted) label as an n x 2 matrix.
  static Tensor rows(Role r, std::size_t n, bool inverted) {
    const Tensor z = inverted ? inverted_label(r) : true_label(r);
    Tensor out = Tensor::zeros({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      out(i, 0) = z[0];
      out(i, 1) = z[1];
    }
    return out;
  }
};

/// Per-source divergences and the weights derived from them.
struct SourceWeightState {
  std::vector<double> deltas;
  std::vector<double> weights;
};

inline Tensor onehot(std::span<const int> labels, int classes) {
  Tensor y = Tensor::zeros({labels.size(), static_cast<std::size_t>(classes)});
  for (std::size_t i = 0; i < labels.size(); ++i) y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return y;
}

/// Row-wise softmax.
inline Tensor softmax_rows(const Tensor& logits) {
  Tensor p = Tensor::zeros(logits.shape());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double m = logits(i, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) m = std::max(m, logits(i, c));
    double s = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) s += (p(i, c) = std::exp(logits(i, c) - m));
    for (std::size_t c = 0; c < logits.cols(); ++c) p(i, c) /= s;
  }
  return p;
}

/// Index of the largest entry per row; ties go to the lowest index.
inline std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape bindings
// ---------------------------------------------------------------------------

struct LayerVars {
  Var weight;
  Var bias;
};

struct TransformerVars {
  LayerVars hidden;
  LayerVars output;
};

struct CwanVars {
  std::vector<TransformerVars> sources;
  TransformerVars target;
  LayerVars classifier;
  LayerVars disc_hidden;
  LayerVars disc_output;
  bool shared_output = false;
};

/// Which parameter group is differentiated on a tape.
enum class Trainable { none, feature_classifier, discriminator, all };

/// Places every parameter on `tape`. In shared-output mode all transformers
/// reference the single target output-layer leaf.
inline CwanVars bind(Tape& tape, const CwanParams& p, Trainable which) {
  const bool fg = which == Trainable::feature_classifier || which == Trainable::all;
  const bool d = which == Trainable::discriminator || which == Trainable::all;
  auto leaf = [&](const Tensor& t, bool grad) { return grad ? tape.parameter(t) : tape.constant(t); };
  auto layer = [&](const DenseLayer& l, bool grad) {
    return LayerVars{leaf(l.weight, grad), leaf(l.bias, grad)};
  };
  CwanVars v;
  v.shared_output = p.shared_output;
  std::vector<LayerVars> hidden;
  for (const auto& s : p.sources) hidden.push_back(layer(s.hidden, fg));
  v.target.hidden = layer(p.target.hidden, fg);
  v.target.output = layer(*p.target.output, fg);
  for (std::size_t k = 0; k < p.sources.size(); ++k) {
    TransformerVars t;
    t.hidden = hidden[k];
    t.output = p.shared_output ? v.target.output : layer(*p.sources[k].output, fg);
    v.sources.push_back(t);
  }
  v.classifier = layer(p.classifier, fg);
  v.disc_hidden = layer(p.discriminator.hidden, d);
  v.disc_output = layer(p.discriminator.output, d);
  return v;
}

/// Gradients of the transformer and classifier parameters, ordered like
/// CwanParams::feature_classifier_tensors().
inline std::vector<Tensor> feature_classifier_gradients(const Gradients& g, const CwanVars& v) {
  std::vector<Tensor> out;
  auto push = [&](const LayerVars& l) {
    out.push_back(g[l.weight]);
    out.push_back(g[l.bias]);
  };
  for (const auto& s : v.sources) {
    push(s.hidden);
    if (!v.shared_output) push(s.output);
  }
  push(v.target.hidden);
  push(v.target.output);
  push(v.classifier);
  return out;
}

inline std::vector<Tensor> discriminator_gradients(const Gradients& g, const CwanVars& v) {
  return {g[v.disc_hidden.weight], g[v.disc_hidden.bias], g[v.disc_output.weight], g[v.disc_output.bias]};
}

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

/// leaky_relu(leaky_relu(x W1 + b1) W2 + b2)
inline Var transform(const TransformerVars& t, Var x, double slope) {
  if (x.value().cols() != t.hidden.weight.value().rows()) {
    throw DimensionError("transform: input width " + std::to_string(x.value().cols()) +
                         " but transformer expects " + std::to_string(t.hidden.weight.value().rows()));
  }
  Var h = leaky_relu(matmul_affine(x, t.hidden.weight, t.hidden.bias), slope);
  return leaky_relu(matmul_affine(h, t.output.weight, t.output.bias), slope);
}

/// Linear label classifier producing logits.
inline Var classify(const LayerVars& f, Var emb) {
  if (emb.value().cols() != f.weight.value().rows()) {
    throw DimensionError("classify: embedding width " + std::to_string(emb.value().cols()) +
                         " but classifier expects " + std::to_string(f.weight.value().rows()));
  }
  return matmul_affine(emb, f.weight, f.bias);
}

inline Var discriminate(const LayerVars& hidden, const LayerVars& output, Var emb) {
  if (emb.value().cols() != hidden.weight.value().rows()) {
    throw DimensionError("discriminate: embedding width " + std::to_string(emb.value().cols()) +
                         " but discriminator expects " + std::to_string(hidden.weight.value().rows()));
  }
  return matmul_affine(relu(matmul_affine(emb, hidden.weight, hidden.bias)), output.weight, output.bias);
}

inline Tensor transform(const TransformerParams& p, const Tensor& x, double slope) {
  if (!p.output) throw ConfigError("transform: transformer has no own output layer");
  Tape tape;
  TransformerVars t{{tape.constant(p.hidden.weight), tape.constant(p.hidden.bias)},
                    {tape.constant(p.output->weight), tape.constant(p.output->bias)}};
  return transform(t, tape.constant(x), slope).value();
}

/// Embedding of `x` through domain slot k (k == num_sources() is the target).
inline Tensor embed(const CwanParams& p, std::size_t k, const Tensor& x, double slope) {
  const DenseLayer& h = p.hidden_layer(k);
  const DenseLayer& o = p.output_layer(k);
  return transform(TransformerParams{h, o}, x, slope);
}

inline Tensor classify(const DenseLayer& f, const Tensor& emb) {
  Tape tape;
  return classify(LayerVars{tape.constant(f.weight), tape.constant(f.bias)}, tape.constant(emb)).value();
}

inline Tensor discriminate(const DiscriminatorParams& d, const Tensor& emb) {
  Tape tape;
  return discriminate(LayerVars{tape.constant(d.hidden.weight), tape.constant(d.hidden.bias)},
                      LayerVars{tape.constant(d.output.weight), tape.constant(d.output.bias)},
                      tape.constant(emb))
      .value();
}

/// Classifier soft labels for target samples: softmax(f(g_t(x))).
inline Tensor soft_labels(const CwanParams& p, const Tensor& target_x, double slope) {
  return softmax_rows(classify(p.classifier, embed(p, p.num_sources(), target_x, slope)));
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LgNorm { l1, l2 };

/// Disagreement between each source's second layer and the target's,
/// over weight and bias together. l2 is the squared Euclidean norm.
inline Var loss_lg(Tape& tape, const CwanVars& v, LgNorm norm) {
  std::vector<Var> terms;
  auto dist = [&](Var a, Var b) {
    Var diff = sub(a, b);
    return norm == LgNorm::l1 ? abs_sum(diff) : sum_squares(diff);
  };
  for (const auto& s : v.sources) {
    terms.push_back(dist(s.output.weight, v.target.output.weight));
    terms.push_back(dist(s.output.bias, v.target.output.bias));
  }
  if (terms.empty()) return tape.constant(Tensor::scalar(0.0));
  return add_n(terms);
}

/// Per-class sample count as a C x n indicator matrix.
inline Tensor class_indicator(std::span<const int> labels, int classes) {
  Tensor a = Tensor::zeros({static_cast<std::size_t>(classes), labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) a(static_cast<std::size_t>(labels[i]), i) = 1.0;
  return a;
}

/**
 * Class-conditional mean discrepancy between source k and the target.
 *
 * The target mean of class c blends the labeled class-c embeddings with
 * every unlabeled embedding weighted by its soft label for c. The soft
 * labels enter as constants. Returns (1/C) sum_c ||target_mean_c - source_mean_c||^2.
 */
inline Var conditional_mmd(Var source_emb, std::span<const int> source_labels, Var labeled_emb,
                           std::span<const int> labeled_labels, Var unlabeled_emb,
                           const Tensor& soft, int classes, std::size_t source_index = 0) {
  const std::size_t d = source_emb.value().cols();
  if (labeled_emb.value().cols() != d || unlabeled_emb.value().cols() != d) {
    throw DimensionError("conditional_mmd: embedding widths differ");
  }
  if (source_labels.size() != source_emb.value().rows() ||
      labeled_labels.size() != labeled_emb.value().rows()) {
    throw DimensionError("conditional_mmd: label count does not match embeddings");
  }
  const std::size_t nu = unlabeled_emb.value().rows();
  const std::size_t c_count = static_cast<std::size_t>(classes);
  if (soft.rows() != nu || (nu > 0 && soft.cols() != c_count)) {
    throw DimensionError("conditional_mmd: soft labels must be n_u x C");
  }
  for (std::size_t i = 0; i < nu; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) s += soft(i, c);
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError("conditional_mmd: soft-label row " + std::to_string(i) + " sums to " +
                            std::to_string(s));
    }
  }

  const std::size_t nl = labeled_labels.size();
  const Tensor src_ind = class_indicator(source_labels, classes);
  const Tensor lab_ind = nl > 0 ? class_indicator(labeled_labels, classes) : Tensor::zeros({c_count, 1});
  Tensor src_scale = Tensor::zeros({c_count});
  Tensor tgt_scale = Tensor::zeros({c_count});
  for (std::size_t c = 0; c < c_count; ++c) {
    const double ns = src_ind.mat().row(static_cast<Eigen::Index>(c)).sum();
    if (ns == 0.0) {
      throw ConfigError("source " + std::to_string(source_index + 1) + " has no samples of class " +
                        std::to_string(c));
    }
    double denom = nl > 0 ? lab_ind.mat().row(static_cast<Eigen::Index>(c)).sum() : 0.0;
    for (std::size_t i = 0; i < nu; ++i) denom += soft(i, c);
    if (!(denom > 0.0)) {
      throw ConfigError("target class " + std::to_string(c) + " has zero total (soft) mass");
    }
    src_scale[c] = 1.0 / ns;
    tgt_scale[c] = 1.0 / denom;
  }

  Var src_mean = scale_rows(left_matmul(src_ind, source_emb), src_scale);
  std::vector<Var> tgt_terms;
  if (nl > 0) tgt_terms.push_back(left_matmul(lab_ind, labeled_emb));
  if (nu > 0) {
    Tensor soft_t = Tensor::zeros({c_count, nu});
    soft_t.mat() = soft.mat().transpose();
    tgt_terms.push_back(left_matmul(soft_t, unlabeled_emb));
  }
  if (tgt_terms.empty()) throw ConfigError("conditional_mmd: target has no samples");
  Var tgt_sum = tgt_terms.size() == 1 ? tgt_terms[0] : add(tgt_terms[0], tgt_terms[1]);
  Var tgt_mean = scale_rows(tgt_sum, tgt_scale);
  return scale(sum_squares(sub(tgt_mean, src_mean)), 1.0 / static_cast<double>(classes));
}

/// Value-level conditional_mmd.
inline double conditional_mmd(const Tensor& source_emb, std::span<const int> source_labels,
                              const Tensor& labeled_emb, std::span<const int> labeled_labels,
                              const Tensor& unlabeled_emb, const Tensor& soft, int classes,
                              std::size_t source_index = 0) {
  Tape tape;
  return conditional_mmd(tape.constant(source_emb), source_labels, tape.constant(labeled_emb),
                         labeled_labels, tape.constant(unlabeled_emb), soft, classes, source_index)
      .value()
      .item();
}

/// w_k = (1/(K-1)) sum_{j != k} sigma(delta_j); a single source gets weight 1.
inline SourceWeightState source_weights(std::span<const double> deltas) {
  const std::size_t k_count = deltas.size();
  if (k_count == 0) throw ConfigError("source_weights: no sources");
  for (double d : deltas) {
    if (!std::isfinite(d) || d < 0.0) throw ValidationError("source_weights: deltas must be finite and >= 0");
  }
  SourceWeightState st{std::vector<double>(deltas.begin(), deltas.end()), std::vector<double>(k_count, 1.0)};
  if (k_count == 1) return st;
  std::vector<double> sig(k_count);
  for (std::size_t j = 0; j < k_count; ++j) sig[j] = logistic(deltas[j]);
  for (std::size_t k = 0; k < k_count; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < k_count; ++j) {
      if (j != k) s += sig[j];
    }
    st.weights[k] = s / static_cast<double>(k_count - 1);
  }
  return st;
}

/// Tape form of source_weights, differentiable through every delta_j.
inline std::vector<Var> source_weights(Tape& tape, std::span<const Var> deltas) {
  const std::size_t k_count = deltas.size();
  if (k_count == 0) throw ConfigError("source_weights: no sources");
  if (k_count == 1) return {tape.constant(Tensor::scalar(1.0))};
  std::vector<Var> sig;
  for (const Var& d : deltas) sig.push_back(sigmoid(d));
  std::vector<Var> w;
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<Var> others;
    for (std::size_t j = 0; j < k_count; ++j) {
      if (j != k) others.push_back(sig[j]);
    }
    w.push_back(scale(add_n(others), 1.0 / static_cast<double>(k_count - 1)));
  }
  return w;
}

/// Embeddings of every sample in a task.
struct Embeddings {
  std::vector<Var> sources;
  Var target_labeled;
  Var target_unlabeled;
};

inline Embeddings embed_task(Tape& tape, const CwanVars& v, const MultiSourceTask& task, double slope) {
  if (task.sources.size() != v.sources.size()) {
    throw ConfigError("task has " + std::to_string(task.sources.size()) + " sources, model has " +
                      std::to_string(v.sources.size()));
  }
  Embeddings e;
  for (std::size_t k = 0; k < task.sources.size(); ++k) {
    e.sources.push_back(transform(v.sources[k], tape.constant(task.sources[k].features), slope));
  }
  e.target_labeled = transform(v.target, tape.constant(task.target_labeled.features), slope);
  e.target_unlabeled = transform(v.target, tape.constant(task.target_unlabeled.features), slope);
  return e;
}

/// Divergence nodes delta_k for every source.
inline std::vector<Var> source_divergences(const Embeddings& e, const MultiSourceTask& task,
                                           const Tensor& soft) {
  std::vector<Var> deltas;
  for (std::size_t k = 0; k < task.sources.size(); ++k) {
    deltas.push_back(conditional_mmd(e.sources[k], *task.sources[k].labels, e.target_labeled,
                                     *task.target_labeled.labels, e.target_unlabeled, soft,
                                     task.classes, k));
  }
  return deltas;
}

/// Sum of squared weight-matrix entries of the classifier and every transformer.
inline Var weight_decay(Tape& tape, const CwanVars& v) {
  (void)tape;
  std::vector<Var> terms{sum_squares(v.classifier.weight), sum_squares(v.target.hidden.weight),
                         sum_squares(v.target.output.weight)};
  for (const auto& s : v.sources) {
    terms.push_back(sum_squares(s.hidden.weight));
    if (!v.shared_output) terms.push_back(sum_squares(s.output.weight));
  }
  return add_n(terms);
}

/// Weighted classification loss over sources and labeled target, plus tau-scaled weight decay.
inline Var loss_fg_w(Tape& tape, const CwanVars& v, const Embeddings& e, const MultiSourceTask& task,
                     std::span<const Var> weights, double tau) {
  if (weights.size() != task.sources.size()) throw DimensionError("loss_fg_w: one weight per source");
  std::vector<Var> terms;
  for (std::size_t k = 0; k < task.sources.size(); ++k) {
    const auto& src = task.sources[k];
    if (!src.labels) throw ValidationError("source " + std::to_string(k + 1) + " is missing labels");
    Var ce = softmax_cross_entropy(classify(v.classifier, e.sources[k]), onehot(*src.labels, task.classes));
    terms.push_back(mul_scalar(weights[k], ce));
  }
  if (!task.target_labeled.labels) throw ValidationError("labeled target split is missing labels");
  terms.push_back(softmax_cross_entropy(classify(v.classifier, e.target_labeled),
                                        onehot(*task.target_labeled.labels, task.classes)));
  if (tau != 0.0) terms.push_back(scale(weight_decay(tape, v), tau));
  return add_n(terms);
}

/// Weighted domain-discrimination loss with true (inverted = false) or
/// swapped (inverted = true) domain labels.
inline Var loss_dg_w(Tape& tape, const CwanVars& v, const Embeddings& e, std::span<const Var> weights,
                     bool inverted) {
  using Role = DomainLabeling::Role;
  if (weights.size() != e.sources.size()) throw DimensionError("loss_dg_w: one weight per source");
  auto se = [&](Var emb, Role role) {
    const std::size_t n = emb.value().rows();
    Var out = discriminate(v.disc_hidden, v.disc_output, emb);
    return squared_error(out, tape.constant(DomainLabeling::rows(role, n, inverted)));
  };
  std::vector<Var> terms;
  for (std::size_t k = 0; k < e.sources.size(); ++k) {
    terms.push_back(mul_scalar(weights[k], se(e.sources[k], Role::source)));
  }
  const double nl = static_cast<double>(e.target_labeled.value().rows());
  const double nu = static_cast<double>(e.target_unlabeled.value().rows());
  const double nt = nl + nu;
  terms.push_back(scale(se(e.target_labeled, Role::target), nl / nt));
  if (nu > 0) terms.push_back(scale(se(e.target_unlabeled, Role::target), nu / nt));
  return add_n(terms);
}

struct ObjectiveWeights {
  double beta = 0.03;
  double tau = 0.004;
  std::optional<LgNorm> lg;  // no L_g term when empty
};

/// Terms of the transformer/classifier objective.
struct FgObjective {
  Var classification;  // weighted classification loss incl. weight decay
  Var lg;              // parameter disagreement (0 when disabled)
  Var dg_inverted;     // inverted-label discrimination loss
  Var total;
};

/// classification + L_g + beta * inverted discrimination loss; minimized over transformers and classifier.
inline FgObjective objective_fg(Tape& tape, const CwanVars& v, const Embeddings& e,
                                const MultiSourceTask& task, std::span<const Var> weights,
                                const ObjectiveWeights& ow) {
  if (ow.beta < 0.0 || ow.tau < 0.0) throw ConfigError("objective_fg: beta and tau must be >= 0");
  FgObjective o;
  o.classification = loss_fg_w(tape, v, e, task, weights, ow.tau);
  o.lg = ow.lg ? loss_lg(tape, v, *ow.lg) : tape.constant(Tensor::scalar(0.0));
  o.dg_inverted = loss_dg_w(tape, v, e, weights, true);
  std::vector<Var> terms{o.classification, o.lg};
  if (ow.beta != 0.0) terms.push_back(scale(o.dg_inverted, ow.beta));
  o.total = add_n(terms);
  return o;
}

/// Discriminator objective: weighted discrimination loss with true labels.
inline Var objective_d(Tape& tape, const CwanVars& v, const Embeddings& e, std::span<const Var> weights) {
  return loss_dg_w(tape, v, e, weights, false);
}

}  // namespace cwan
