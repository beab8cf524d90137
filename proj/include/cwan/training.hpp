#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cwan/adam.hpp"
#include "cwan/data.hpp"
#include "cwan/model.hpp"
#include "cwan/tape.hpp"

namespace cwan {

enum class LgMode { l1, l2, off, tied };
enum class Weighting { conditional, ones };

inline std::string to_string(LgMode m) {
  switch (m) {
    case LgMode::l1: return "l1";
    case LgMode::l2: return "l2";
    case LgMode::off: return "off";
    case LgMode::tied: return "tied";
  }
  return "?";
}

inline std::string to_string(Weighting w) { return w == Weighting::conditional ? "conditional" : "ones"; }

inline LgMode parse_lg_mode(const std::string& s) {
  if (s == "l1") return LgMode::l1;
  if (s == "l2") return LgMode::l2;
  if (s == "off") return LgMode::off;
  if (s == "tied") return LgMode::tied;
  throw ConfigError("unknown L_g mode '" + s + "' (expected l1, l2, off or tied)");
}

inline Weighting parse_weighting(const std::string& s) {
  if (s == "conditional") return Weighting::conditional;
  if (s == "ones") return Weighting::ones;
  throw ConfigError("unknown weighting '" + s + "' (expected conditional or ones)");
}

struct TrainConfig {
  double beta = 0.03;
  double tau = 0.004;
  std::size_t d_c = 256;
  std::size_t hidden = 256;
  double lr_fg = 0.004;
  double lr_d = 0.001;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  LgMode lg_norm = LgMode::l1;
  Weighting weighting = Weighting::conditional;
  double leaky_slope = 0.01;
  std::size_t eval_every = 1;

  void validate() const {
    if (!(beta >= 0.0) || !(tau >= 0.0)) throw ConfigError("beta and tau must be >= 0");
    if (d_c == 0 || hidden == 0) throw ConfigError("d_c and hidden width must be positive");
    if (!(lr_fg > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be >= 0");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
  }
};

/// Input widths of every domain and the class count.
struct TaskShape {
  std::vector<std::size_t> source_dims;
  std::size_t target_dim = 0;
  int classes = 0;

  static TaskShape of(const MultiSourceTask& t) {
    TaskShape s;
    for (const auto& d : t.sources) s.source_dims.push_back(d.dim());
    s.target_dim = t.target_labeled.dim();
    s.classes = t.classes;
    return s;
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases. Each
/// component draws from its own stream derived from config.seed, so the
/// target and classifier initialization does not depend on the sources.
inline CwanParams init_params(const TaskShape& shape, const TrainConfig& config) {
  config.validate();
  if (shape.target_dim == 0 || shape.classes <= 0) throw ConfigError("init_params: dimensions must be positive");
  auto layer = [](std::mt19937_64& rng, std::size_t in, std::size_t out) {
    if (in == 0) throw ConfigError("init_params: dimensions must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l{Tensor::zeros({in, out}), Tensor::zeros({out})};
    for (auto& v : l.weight.values()) v = u(rng);
    return l;
  };
  CwanParams p;
  p.shared_output = config.lg_norm == LgMode::tied;
  {
    std::mt19937_64 rng(derive_seed(config.seed, 0));
    p.target.hidden = layer(rng, shape.target_dim, config.hidden);
    p.target.output = layer(rng, config.hidden, config.d_c);
  }
  {
    std::mt19937_64 rng(derive_seed(config.seed, 1));
    p.classifier = layer(rng, config.d_c, static_cast<std::size_t>(shape.classes));
  }
  {
    std::mt19937_64 rng(derive_seed(config.seed, 2));
    p.discriminator.hidden = layer(rng, config.d_c, config.d_c);
    p.discriminator.output = layer(rng, config.d_c, 2);
  }
  for (std::size_t k = 0; k < shape.source_dims.size(); ++k) {
    std::mt19937_64 rng(derive_seed(config.seed, 3 + k));
    TransformerParams t;
    t.hidden = layer(rng, shape.source_dims[k], config.hidden);
    if (!p.shared_output) t.output = layer(rng, config.hidden, config.d_c);
    p.sources.push_back(std::move(t));
  }
  return p;
}

/// The two independent optimizers: {f, g} and d.
struct Optimizers {
  AdamState feature_classifier;
  AdamState discriminator;

  static Optimizers make(CwanParams& p, const TrainConfig& c) {
    auto fg = p.feature_classifier_tensors();
    auto d = p.discriminator_tensors();
    std::vector<const Tensor*> fgc(fg.begin(), fg.end());
    std::vector<const Tensor*> dc(d.begin(), d.end());
    return {AdamState(AdamOptions{.learning_rate = c.lr_fg}, fgc),
            AdamState(AdamOptions{.learning_rate = c.lr_d}, dc)};
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double loss_fg = 0.0;
  double loss_lg = 0.0;
  double loss_dg_inverted = 0.0;
  double loss_d = 0.0;
  std::vector<double> deltas;
  std::vector<double> weights;
  std::vector<double> source_accuracy;
  std::optional<double> target_accuracy;
};

struct TrainTrace {
  std::vector<IterationRecord> records;
  CwanParams final_params;
};

inline double accuracy(const std::vector<int>& predicted, std::span<const int> truth) {
  if (truth.empty()) throw ConfigError("accuracy: empty evaluation set");
  if (predicted.size() != truth.size()) throw DimensionError("accuracy: prediction/label count mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Fraction of target samples whose argmax class matches the ground truth.
inline double evaluate_accuracy(const CwanParams& p, const Tensor& target_x, std::span<const int> truth,
                                double slope) {
  if (truth.empty()) throw ConfigError("evaluate_accuracy: empty evaluation set");
  const Tensor logits = classify(p.classifier, embed(p, p.num_sources(), target_x, slope));
  return accuracy(argmax_rows(logits), truth);
}

inline double evaluate_accuracy(const CwanParams& p, const MultiSourceTask& task, double slope) {
  return evaluate_accuracy(p, task.target_unlabeled.features, task.held_out.reveal_for_evaluation(), slope);
}

inline ObjectiveWeights objective_weights(const TrainConfig& c) {
  ObjectiveWeights ow;
  ow.beta = c.beta;
  ow.tau = c.tau;
  if (c.lg_norm == LgMode::l1) ow.lg = LgNorm::l1;
  if (c.lg_norm == LgMode::l2) ow.lg = LgNorm::l2;
  return ow;
}

namespace detail {

inline LayerVars constant_layer(Tape& tape, const DenseLayer& l) {
  return {tape.constant(l.weight), tape.constant(l.bias)};
}

inline Embeddings constant_embeddings(Tape& tape, const Embeddings& e) {
  Embeddings c;
  for (const Var& s : e.sources) c.sources.push_back(tape.constant(s.value()));
  c.target_labeled = tape.constant(e.target_labeled.value());
  c.target_unlabeled = tape.constant(e.target_unlabeled.value());
  return c;
}

}  // namespace detail

/**
 * One alternating iteration:
 *  1. soft labels for the unlabeled target from the current model;
 *  2. divergences and source weights (all ones under Weighting::ones);
 *  3. an Adam step on d with {f, g} and the weights held constant;
 *  4. an Adam step on {f, g} with d held constant, differentiating
 *     through the divergences and weights.
 * The embeddings from step 1 are reused in step 4 since d's update does not move g.
 */
inline IterationRecord train_step(CwanParams& params, Optimizers& opt, const MultiSourceTask& task,
                                  const TrainConfig& config, std::size_t iteration = 0) {
  const std::size_t k_count = task.sources.size();
  IterationRecord rec;
  rec.iteration = iteration;

  Tape tape;
  CwanVars v = bind(tape, params, Trainable::feature_classifier);
  const Embeddings emb = embed_task(tape, v, task, config.leaky_slope);

  const Tensor soft = softmax_rows(classify(params.classifier, emb.target_unlabeled.value()));
  const std::vector<Var> deltas = source_divergences(emb, task, soft);
  std::vector<Var> weights;
  if (config.weighting == Weighting::conditional) {
    weights = source_weights(tape, deltas);
  } else {
    for (std::size_t k = 0; k < k_count; ++k) weights.push_back(tape.constant(Tensor::scalar(1.0)));
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    rec.deltas.push_back(deltas[k].value().item());
    rec.weights.push_back(weights[k].value().item());
    const Tensor logits = classify(params.classifier, emb.sources[k].value());
    rec.source_accuracy.push_back(accuracy(argmax_rows(logits), *task.sources[k].labels));
  }

  // Discriminator step.
  {
    Tape dtape;
    CwanVars dv;
    dv.disc_hidden = {dtape.parameter(params.discriminator.hidden.weight),
                      dtape.parameter(params.discriminator.hidden.bias)};
    dv.disc_output = {dtape.parameter(params.discriminator.output.weight),
                      dtape.parameter(params.discriminator.output.bias)};
    const Embeddings de = detail::constant_embeddings(dtape, emb);
    std::vector<Var> dw;
    for (const Var& w : weights) dw.push_back(dtape.constant(w.value()));
    const Var loss_d = objective_d(dtape, dv, de, dw);
    rec.loss_d = loss_d.value().item();
    const Gradients g = backward(dtape, loss_d);
    const std::vector<Tensor> grads = discriminator_gradients(g, dv);
    adam_step(opt.discriminator, params.discriminator_tensors(), grads);
  }

  // Transformer + classifier step against the updated discriminator.
  v.disc_hidden = detail::constant_layer(tape, params.discriminator.hidden);
  v.disc_output = detail::constant_layer(tape, params.discriminator.output);
  const FgObjective obj = objective_fg(tape, v, emb, task, weights, objective_weights(config));
  rec.loss_fg = obj.classification.value().item();
  rec.loss_lg = obj.lg.value().item();
  rec.loss_dg_inverted = obj.dg_inverted.value().item();
  const Gradients g = backward(tape, obj.total);
  const std::vector<Tensor> grads = feature_classifier_gradients(g, v);
  adam_step(opt.feature_classifier, params.feature_classifier_tensors(), grads);
  return rec;
}

/// Full-batch alternating training from a seeded initialization.
inline TrainTrace train(const MultiSourceTask& task, const TrainConfig& config) {
  config.validate();
  task.validate();
  if (task.sources.empty()) throw ConfigError("train: need at least one source domain");
  TrainTrace trace;
  trace.final_params = init_params(TaskShape::of(task), config);
  Optimizers opt = Optimizers::make(trace.final_params, config);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    IterationRecord rec = train_step(trace.final_params, opt, task, config, it);
    const bool last = it + 1 == config.iterations;
    if ((it + 1) % config.eval_every == 0 || last) {
      rec.target_accuracy = evaluate_accuracy(trace.final_params, task, config.leaky_slope);
    }
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace cwan
