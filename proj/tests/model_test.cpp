#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "cwan/grad_check.hpp"
#include "cwan/model.hpp"
#include "cwan/training.hpp"
#include "oracles.hpp"

using namespace cwan;

namespace {

DenseLayer layer(std::initializer_list<std::initializer_list<double>> w, std::vector<double> b) {
  return {Tensor::matrix(w), Tensor::vector(std::move(b))};
}

CwanParams small_params(std::vector<std::size_t> source_dims, std::size_t target_dim, std::size_t width,
                        int classes, std::uint64_t seed, LgMode lg = LgMode::l1) {
  TrainConfig c;
  c.d_c = width;
  c.hidden = width;
  c.seed = seed;
  c.lg_norm = lg;
  return init_params(TaskShape{std::move(source_dims), target_dim, classes}, c);
}

Tensor scalar_embedding(std::initializer_list<double> xs) {
  Tensor t = Tensor::zeros({xs.size(), 1});
  std::size_t i = 0;
  for (double x : xs) t(i++, 0) = x;
  return t;
}

}  // namespace

// Networks

TEST(Transform, ZeroParametersGiveZeroEmbedding) {
  TransformerParams p{layer({{0, 0}, {0, 0}, {0, 0}}, {0, 0}), layer({{0}, {0}}, {0})};
  EXPECT_EQ(transform(p, Tensor::matrix({{1, 2, 3}}), 0.01), Tensor::matrix({{0}}));
}

TEST(Transform, PositiveInputPassesThroughUnitLayers) {
  TransformerParams p{layer({{1}}, {0}), layer({{1}}, {0})};
  EXPECT_EQ(transform(p, Tensor::matrix({{2}}), 0.01), Tensor::matrix({{2}}));
}

TEST(Transform, MatchesHandComposition) {
  oracle::Gen gen(5);
  const Tensor x = gen.matrix(3, 4);
  TransformerParams p{{gen.matrix(4, 2), gen.vector(2)}, DenseLayer{gen.matrix(2, 2), gen.vector(2)}};
  auto lrelu = [](double z) { return z > 0 ? z : 0.01 * z; };
  const Tensor out = transform(p, x, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    double h[2];
    for (std::size_t j = 0; j < 2; ++j) {
      double z = p.hidden.bias[j];
      for (std::size_t k = 0; k < 4; ++k) z += x(i, k) * p.hidden.weight(k, j);
      h[j] = lrelu(z);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      double z = p.output->bias[j];
      for (std::size_t k = 0; k < 2; ++k) z += h[k] * p.output->weight(k, j);
      EXPECT_NEAR(out(i, j), lrelu(z), 1e-14);
    }
  }
}

TEST(Transform, WrongInputWidthThrows) {
  TransformerParams p{layer({{1}, {1}}, {0}), layer({{1}}, {0})};
  EXPECT_THROW(transform(p, Tensor::matrix({{1, 2, 3}}), 0.01), DimensionError);
}

TEST(Classify, HandEvaluation) {
  EXPECT_EQ(classify(layer({{2}}, {1}), Tensor::matrix({{3}})), Tensor::matrix({{7}}));
}

TEST(Classify, ZeroParametersGiveUniformSoftLabels) {
  const Tensor logits = classify(layer({{0, 0, 0}, {0, 0, 0}}, {0, 0, 0}), Tensor::matrix({{1, -2}}));
  const Tensor p = softmax_rows(logits);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(p(0, c), 1.0 / 3.0);
}

TEST(Classify, ShiftInvariantWhenColumnSumsVanish) {
  const DenseLayer f = layer({{1, -2}, {-1, 2}}, {0.5, 0});
  const Tensor a = classify(f, Tensor::matrix({{0.3, 0.9}}));
  const Tensor b = classify(f, Tensor::matrix({{5.3, 5.9}}));
  EXPECT_NEAR(a(0, 0), b(0, 0), 1e-12);
  EXPECT_NEAR(a(0, 1), b(0, 1), 1e-12);
}

TEST(Discriminate, HandEvaluationAndReluGate) {
  DiscriminatorParams d{layer({{1, -1}}, {0, 0}), layer({{2, 0}, {5, 1}}, {0.5, -0.5})};
  // hidden = relu([3, -3]) = [3, 0]; output = [6.5, -0.5]
  EXPECT_EQ(discriminate(d, Tensor::matrix({{3}})), Tensor::matrix({{6.5, -0.5}}));
  DiscriminatorParams z{layer({{0}}, {0}), layer({{0, 0}}, {0, 0})};
  EXPECT_EQ(discriminate(z, Tensor::matrix({{3}})), Tensor::matrix({{0, 0}}));
}

TEST(SoftLabels, RowsSumToOne) {
  oracle::Gen gen(9);
  const CwanParams p = small_params({5}, 7, 6, 4, 1);
  const Tensor s = soft_labels(p, gen.matrix(20, 7), 0.01);
  for (std::size_t i = 0; i < 20; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) sum += s(i, c);
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SoftLabels, SaturatedLogitGivesOneHot) {
  const Tensor p = softmax_rows(Tensor::matrix({{0, 0, 800}}));
  EXPECT_EQ(p(0, 2), 1.0);
  EXPECT_EQ(p(0, 0), 0.0);
}

TEST(ArgmaxRows, TiesGoToTheLowestIndex) {
  EXPECT_EQ(argmax_rows(Tensor::matrix({{1, 3, 3}, {2, 2, 2}, {0, -1, 5}})), (std::vector<int>{1, 0, 2}));
}

// Parameter structure

TEST(Params, SecondLayersShareOneShapeAcrossHeterogeneousInputs) {
  const CwanParams p = small_params({3, 9, 4}, 11, 5, 2, 0);
  EXPECT_NO_THROW(p.validate());
  for (std::size_t k = 0; k <= p.num_sources(); ++k) {
    EXPECT_TRUE(p.output_layer(k).weight.same_shape(p.output_layer(0).weight));
  }
  EXPECT_EQ(p.hidden_layer(1).in(), 9u);
  EXPECT_EQ(p.hidden_layer(3).in(), 11u);
}

TEST(Params, TiedModeOwnsExactlyOneSecondLayer) {
  CwanParams p = small_params({3, 4}, 5, 4, 2, 0, LgMode::tied);
  std::size_t owned = 1;
  for (const auto& s : p.sources) owned += s.output ? 1 : 0;
  EXPECT_EQ(owned, 1u);
  EXPECT_EQ(p.feature_classifier_tensors().size(), 2u * 2 + 4 + 2);
  EXPECT_EQ(&p.output_layer(0), &p.output_layer(1));
}

TEST(Params, ValidateCatchesMismatchedSecondLayer) {
  CwanParams p = small_params({3}, 5, 4, 2, 0);
  p.sources[0].output->weight = Tensor::zeros({4, 3});
  EXPECT_THROW(p.validate(), DimensionError);
}

// loss_lg

namespace {

CwanParams lg_params(double offset) {
  // One source and the target with 2x2 second layers.
  CwanParams p = small_params({2}, 2, 2, 2, 0);
  p.target.output = layer({{0.1, 0.2}, {0.3, 0.4}}, {0.5, -0.5});
  p.sources[0].output = *p.target.output;
  for (auto& v : p.sources[0].output->weight.values()) v += offset;
  return p;
}

double lg_value(const CwanParams& p, LgNorm norm) {
  Tape tape;
  return loss_lg(tape, bind(tape, p, Trainable::none), norm).value().item();
}

}  // namespace

TEST(LossLg, TiedSecondLayersGiveZero) {
  EXPECT_EQ(lg_value(lg_params(0.0), LgNorm::l1), 0.0);
  EXPECT_EQ(lg_value(lg_params(0.0), LgNorm::l2), 0.0);
  CwanParams tied = small_params({3, 4}, 5, 4, 2, 0, LgMode::tied);
  EXPECT_EQ(lg_value(tied, LgNorm::l1), 0.0);
}

TEST(LossLg, HandValuesForUniformOffset) {
  EXPECT_NEAR(lg_value(lg_params(0.1), LgNorm::l1), 0.4, 1e-15);
  EXPECT_NEAR(lg_value(lg_params(0.1), LgNorm::l2), 0.04, 1e-15);
}

TEST(LossLg, BiasDifferencesCount) {
  CwanParams p = lg_params(0.0);
  p.sources[0].output->bias[1] += 0.25;
  EXPECT_DOUBLE_EQ(lg_value(p, LgNorm::l1), 0.25);
}

TEST(LossLg, SumsOverSourcesIndependentOfOrder) {
  CwanParams p = small_params({3, 4, 5}, 6, 4, 2, 8);
  const double before = lg_value(p, LgNorm::l1);
  std::swap(p.sources[0], p.sources[2]);
  EXPECT_NEAR(lg_value(p, LgNorm::l1), before, 1e-12);
  EXPECT_GT(before, 0.0);
}

// Conditional MMD

TEST(ConditionalMmd, OneDimensionalOneClass) {
  const double d = conditional_mmd(scalar_embedding({2, 4}), std::vector<int>{0, 0}, scalar_embedding({1}),
                                   std::vector<int>{0}, Tensor::zeros({0, 1}), Tensor::zeros({0, 1}), 1);
  EXPECT_DOUBLE_EQ(d, 4.0);
}

TEST(ConditionalMmd, BlendedTargetMeansCancel) {
  // Source means (1/3, 5/3); target class means blend to the same values.
  const Tensor src = scalar_embedding({0, 1, 0, 5.0 / 3.0});
  const std::vector<int> ys{0, 0, 0, 1};
  const double d = conditional_mmd(src, ys, scalar_embedding({0, 2}), std::vector<int>{0, 1}, scalar_embedding({1}),
                                   Tensor::matrix({{0.5, 0.5}}), 2);
  EXPECT_NEAR(d, 0.0, 1e-15);
}

TEST(ConditionalMmd, CoincidingMeansGiveZero) {
  oracle::Gen gen(2);
  const Tensor e = gen.matrix(6, 3);
  const std::vector<int> y{0, 1, 2, 0, 1, 2};
  EXPECT_NEAR(conditional_mmd(e, y, e, y, Tensor::zeros({0, 3}), Tensor::zeros({0, 3}), 3), 0.0, 1e-15);
}

TEST(ConditionalMmd, EmptySourceClassNamesSourceAndClass) {
  try {
    conditional_mmd(scalar_embedding({1, 2}), std::vector<int>{0, 0}, scalar_embedding({1, 2}),
                    std::vector<int>{0, 1}, Tensor::zeros({0, 1}), Tensor::zeros({0, 2}), 2, 2);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("source 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

TEST(ConditionalMmd, RejectsSoftLabelsOffTheSimplex) {
  EXPECT_THROW(conditional_mmd(scalar_embedding({1}), std::vector<int>{0}, scalar_embedding({1}),
                               std::vector<int>{0}, scalar_embedding({1}), Tensor::matrix({{0.7, 0.7}}), 2),
               ValidationError);
}

TEST(ConditionalMmd, MatchesNaiveOracleOnRandomInstances) {
  oracle::Gen gen(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = gen.integer(1, 5);
    const std::size_t d = static_cast<std::size_t>(gen.integer(1, 8));
    const std::size_t ns = static_cast<std::size_t>(gen.integer(classes, 50));
    const std::size_t nl = static_cast<std::size_t>(gen.integer(0, 20));
    const std::size_t nu = static_cast<std::size_t>(gen.integer(1, 50));
    const Tensor src = gen.matrix(ns, d, 3.0), lab = gen.matrix(nl, d), unl = gen.matrix(nu, d);
    const auto ys = gen.labels(ns, classes), yl = gen.labels(nl, classes);
    const Tensor soft = nu > 0 ? gen.soft_labels(nu, classes) : Tensor::zeros({0, static_cast<std::size_t>(classes)});
    const double fast = conditional_mmd(src, ys, lab, yl, unl, soft, classes);
    EXPECT_NEAR(fast, oracle::naive_mmd(src, ys, lab, yl, unl, soft, classes), 1e-9) << "trial " << trial;
  }
}

// Source weights

TEST(SourceWeights, HandValues) {
  auto w = [](std::vector<double> d) { return source_weights(d).weights; };
  EXPECT_EQ(w({0, 0}), (std::vector<double>{0.5, 0.5}));
  const auto a = w({std::log(3.0), 0.0});
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.75);
  const auto b = w({0.0, std::log(3.0), std::log(3.0)});
  EXPECT_DOUBLE_EQ(b[0], 0.75);
  EXPECT_DOUBLE_EQ(b[1], 0.625);
  EXPECT_DOUBLE_EQ(b[2], 0.625);
}

TEST(SourceWeights, SingleSourceHasUnitWeight) {
  EXPECT_EQ(source_weights(std::vector<double>{17.0}).weights, (std::vector<double>{1.0}));
  Tape tape;
  std::vector<Var> d{tape.parameter(Tensor::scalar(3.0))};
  EXPECT_EQ(source_weights(tape, d)[0].value().item(), 1.0);
}

TEST(SourceWeights, RejectsEmptyAndInvalidDeltas) {
  EXPECT_THROW(source_weights(std::vector<double>{}), ConfigError);
  EXPECT_THROW(source_weights(std::vector<double>{1.0, -0.5}), ValidationError);
  EXPECT_THROW(source_weights(std::vector<double>{1.0, std::nan("")}), ValidationError);
}

TEST(SourceWeights, RangeOrderReversalAndSelfExclusion) {
  oracle::Gen gen(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = static_cast<std::size_t>(gen.integer(2, 6));
    std::vector<double> d;
    while (d.size() < k) {
      const double x = gen.uniform(0.0, 6.0);
      if (std::all_of(d.begin(), d.end(), [&](double y) { return std::abs(x - y) > 1e-6; })) d.push_back(x);
    }
    const auto w = source_weights(d).weights;
    std::vector<std::size_t> by_delta(k), by_weight(k);
    std::iota(by_delta.begin(), by_delta.end(), 0);
    std::iota(by_weight.begin(), by_weight.end(), 0);
    std::sort(by_delta.begin(), by_delta.end(), [&](auto a, auto b) { return d[a] < d[b]; });
    std::sort(by_weight.begin(), by_weight.end(), [&](auto a, auto b) { return w[a] < w[b]; });
    std::reverse(by_weight.begin(), by_weight.end());
    ASSERT_EQ(by_delta, by_weight) << "trial " << trial;
    for (std::size_t i = 0; i < k; ++i) {
      ASSERT_GE(w[i], 0.5);
      ASSERT_LT(w[i], 1.0);
      auto moved = d;
      moved[i] += gen.uniform(0.1, 10.0);
      ASSERT_EQ(source_weights(moved).weights[i], w[i]);
    }
  }
}

TEST(SourceWeights, TapeAndValueFormsAgreeBitwise) {
  oracle::Gen gen(4);
  std::vector<double> d{gen.uniform(0, 3), gen.uniform(0, 3), gen.uniform(0, 3), gen.uniform(0, 3)};
  Tape tape;
  std::vector<Var> dv;
  for (double x : d) dv.push_back(tape.parameter(Tensor::scalar(x)));
  const auto wv = source_weights(tape, dv);
  const auto ws = source_weights(d).weights;
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_EQ(wv[k].value().item(), ws[k]);
}

// Weighted losses

namespace {

struct Bound {
  Tape tape;
  CwanVars v;
  Embeddings e;
};

}  // namespace

TEST(LossDgW, ExactLabelsGiveZeroAndInvertedGiveTwoPerRow) {
  // A discriminator whose output is its input, fed embeddings equal to the labels.
  CwanParams p = small_params({2}, 2, 2, 2, 0);
  p.discriminator.hidden = layer({{1, 0}, {0, 1}}, {0, 0});
  p.discriminator.output = layer({{1, 0}, {0, 1}}, {0, 0});
  Tape tape;
  CwanVars v = bind(tape, p, Trainable::none);
  Embeddings e;
  e.sources = {tape.constant(Tensor::matrix({{1, 0}, {1, 0}})), tape.constant(Tensor::matrix({{1, 0}}))};
  e.target_labeled = tape.constant(Tensor::matrix({{0, 1}}));
  e.target_unlabeled = tape.constant(Tensor::matrix({{0, 1}, {0, 1}}));
  v.sources.push_back(v.sources[0]);
  std::vector<Var> w{tape.constant(Tensor::scalar(0.5)), tape.constant(Tensor::scalar(0.75))};
  EXPECT_EQ(loss_dg_w(tape, v, e, w, false).value().item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_dg_w(tape, v, e, w, true).value().item(), 0.5 * 2 + 0.75 * 2 + 2);
  std::vector<Var> ones{tape.constant(Tensor::scalar(1.0)), tape.constant(Tensor::scalar(0.75))};
  EXPECT_DOUBLE_EQ(loss_dg_w(tape, v, e, ones, true).value().item() - loss_dg_w(tape, v, e, w, true).value().item(),
                   1.0);
}

TEST(DomainLabeling, InvertedLabelSwapsComponents) {
  using R = DomainLabeling::Role;
  EXPECT_EQ(DomainLabeling::true_label(R::source), Tensor::vector({1, 0}));
  EXPECT_EQ(DomainLabeling::inverted_label(R::source), Tensor::vector({0, 1}));
  EXPECT_EQ(DomainLabeling::inverted_label(R::target), Tensor::vector({1, 0}));
}

TEST(LossFgW, SourceWeightScalesItsCrossEntropy) {
  const MultiSourceTask task = oracle::toy_task(3);
  const CwanParams p = small_params({6, 8}, 10, 4, 3, 5);
  Tape tape;
  const CwanVars v = bind(tape, p, Trainable::none);
  const Embeddings e = embed_task(tape, v, task, 0.01);
  auto loss = [&](double w1, double w2) {
    std::vector<Var> w{tape.constant(Tensor::scalar(w1)), tape.constant(Tensor::scalar(w2))};
    return loss_fg_w(tape, v, e, task, w, 0.0).value().item();
  };
  auto ce = [&](std::size_t k) {
    return softmax_cross_entropy(classify(v.classifier, e.sources[k]), onehot(*task.sources[k].labels, 3))
        .value()
        .item();
  };
  // Raising source 2's weight from 1 to 2 adds twice what the same change adds for source 1 at w1 = 0.5.
  EXPECT_NEAR(loss(0.5, 2.0) - loss(0.5, 1.0), ce(1), 1e-12);
  EXPECT_NEAR(loss(1.0, 1.0) - loss(0.5, 1.0), 0.5 * ce(0), 1e-12);
}

TEST(LossFgW, RegularizerIsolation) {
  const MultiSourceTask task = oracle::toy_task(3);
  const CwanParams p = small_params({6, 8}, 10, 4, 3, 5);
  Tape tape;
  const CwanVars v = bind(tape, p, Trainable::none);
  const Embeddings e = embed_task(tape, v, task, 0.01);
  std::vector<Var> w{tape.constant(Tensor::scalar(0.6)), tape.constant(Tensor::scalar(0.8))};
  const double without = loss_fg_w(tape, v, e, task, w, 0.0).value().item();
  const double with = loss_fg_w(tape, v, e, task, w, 0.25).value().item();
  double squares = 0.0;
  auto add = [&](const Tensor& t) {
    for (double x : t.values()) squares += x * x;
  };
  for (const auto& s : p.sources) {
    add(s.hidden.weight);
    add(s.output->weight);
  }
  add(p.target.hidden.weight);
  add(p.target.output->weight);
  add(p.classifier.weight);
  EXPECT_NEAR(with - without, 0.25 * squares, 1e-12);
}

TEST(ObjectiveFg, EqualsIndependentlySummedTerms) {
  const MultiSourceTask task = oracle::toy_task(1, {6, 8}, 10, 1, 3, 1, 3);
  const CwanParams p = small_params({6, 8}, 10, 4, 3, 2);
  Tape tape;
  const CwanVars v = bind(tape, p, Trainable::none);
  const Embeddings e = embed_task(tape, v, task, 0.01);
  std::vector<Var> w{tape.constant(Tensor::scalar(0.7)), tape.constant(Tensor::scalar(0.9))};
  const FgObjective o = objective_fg(tape, v, e, task, w, ObjectiveWeights{0.3, 0.01, LgNorm::l1});
  const double expected = loss_fg_w(tape, v, e, task, w, 0.01).value().item() +
                          loss_lg(tape, v, LgNorm::l1).value().item() +
                          0.3 * loss_dg_w(tape, v, e, w, true).value().item();
  EXPECT_NEAR(o.total.value().item(), expected, 1e-12);
  const FgObjective plain = objective_fg(tape, v, e, task, w, ObjectiveWeights{0.0, 0.01, std::nullopt});
  EXPECT_EQ(plain.total.value().item(), plain.classification.value().item());
}

// Gradients of both objectives, with the weights and divergences on the tape.

namespace {

struct ObjectivePoint {
  MultiSourceTask task;
  CwanParams params;
  Tensor soft;
  std::size_t fg_count = 0;
};

ObjectivePoint objective_point() {
  ObjectivePoint o;
  o.task = oracle::toy_task(12, {5, 7}, 6, 2, 3, 1, 3);
  o.params = small_params({5, 7}, 6, 4, 3, 21);
  o.soft = soft_labels(o.params, o.task.target_unlabeled.features, 0.01);
  o.fg_count = o.params.feature_classifier_tensors().size();
  return o;
}

std::vector<Tensor> flatten(CwanParams& p) {
  std::vector<Tensor> out;
  for (Tensor* t : p.feature_classifier_tensors()) out.push_back(*t);
  for (Tensor* t : p.discriminator_tensors()) out.push_back(*t);
  return out;
}

CwanVars unflatten(std::span<const Var> xs, std::size_t sources) {
  CwanVars v;
  std::size_t i = 0;
  auto next = [&] {
    LayerVars l{xs[i], xs[i + 1]};
    i += 2;
    return l;
  };
  for (std::size_t k = 0; k < sources; ++k) {
    TransformerVars t;
    t.hidden = next();
    t.output = next();
    v.sources.push_back(t);
  }
  v.target.hidden = next();
  v.target.output = next();
  v.classifier = next();
  v.disc_hidden = next();
  v.disc_output = next();
  return v;
}

}  // namespace

TEST(Gradients, ObjectiveFgThroughDivergencesAndWeights) {
  ObjectivePoint o = objective_point();
  const std::size_t samples = o.task.target_labeled.size() + o.task.target_unlabeled.size() +
                              o.task.sources[0].size() + o.task.sources[1].size();
  ASSERT_LE(samples, 30u);
  ScalarFn fn = [&](Tape& tape, std::span<const Var> xs) {
    const CwanVars v = unflatten(xs, 2);
    const Embeddings e = embed_task(tape, v, o.task, 0.01);
    const auto deltas = source_divergences(e, o.task, o.soft);
    const auto w = source_weights(tape, deltas);
    return objective_fg(tape, v, e, o.task, w, ObjectiveWeights{0.03, 0.004, LgNorm::l1}).total;
  };
  const GradCheckResult r = grad_check(fn, flatten(o.params));
  EXPECT_LT(r.max_relative_error, 1e-4) << "tensor " << r.worst_tensor << " index " << r.worst_index;
}

TEST(Gradients, WeightsCarryGradientIntoTransformers) {
  ObjectivePoint o = objective_point();
  Tape tape;
  const CwanVars v = bind(tape, o.params, Trainable::feature_classifier);
  const Embeddings e = embed_task(tape, v, o.task, 0.01);
  const auto w = source_weights(tape, source_divergences(e, o.task, o.soft));
  const Gradients g = backward(tape, w[0]);
  // w_1 depends only on delta_2, which involves source 2 and the target but not source 1.
  EXPECT_GT(g[v.sources[1].hidden.weight].mat().norm(), 0.0);
  EXPECT_GT(g[v.target.hidden.weight].mat().norm(), 0.0);
  EXPECT_EQ(g[v.sources[0].hidden.weight].mat().norm(), 0.0);
}

TEST(Gradients, ObjectiveD) {
  ObjectivePoint o = objective_point();
  Tape base;
  const CwanVars bv = bind(base, o.params, Trainable::none);
  const Embeddings be = embed_task(base, bv, o.task, 0.01);
  std::vector<Tensor> emb;
  for (const Var& s : be.sources) emb.push_back(s.value());
  emb.push_back(be.target_labeled.value());
  emb.push_back(be.target_unlabeled.value());
  std::vector<Tensor> point;
  for (Tensor* t : o.params.discriminator_tensors()) point.push_back(*t);
  ScalarFn fn = [&](Tape& tape, std::span<const Var> xs) {
    CwanVars v;
    v.disc_hidden = {xs[0], xs[1]};
    v.disc_output = {xs[2], xs[3]};
    Embeddings e;
    e.sources = {tape.constant(emb[0]), tape.constant(emb[1])};
    e.target_labeled = tape.constant(emb[2]);
    e.target_unlabeled = tape.constant(emb[3]);
    std::vector<Var> w{tape.constant(Tensor::scalar(0.6)), tape.constant(Tensor::scalar(0.85))};
    return objective_d(tape, v, e, w);
  };
  const GradCheckResult r = grad_check(fn, point);
  EXPECT_LT(r.max_relative_error, 1e-4) << "tensor " << r.worst_tensor << " index " << r.worst_index;
}
