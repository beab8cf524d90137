#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cwan/adam.hpp"
#include "cwan/data.hpp"
#include "cwan/model.hpp"
#include "cwan/tape.hpp"
#include "cwan/training.hpp"

namespace cwan {

enum class AblationVariant { full, no_lg, lg_tied, lg_l2, ones_weight, no_lg_and_ones };

inline const std::vector<AblationVariant>& all_variants() {
  static const std::vector<AblationVariant> v{AblationVariant::full,        AblationVariant::no_lg,
                                              AblationVariant::lg_tied,     AblationVariant::lg_l2,
                                              AblationVariant::ones_weight, AblationVariant::no_lg_and_ones};
  return v;
}

inline std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_lg: return "no_lg";
    case AblationVariant::lg_tied: return "lg_tied";
    case AblationVariant::lg_l2: return "lg_l2";
    case AblationVariant::ones_weight: return "ones_weight";
    case AblationVariant::no_lg_and_ones: return "no_lg_and_ones";
  }
  return "?";
}

inline AblationVariant parse_variant(const std::string& s) {
  for (AblationVariant v : all_variants()) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant '" + s + "'");
}

/// The variant's L_g mode and weighting laid over `base`.
inline TrainConfig apply_variant(AblationVariant v, TrainConfig base) {
  const bool ones = v == AblationVariant::ones_weight || v == AblationVariant::no_lg_and_ones;
  base.weighting = ones ? Weighting::ones : Weighting::conditional;
  switch (v) {
    case AblationVariant::full:
    case AblationVariant::ones_weight: base.lg_norm = LgMode::l1; break;
    case AblationVariant::no_lg:
    case AblationVariant::no_lg_and_ones: base.lg_norm = LgMode::off; break;
    case AblationVariant::lg_tied: base.lg_norm = LgMode::tied; break;
    case AblationVariant::lg_l2: base.lg_norm = LgMode::l2; break;
  }
  return base;
}

struct MeanStderr {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean and sample standard deviation over sqrt(n); the error is 0 for one value.
inline MeanStderr mean_and_stderr(std::span<const double> xs) {
  if (xs.empty()) throw ConfigError("mean_and_stderr: no values");
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  MeanStderr r;
  r.mean = sum / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return r;
}

/// Repeated seeded runs of one configuration.
struct RunSummary {
  std::string experiment;
  std::string variant;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<std::vector<double>> final_weights;  // per seed, empty for baselines
  std::vector<std::vector<double>> final_deltas;
  std::vector<TrainTrace> traces;                  // per seed when kept

  void finalize() {
    const MeanStderr m = mean_and_stderr(accuracies);
    mean = m.mean;
    standard_error = m.standard_error;
  }
};

struct RunOptions {
  std::size_t jobs = 1;
  bool keep_traces = false;
};

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

struct SupervisedRun {
  std::vector<double> losses;  // objective before each update
  CwanParams params;
  double accuracy = 0.0;
};

/**
 * Full-batch supervised training of f over the transformers, with Adam at
 * lr_fg and tau-weighted decay on every weight matrix in use. Without
 * sources only the target transformer and the classifier exist.
 */
inline SupervisedRun train_supervised(const MultiSourceTask& task, const TrainConfig& config, bool use_sources) {
  TrainConfig c = config;
  c.lg_norm = LgMode::off;
  TaskShape shape = TaskShape::of(task);
  if (!use_sources) shape.source_dims.clear();
  SupervisedRun run;
  run.params = init_params(shape, c);
  CwanParams& p = run.params;
  std::vector<Tensor*> tensors = p.feature_classifier_tensors();
  std::vector<const Tensor*> ctensors(tensors.begin(), tensors.end());
  AdamState adam(AdamOptions{.learning_rate = config.lr_fg}, ctensors);
  const Tensor target_onehot = onehot(*task.target_labeled.labels, task.classes);
  std::vector<Tensor> source_onehot;
  for (std::size_t k = 0; k < shape.source_dims.size(); ++k) {
    source_onehot.push_back(onehot(*task.sources[k].labels, task.classes));
  }
  const double slope = config.leaky_slope;

  for (std::size_t it = 0; it < config.iterations; ++it) {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* t : tensors) leaves.push_back(tape.parameter(*t));
    auto layer = [&](std::size_t i) { return LayerVars{leaves[i], leaves[i + 1]}; };
    std::vector<Var> terms;
    std::vector<Var> decay;
    const std::size_t at = 4 * shape.source_dims.size();
    const TransformerVars target{layer(at), layer(at + 2)};
    const LayerVars f = layer(at + 4);
    for (std::size_t k = 0; k < shape.source_dims.size(); ++k) {
      const TransformerVars src{layer(4 * k), layer(4 * k + 2)};
      Var emb = transform(src, tape.constant(task.sources[k].features), slope);
      terms.push_back(softmax_cross_entropy(classify(f, emb), source_onehot[k]));
      decay.push_back(sum_squares(src.hidden.weight));
      decay.push_back(sum_squares(src.output.weight));
    }
    Var emb_t = transform(target, tape.constant(task.target_labeled.features), slope);
    terms.push_back(softmax_cross_entropy(classify(f, emb_t), target_onehot));
    decay.push_back(sum_squares(f.weight));
    decay.push_back(sum_squares(target.hidden.weight));
    decay.push_back(sum_squares(target.output.weight));
    if (config.tau != 0.0) terms.push_back(scale(add_n(decay), config.tau));
    const Var loss = add_n(terms);
    run.losses.push_back(loss.value().item());
    const Gradients g = backward(tape, loss);
    std::vector<Tensor> grads;
    for (const Var& l : leaves) grads.push_back(g[l]);
    adam_step(adam, tensors, grads);
  }
  run.accuracy = evaluate_accuracy(p, task, slope);
  return run;
}

namespace detail {

inline RunSummary supervised_summary(const MultiSourceTask& task, const TrainConfig& config,
                                     std::span<const std::uint64_t> seeds, bool use_sources,
                                     const RunOptions& options) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  task.validate();
  RunSummary s;
  s.experiment = "baseline";
  s.variant = use_sources ? "nnst" : "nnt";
  s.seeds.assign(seeds.begin(), seeds.end());
  s.accuracies.resize(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) {
    TrainConfig c = config;
    c.seed = seeds[i];
    s.accuracies[i] = train_supervised(task, c, use_sources).accuracy;
  });
  s.finalize();
  return s;
}

}  // namespace detail

/// Target-only network trained on the labeled target split.
inline RunSummary run_baseline_nnt(const MultiSourceTask& task, const TrainConfig& config,
                                   std::span<const std::uint64_t> seeds, const RunOptions& options = {}) {
  return detail::supervised_summary(task, config, seeds, false, options);
}

inline RunSummary run_baseline_nnt(const MultiSourceTask& task, const TrainConfig& config) {
  const std::uint64_t seed = config.seed;
  return run_baseline_nnt(task, config, std::span(&seed, 1));
}

/// All transformers and the classifier trained on every labeled sample, unweighted.
inline RunSummary run_baseline_nnst(const MultiSourceTask& task, const TrainConfig& config,
                                    std::span<const std::uint64_t> seeds, const RunOptions& options = {}) {
  return detail::supervised_summary(task, config, seeds, true, options);
}

inline RunSummary run_baseline_nnst(const MultiSourceTask& task, const TrainConfig& config) {
  const std::uint64_t seed = config.seed;
  return run_baseline_nnst(task, config, std::span(&seed, 1));
}

// ---------------------------------------------------------------------------
// CWAN experiments
// ---------------------------------------------------------------------------

namespace detail {

struct CwanRun {
  double accuracy = 0.0;
  std::vector<double> weights;
  std::vector<double> deltas;
  TrainTrace trace;
};

inline CwanRun run_cwan(const MultiSourceTask& task, const TrainConfig& config) {
  CwanRun r;
  r.trace = train(task, config);
  r.accuracy = evaluate_accuracy(r.trace.final_params, task, config.leaky_slope);
  if (!r.trace.records.empty()) {
    r.weights = r.trace.records.back().weights;
    r.deltas = r.trace.records.back().deltas;
  }
  return r;
}

inline void collect(RunSummary& s, std::vector<CwanRun>& runs, bool keep_traces) {
  for (CwanRun& r : runs) {
    s.accuracies.push_back(r.accuracy);
    s.final_weights.push_back(std::move(r.weights));
    s.final_deltas.push_back(std::move(r.deltas));
    if (keep_traces) s.traces.push_back(std::move(r.trace));
  }
  s.finalize();
}

}  // namespace detail

/// Every (variant, seed) pair on one task; one summary per variant, in input order.
inline std::vector<RunSummary> run_ablation(const MultiSourceTask& task, std::span<const AblationVariant> variants,
                                            std::span<const std::uint64_t> seeds, const TrainConfig& config,
                                            const RunOptions& options = {}) {
  if (variants.empty()) throw ConfigError("run_ablation: no variants given");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  config.validate();
  task.validate();
  const std::size_t ns = seeds.size();
  std::vector<detail::CwanRun> runs(variants.size() * ns);
  parallel_for(runs.size(), options.jobs, [&](std::size_t i) {
    TrainConfig c = apply_variant(variants[i / ns], config);
    c.seed = seeds[i % ns];
    runs[i] = detail::run_cwan(task, c);
  });
  std::vector<RunSummary> out;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    RunSummary s;
    s.experiment = "ablation";
    s.variant = to_string(variants[v]);
    s.seeds.assign(seeds.begin(), seeds.end());
    std::vector<detail::CwanRun> mine(std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>(v * ns)),
                                      std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>((v + 1) * ns)));
    detail::collect(s, mine, options.keep_traces);
    out.push_back(std::move(s));
  }
  return out;
}

/// `base` with a Gaussian noise source appended; it has as many samples as the first source.
inline MultiSourceTask with_noise_source(const MultiSourceTask& base, std::size_t noise_dim, std::uint64_t seed) {
  if (base.sources.empty()) throw ConfigError("noise task needs at least one informative source");
  MultiSourceTask t = base;
  DomainData noise = generate_noise_domain(noise_dim, base.sources.front().size(), base.classes, seed);
  noise.name = "source_" + std::to_string(t.sources.size() + 1) + "_noise";
  t.sources.push_back(std::move(noise));
  t.validate();
  return t;
}

/**
 * Appends a noise source (drawn from the run seed) to `base` and trains the
 * variant once per seed. Final weights and divergences list the noise
 * source last.
 */
inline RunSummary run_noise_detection(const MultiSourceTask& base, std::size_t noise_dim,
                                      std::span<const std::uint64_t> seeds, const TrainConfig& config,
                                      AblationVariant variant = AblationVariant::full,
                                      const RunOptions& options = {}) {
  if (base.sources.size() < 2) throw ConfigError("noise detection needs at least 2 informative sources");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  config.validate();
  std::vector<detail::CwanRun> runs(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) {
    TrainConfig c = apply_variant(variant, config);
    c.seed = seeds[i];
    runs[i] = detail::run_cwan(with_noise_source(base, noise_dim, seeds[i]), c);
  });
  RunSummary s;
  s.experiment = "noise";
  s.variant = to_string(variant);
  s.seeds.assign(seeds.begin(), seeds.end());
  detail::collect(s, runs, options.keep_traces);
  return s;
}

/// Number of runs whose last source has the strictly smallest final weight.
inline std::size_t count_noise_smallest(const RunSummary& s) {
  std::size_t hits = 0;
  for (const auto& w : s.final_weights) {
    if (w.size() < 2) continue;
    const double last = w.back();
    hits += std::all_of(w.begin(), w.end() - 1, [&](double x) { return last < x; }) ? 1 : 0;
  }
  return hits;
}

/// The task a sweep run uses: the first `n_sources` domains of spec with
/// seed spec.seed + run_seed, and the target split drawn from run_seed.
inline MultiSourceTask sweep_task(const SyntheticDomains& domains, std::size_t n_sources,
                                  std::size_t labeled_per_class, std::uint64_t run_seed) {
  if (n_sources > domains.sources.size()) {
    throw ConfigError("N_S = " + std::to_string(n_sources) + " exceeds the " +
                      std::to_string(domains.sources.size()) + " generated sources");
  }
  std::vector<DomainData> src(domains.sources.begin(),
                              domains.sources.begin() + static_cast<std::ptrdiff_t>(n_sources));
  if (n_sources > 0) return make_task(std::move(src), domains.target, labeled_per_class, run_seed);
  // A task needs no sources for the target-only baseline; validate the split alone.
  TargetSplit split = split_target(domains.target, labeled_per_class, run_seed);
  MultiSourceTask t;
  t.target_labeled = std::move(split.labeled);
  t.target_unlabeled = std::move(split.unlabeled);
  t.held_out = std::move(split.held_out);
  t.classes = domains.target.classes;
  t.validate();
  return t;
}

inline SyntheticDomains sweep_domains(SynthSpec spec, std::uint64_t run_seed) {
  spec.seed += run_seed;
  return generate_synthetic(spec);
}

/// Synthetic task with the first two default sources, as used for single runs.
inline MultiSourceTask default_two_source_task(std::uint64_t seed = 0, const SynthSpec& spec = {}) {
  SynthSpec s = spec;
  s.source_dims.resize(std::min<std::size_t>(2, s.source_dims.size()));
  return sweep_task(sweep_domains(s, seed), 2, s.labeled_per_class, seed);
}

/// Accuracy against the number of sources. N_S = 0 runs the target-only
/// baseline; data, split and initialization all follow the run seed.
inline std::vector<RunSummary> run_source_sweep(const SynthSpec& spec, std::span<const std::size_t> ns_values,
                                                std::span<const std::uint64_t> seeds, const TrainConfig& config,
                                                const RunOptions& options = {}) {
  if (ns_values.empty()) throw ConfigError("run_source_sweep: no N_S values given");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  config.validate();
  spec.validate();
  for (std::size_t n : ns_values) {
    if (n > spec.source_dims.size()) {
      throw ConfigError("N_S = " + std::to_string(n) + " exceeds the " + std::to_string(spec.source_dims.size()) +
                        " generated sources");
    }
  }
  const std::size_t max_n = *std::max_element(ns_values.begin(), ns_values.end());
  SynthSpec trimmed = spec;
  trimmed.source_dims.resize(max_n);
  std::vector<SyntheticDomains> data(seeds.size());
  parallel_for(seeds.size(), options.jobs, [&](std::size_t i) { data[i] = sweep_domains(trimmed, seeds[i]); });

  const std::size_t nseeds = seeds.size();
  std::vector<detail::CwanRun> runs(ns_values.size() * nseeds);
  parallel_for(runs.size(), options.jobs, [&](std::size_t i) {
    const std::size_t n = ns_values[i / nseeds];
    const std::size_t si = i % nseeds;
    TrainConfig c = config;
    c.seed = seeds[si];
    const MultiSourceTask task = sweep_task(data[si], n, spec.labeled_per_class, seeds[si]);
    if (n == 0) {
      runs[i].accuracy = train_supervised(task, c, false).accuracy;
    } else {
      runs[i] = detail::run_cwan(task, c);
    }
  });
  std::vector<RunSummary> out;
  for (std::size_t v = 0; v < ns_values.size(); ++v) {
    RunSummary s;
    s.experiment = "sweep";
    s.variant = "ns=" + std::to_string(ns_values[v]);
    s.seeds.assign(seeds.begin(), seeds.end());
    std::vector<detail::CwanRun> mine(
        std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>(v * nseeds)),
        std::make_move_iterator(runs.begin() + static_cast<std::ptrdiff_t>((v + 1) * nseeds)));
    const bool keep = options.keep_traces && ns_values[v] > 0;
    detail::collect(s, mine, keep);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// One row per embedded sample; domain 0 is the target, k >= 1 is source k;
/// split 0 marks labeled rows and 1 the unlabeled target rows.
struct EmbeddingTable {
  Tensor embeddings;
  std::vector<int> labels;
  std::vector<int> domain;
  std::vector<int> split;
  int classes = 0;
};

inline EmbeddingTable embed_all(const CwanParams& params, const MultiSourceTask& task, double slope) {
  EmbeddingTable t;
  t.classes = task.classes;
  std::vector<double> values;
  auto append = [&](const Tensor& x, std::span<const int> labels, int domain, int split) {
    values.insert(values.end(), x.values().begin(), x.values().end());
    t.labels.insert(t.labels.end(), labels.begin(), labels.end());
    t.domain.insert(t.domain.end(), labels.size(), domain);
    t.split.insert(t.split.end(), labels.size(), split);
  };
  for (std::size_t k = 0; k < task.sources.size(); ++k) {
    append(embed(params, k, task.sources[k].features, slope), *task.sources[k].labels, static_cast<int>(k + 1), 0);
  }
  const std::size_t tk = params.num_sources();
  append(embed(params, tk, task.target_labeled.features, slope), *task.target_labeled.labels, 0, 0);
  append(embed(params, tk, task.target_unlabeled.features, slope), task.held_out.reveal_for_evaluation(), 0, 1);
  t.embeddings = Tensor({t.labels.size(), params.embedding_dim()}, std::move(values));
  return t;
}

inline void write_embeddings(std::ostream& out, const EmbeddingTable& t) {
  out << t.embeddings.rows() << ' ' << t.embeddings.cols() << ' ' << t.classes << '\n';
  for (std::size_t i = 0; i < t.embeddings.rows(); ++i) {
    out << t.labels[i];
    for (std::size_t j = 0; j < t.embeddings.cols(); ++j) out << ' ' << detail::format_double(t.embeddings(i, j));
    out << ' ' << t.domain[i] << ' ' << t.split[i] << '\n';
  }
}

inline void export_embeddings(const CwanParams& params, const MultiSourceTask& task, const std::string& path,
                              double slope = 0.01) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_embeddings(out, embed_all(params, task, slope));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::io, 0, "cannot open '" + path + "'");
  RawDomainTable raw = parse_domain_table(in, 2);
  EmbeddingTable t;
  t.classes = raw.classes;
  t.embeddings = std::move(raw.features);
  t.labels = std::move(raw.labels);
  for (const auto& extra : raw.trailing) {
    t.domain.push_back(static_cast<int>(extra[0]));
    t.split.push_back(static_cast<int>(extra[1]));
  }
  return t;
}

inline void write_runs_csv(std::ostream& out, std::span<const RunSummary> summaries) {
  out << "experiment,variant,seed,final_accuracy\n";
  for (const RunSummary& s : summaries) {
    for (std::size_t i = 0; i < s.seeds.size(); ++i) {
      out << s.experiment << ',' << s.variant << ',' << s.seeds[i] << ','
          << detail::format_double(s.accuracies[i]) << '\n';
    }
  }
}

inline void write_aggregate_csv(std::ostream& out, std::span<const RunSummary> summaries) {
  out << "experiment,variant,mean,stderr,n_seeds\n";
  for (const RunSummary& s : summaries) {
    out << s.experiment << ',' << s.variant << ',' << detail::format_double(s.mean) << ','
        << detail::format_double(s.standard_error) << ',' << s.seeds.size() << '\n';
  }
}

/// Final weights and divergences per seed; the noise source is the last column of each group.
inline void write_noise_csv(std::ostream& out, const RunSummary& s) {
  const std::size_t k = s.final_weights.empty() ? 0 : s.final_weights.front().size();
  out << "variant,seed,final_accuracy";
  for (std::size_t j = 1; j <= k; ++j) out << ",w_" << j;
  for (std::size_t j = 1; j <= k; ++j) out << ",delta_" << j;
  out << '\n';
  for (std::size_t i = 0; i < s.seeds.size(); ++i) {
    out << s.variant << ',' << s.seeds[i] << ',' << detail::format_double(s.accuracies[i]);
    for (double w : s.final_weights[i]) out << ',' << detail::format_double(w);
    for (double d : s.final_deltas[i]) out << ',' << detail::format_double(d);
    out << '\n';
  }
}

}  // namespace cwan
