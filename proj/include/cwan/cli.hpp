#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cwan/data.hpp"
#include "cwan/experiments.hpp"
#include "cwan/training.hpp"

namespace cwan::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Source and target widths parsed from a `--dims` argument.
struct DimsSpec {
  std::vector<std::size_t> sources;
  std::size_t target = 0;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  if (s.empty() || !cwan::detail::parse_number(std::string_view(s), v)) {
    throw ConfigError("invalid " + what + " '" + s + "'");
  }
  return v;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

/**
 * Comma-separated widths; `a:b:s` expands to a, a+s, ..., up to b and
 * `target=N` names the target width. Without `target=` the last width is
 * the target.
 */
inline DimsSpec parse_dims(const std::string& text) {
  DimsSpec d;
  std::vector<std::size_t> widths;
  std::optional<std::size_t> target;
  for (const std::string& item : detail::split(text, ',')) {
    if (item.rfind("target=", 0) == 0) {
      if (target) throw ConfigError("--dims: target given twice");
      target = detail::parse_u64(item.substr(7), "target width");
      continue;
    }
    const auto parts = detail::split(item, ':');
    if (parts.size() == 1) {
      widths.push_back(detail::parse_u64(parts[0], "width"));
    } else if (parts.size() == 3) {
      const std::uint64_t lo = detail::parse_u64(parts[0], "range start");
      const std::uint64_t hi = detail::parse_u64(parts[1], "range end");
      const std::uint64_t step = detail::parse_u64(parts[2], "range step");
      if (step == 0 || hi < lo) throw ConfigError("--dims: bad range '" + item + "'");
      for (std::uint64_t w = lo; w <= hi; w += step) widths.push_back(w);
    } else {
      throw ConfigError("--dims: cannot parse '" + item + "'");
    }
  }
  if (!target) {
    if (widths.empty()) throw ConfigError("--dims: no target width");
    target = widths.back();
    widths.pop_back();
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("--dims: widths must be positive");
  }
  if (*target == 0) throw ConfigError("--dims: widths must be positive");
  d.sources = std::move(widths);
  d.target = *target;
  return d;
}

/// `a..b` (inclusive) or a comma-separated list.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const std::uint64_t lo = detail::parse_u64(text.substr(0, dots), "seed");
    const std::uint64_t hi = detail::parse_u64(text.substr(dots + 2), "seed");
    if (hi < lo) throw ConfigError("--seeds: empty range '" + text + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const std::string& s : detail::split(text, ',')) out.push_back(detail::parse_u64(s, "seed"));
  if (out.empty()) throw ConfigError("--seeds: no seeds");
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  for (const std::string& s : detail::split(text, ',')) out.push_back(detail::parse_u64(s, "count"));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

inline std::vector<AblationVariant> parse_variants(const std::string& text) {
  std::vector<AblationVariant> out;
  for (const std::string& s : detail::split(text, ',')) out.push_back(parse_variant(s));
  if (out.empty()) throw ConfigError("--variants: no variants");
  return out;
}

/// 64-bit FNV-1a of a file's bytes.
inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

/// Ordered `key=value` lines.
class Manifest {
 public:
  void set(std::string key, std::string value) { entries_.emplace_back(std::move(key), std::move(value)); }
  void set(std::string key, double value) { set(std::move(key), cwan::detail::format_double(value)); }
  void set(std::string key, std::uint64_t value) { set(std::move(key), std::to_string(value)); }

  void add_config(const TrainConfig& c) {
    set("beta", c.beta);
    set("tau", c.tau);
    set("d_c", std::uint64_t{c.d_c});
    set("hidden", std::uint64_t{c.hidden});
    set("lr_fg", c.lr_fg);
    set("lr_d", c.lr_d);
    set("iterations", std::uint64_t{c.iterations});
    set("seed", c.seed);
    set("lg", to_string(c.lg_norm));
    set("weighting", to_string(c.weighting));
    set("leaky_slope", c.leaky_slope);
  }

  void add_file(const std::string& key, const std::string& path) {
    set(key, path);
    set(key + "_fnv1a", detail::hex64(fnv1a_file(path)));
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// One row per iteration; acc_target is empty where accuracy was not evaluated.
inline void write_trace_csv(std::ostream& out, const TrainTrace& trace, std::size_t num_sources) {
  using cwan::detail::format_double;
  out << "iter,loss_fg,loss_lg,loss_dg_inv,loss_d";
  for (std::size_t k = 1; k <= num_sources; ++k) out << ",delta_" << k;
  for (std::size_t k = 1; k <= num_sources; ++k) out << ",w_" << k;
  out << ",acc_target\n";
  for (const IterationRecord& r : trace.records) {
    out << r.iteration << ',' << format_double(r.loss_fg) << ',' << format_double(r.loss_lg) << ','
        << format_double(r.loss_dg_inverted) << ',' << format_double(r.loss_d);
    for (double d : r.deltas) out << ',' << format_double(d);
    for (double w : r.weights) out << ',' << format_double(w);
    out << ',';
    if (r.target_accuracy) out << format_double(*r.target_accuracy);
    out << '\n';
  }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string dims = "100:1000:100,target=2000";
  SynthSpec spec;
  std::string out = "synth";
};

/// Writes source_<k>.txt, target.txt and manifest.txt; returns the paths written.
inline std::vector<std::string> cmd_synth(const SynthOptions& o) {
  SynthSpec spec = o.spec;
  const DimsSpec dims = parse_dims(o.dims);
  spec.source_dims = dims.sources;
  spec.target_dim = dims.target;
  spec.validate();
  const SyntheticDomains data = generate_synthetic(spec);
  std::filesystem::create_directories(o.out);
  const std::filesystem::path dir(o.out);
  std::vector<std::string> paths;
  Manifest m;
  m.set("command", "synth");
  m.set("version", kVersion);
  m.set("dims", o.dims);
  m.set("classes", std::uint64_t(spec.classes));
  m.set("per_class", std::uint64_t{spec.per_class});
  m.set("labeled_per_class", std::uint64_t{spec.labeled_per_class});
  m.set("unlabeled", std::uint64_t{spec.unlabeled});
  m.set("latent_dim", std::uint64_t{spec.latent_dim});
  m.set("spread", spec.spread);
  m.set("noise", spec.noise);
  m.set("standardize", spec.standardize ? "1" : "0");
  m.set("seed", spec.seed);
  for (std::size_t k = 0; k < data.sources.size(); ++k) {
    const std::string p = (dir / ("source_" + std::to_string(k + 1) + ".txt")).string();
    save_domain_file(p, data.sources[k]);
    m.add_file("source_" + std::to_string(k + 1), p);
    paths.push_back(p);
  }
  const std::string tp = (dir / "target.txt").string();
  save_domain_file(tp, data.target);
  m.add_file("target", tp);
  paths.push_back(tp);
  m.write(dir / "manifest.txt");
  return paths;
}

struct TrainOptions {
  std::vector<std::string> sources;
  std::string target;
  std::size_t labeled_per_class = 3;
  bool standardize = false;
  TrainConfig config;
  std::string out = "train";
  std::string export_embeddings;
};

/// Loads the domains, splits the target with the run seed and checks class counts.
inline MultiSourceTask load_task(const std::vector<std::string>& sources, const std::string& target,
                                 std::size_t labeled_per_class, std::uint64_t split_seed, bool standardize_inputs) {
  if (target.empty()) throw ConfigError("--target is required");
  std::vector<DomainData> src;
  for (const std::string& p : sources) {
    DomainData d = load_domain_file(p);
    if (!d.labeled()) throw ConfigError("source file '" + p + "' has no labels");
    src.push_back(standardize_inputs ? standardize(d) : std::move(d));
  }
  DomainData t = load_domain_file(target);
  if (!t.labeled()) throw ConfigError("target file '" + target + "' needs ground-truth labels for evaluation");
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src[k].classes != t.classes) {
      throw ConfigError("class-count mismatch: '" + sources[k] + "' has " + std::to_string(src[k].classes) +
                        " classes, target has " + std::to_string(t.classes));
    }
  }
  if (standardize_inputs) t = standardize(t);
  return make_task(std::move(src), t, labeled_per_class, split_seed);
}

/// Trains and writes trace.csv and manifest.txt; prints `final_accuracy=`.
inline double cmd_train(const TrainOptions& o, std::ostream& stdout_stream) {
  o.config.validate();
  if (o.sources.empty()) throw ConfigError("at least one --source is required");
  const auto start = std::chrono::steady_clock::now();
  const MultiSourceTask task = load_task(o.sources, o.target, o.labeled_per_class, o.config.seed, o.standardize);
  const TrainTrace trace = train(task, o.config);
  const double acc = evaluate_accuracy(trace.final_params, task, o.config.leaky_slope);

  std::filesystem::create_directories(o.out);
  const std::filesystem::path dir(o.out);
  {
    std::ofstream out = open_output(dir / "trace.csv");
    write_trace_csv(out, trace, task.num_sources());
  }
  if (!o.export_embeddings.empty()) export_embeddings(trace.final_params, task, o.export_embeddings, o.config.leaky_slope);

  Manifest m;
  m.set("command", "train");
  m.set("version", kVersion);
  m.add_config(o.config);
  m.set("labeled_per_class", std::uint64_t{o.labeled_per_class});
  m.set("standardize", o.standardize ? "1" : "0");
  for (std::size_t k = 0; k < o.sources.size(); ++k) m.add_file("source_" + std::to_string(k + 1), o.sources[k]);
  m.add_file("target", o.target);
  m.set("final_accuracy", acc);
  m.set("wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  m.write(dir / "manifest.txt");
  stdout_stream << "final_accuracy=" << cwan::detail::format_double(acc) << '\n';
  return acc;
}

struct ExperimentOptions {
  std::string kind;  // ablate, noise or sweep
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<AblationVariant> variants = {AblationVariant::full};
  std::vector<std::size_t> ns = {0, 2, 4, 6, 8, 10};
  std::size_t noise_dim = 150;
  std::vector<std::string> sources;  // ablate/noise: files instead of the synthetic task
  std::string target;
  std::size_t labeled_per_class = 3;
  SynthSpec spec;
  TrainConfig config;
  std::size_t jobs = 1;
  std::string out = "experiment";
};

/// Writes runs.csv and aggregate.csv (plus noise_weights.csv for `noise`) and a manifest.
inline std::vector<RunSummary> cmd_experiment(const ExperimentOptions& o, std::ostream& stdout_stream) {
  o.config.validate();
  if (o.seeds.empty()) throw ConfigError("--seeds: no seeds");
  const auto start = std::chrono::steady_clock::now();
  const RunOptions ro{.jobs = o.jobs, .keep_traces = false};
  auto base_task = [&] {
    if (!o.target.empty()) return load_task(o.sources, o.target, o.labeled_per_class, o.spec.seed, false);
    return default_two_source_task(o.spec.seed, o.spec);
  };
  std::vector<RunSummary> summaries;
  if (o.kind == "ablate") {
    summaries = run_ablation(base_task(), o.variants, o.seeds, o.config, ro);
  } else if (o.kind == "noise") {
    const MultiSourceTask base = base_task();
    for (AblationVariant v : o.variants) {
      summaries.push_back(run_noise_detection(base, o.noise_dim, o.seeds, o.config, v, ro));
    }
  } else if (o.kind == "sweep") {
    summaries = run_source_sweep(o.spec, o.ns, o.seeds, o.config, ro);
  } else {
    throw ConfigError("unknown experiment '" + o.kind + "' (expected ablate, noise or sweep)");
  }

  std::filesystem::create_directories(o.out);
  const std::filesystem::path dir(o.out);
  {
    std::ofstream out = open_output(dir / "runs.csv");
    write_runs_csv(out, summaries);
  }
  {
    std::ofstream out = open_output(dir / "aggregate.csv");
    write_aggregate_csv(out, summaries);
  }
  if (o.kind == "noise") {
    std::ofstream out = open_output(dir / "noise_weights.csv");
    bool header = true;
    for (const RunSummary& s : summaries) {
      std::ostringstream block;
      write_noise_csv(block, s);
      std::string text = block.str();
      if (!header) text = text.substr(text.find('\n') + 1);
      out << text;
      header = false;
    }
  }
  Manifest m;
  m.set("command", "experiment " + o.kind);
  m.set("version", kVersion);
  m.add_config(o.config);
  std::string seeds;
  for (std::uint64_t s : o.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  m.set("seeds", seeds);
  if (o.target.empty()) {
    m.set("data", "synthetic");
    m.set("data_seed", o.spec.seed);
    m.set("spread", o.spec.spread);
    m.set("noise", o.spec.noise);
  } else {
    for (std::size_t k = 0; k < o.sources.size(); ++k) m.add_file("source_" + std::to_string(k + 1), o.sources[k]);
    m.add_file("target", o.target);
  }
  if (o.kind == "noise") m.set("noise_dim", std::uint64_t{o.noise_dim});
  m.set("wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  m.write(dir / "manifest.txt");
  for (const RunSummary& s : summaries) {
    stdout_stream << s.experiment << ' ' << s.variant << " mean=" << cwan::detail::format_double(s.mean)
                  << " stderr=" << cwan::detail::format_double(s.standard_error) << '\n';
  }
  return summaries;
}

}  // namespace cwan::cli
