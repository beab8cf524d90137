#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cwan/tensor.hpp"

namespace cwan {

/// One domain: features, optional class labels and the class count.
struct DomainData {
  std::string name;
  Tensor features;
  std::optional<std::vector<int>> labels;
  int classes = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  void validate() const {
    if (classes <= 0) throw ConfigError("domain '" + name + "': class count must be positive");
    if (features.rank() != 2) throw DimensionError("domain '" + name + "': features must be a matrix");
    features.check_finite();
    if (labels) {
      if (labels->size() != features.rows()) {
        throw DimensionError("domain '" + name + "': " + std::to_string(labels->size()) +
                             " labels for " + std::to_string(features.rows()) + " samples");
      }
      for (int y : *labels) {
        if (y < 0 || y >= classes) {
          throw ValidationError("domain '" + name + "': label " + std::to_string(y) +
                                " outside [0, " + std::to_string(classes) + ")");
        }
      }
    }
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
    if (labels) {
      for (int y : *labels) ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
  }
};

/// Ground-truth labels of the unlabeled target split. Only evaluation reads them.
class SealedLabels {
 public:
  SealedLabels() = default;
  explicit SealedLabels(std::vector<int> labels) : labels_(std::move(labels)) {}

  std::size_t size() const { return labels_.size(); }
  const std::vector<int>& reveal_for_evaluation() const { return labels_; }

 private:
  std::vector<int> labels_;
};

/// K labeled heterogeneous sources and a labeled/unlabeled target split.
struct MultiSourceTask {
  std::vector<DomainData> sources;
  DomainData target_labeled;
  DomainData target_unlabeled;
  SealedLabels held_out;
  int classes = 0;

  std::size_t num_sources() const { return sources.size(); }

  void validate() const {
    if (classes <= 0) throw ConfigError("task class count must be positive");
    auto check = [&](const DomainData& d) {
      d.validate();
      if (d.classes != classes) {
        throw ConfigError("class-count mismatch: domain '" + d.name + "' has " +
                          std::to_string(d.classes) + " classes, task has " +
                          std::to_string(classes));
      }
    };
    for (std::size_t k = 0; k < sources.size(); ++k) {
      const DomainData& s = sources[k];
      check(s);
      if (!s.labeled()) throw ConfigError("source " + std::to_string(k + 1) + " has no labels");
      const auto counts = s.class_counts();
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
          throw ConfigError("source " + std::to_string(k + 1) + " has no samples of class " +
                            std::to_string(c));
        }
      }
    }
    check(target_labeled);
    check(target_unlabeled);
    if (!target_labeled.labeled()) throw ConfigError("labeled target split has no labels");
    for (std::size_t c = 0; c < static_cast<std::size_t>(classes); ++c) {
      if (target_labeled.class_counts()[c] == 0) {
        throw ConfigError("labeled target split has no samples of class " + std::to_string(c));
      }
    }
    if (target_unlabeled.labeled()) throw ConfigError("unlabeled target split carries labels");
    if (held_out.size() != target_unlabeled.size()) {
      throw ConfigError("held-out label count does not match unlabeled target size");
    }
    if (target_labeled.dim() != target_unlabeled.dim()) {
      throw DimensionError("target splits have different feature widths");
    }
  }
};

/// Deterministic 64-bit seed mixing (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Parameters of the shared-latent Gaussian generator.
struct SynthSpec {
  std::size_t latent_dim = 10;
  int classes = 3;
  std::vector<std::size_t> source_dims = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  std::size_t target_dim = 2000;
  std::size_t per_class = 100;
  std::size_t labeled_per_class = 3;
  std::size_t unlabeled = 500;
  double spread = 1.0;
  double noise = 0.5;
  std::uint64_t seed = 0;
  bool standardize = false;  // per-domain z-score after generation

  void validate() const {
    if (latent_dim == 0 || classes <= 0 || per_class == 0 || unlabeled == 0 ||
        labeled_per_class == 0) {
      throw ConfigError("synthetic spec: counts must be positive");
    }
    if (!(spread > 0.0) || !(noise > 0.0)) {
      throw ConfigError("synthetic spec: spread and noise must be positive");
    }
    auto check_dim = [&](std::size_t d) {
      if (d < latent_dim) {
        throw ConfigError("synthetic spec: domain dim " + std::to_string(d) +
                          " is below latent dim " + std::to_string(latent_dim));
      }
    };
    for (std::size_t d : source_dims) check_dim(d);
    check_dim(target_dim);
  }

  std::size_t target_size() const {
    return labeled_per_class * static_cast<std::size_t>(classes) + unlabeled;
  }
};

/// Generated domains plus the latent structure behind them.
struct SyntheticDomains {
  std::vector<DomainData> sources;
  DomainData target;
  Tensor class_means;               // C x latent
  Tensor target_projection;         // d_t x latent
  std::vector<Tensor> source_projections;
};

namespace detail {

/// Random d x l matrix with orthonormal columns (modified Gram-Schmidt on Gaussian draws).
inline Tensor random_orthonormal(std::size_t d, std::size_t l, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor p = Tensor::zeros({d, l});
  for (auto& v : p.values()) v = normal(rng);
  auto m = p.mat();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) m.col(j) -= m.col(i).dot(m.col(j)) * m.col(i);
    m.col(j) /= m.col(j).norm();
  }
  return p;
}

inline DomainData sample_domain(std::string name, const Tensor& means, const Tensor& proj,
                                std::size_t n, double spread, double noise,
                                std::mt19937_64& rng) {
  const std::size_t classes = means.rows();
  const std::size_t latent = means.cols();
  const std::size_t d = proj.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor x = Tensor::zeros({n, d});
  std::vector<int> labels(n);
  Eigen::VectorXd z(static_cast<Eigen::Index>(latent));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < latent; ++j) {
      z(static_cast<Eigen::Index>(j)) = means(c, j) + spread * normal(rng);
    }
    Eigen::VectorXd xi = proj.mat() * z;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = xi(static_cast<Eigen::Index>(j)) + noise * normal(rng);
  }
  return DomainData{std::move(name), std::move(x), std::move(labels), static_cast<int>(classes)};
}

}  // namespace detail

inline DomainData standardize(const DomainData& domain);

/// Shared-latent heterogeneous domains: latent class Gaussians, a seeded
/// orthonormal projection per domain, then additive Gaussian noise.
inline SyntheticDomains generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const std::size_t classes = static_cast<std::size_t>(spec.classes);
  SyntheticDomains out;
  {
    std::mt19937_64 rng(derive_seed(spec.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    out.class_means = Tensor::zeros({classes, spec.latent_dim});
    for (auto& v : out.class_means.values()) v = normal(rng);
  }
  // Stream 1 is the target; source k uses stream k + 2.
  auto make = [&](std::size_t stream, std::string name, std::size_t d, std::size_t n) {
    std::mt19937_64 rng(derive_seed(spec.seed, stream));
    Tensor proj = detail::random_orthonormal(d, spec.latent_dim, rng);
    DomainData dom =
        detail::sample_domain(std::move(name), out.class_means, proj, n, spec.spread, spec.noise, rng);
    (stream == 1 ? out.target_projection : out.source_projections.emplace_back()) = std::move(proj);
    return dom;
  };
  out.target = make(1, "target", spec.target_dim, spec.target_size());
  for (std::size_t k = 0; k < spec.source_dims.size(); ++k) {
    out.sources.push_back(
        make(k + 2, "source_" + std::to_string(k + 1), spec.source_dims[k], spec.per_class * classes));
  }
  if (spec.standardize) {
    out.target = standardize(out.target);
    for (auto& d : out.sources) d = standardize(d);
  }
  return out;
}

/// Sources first, target last.
inline std::vector<DomainData> generate_synthetic_domains(const SynthSpec& spec) {
  SyntheticDomains s = generate_synthetic(spec);
  std::vector<DomainData> out = std::move(s.sources);
  out.push_back(std::move(s.target));
  return out;
}

/// Standard-normal features with labels drawn independently and uniformly.
inline DomainData generate_noise_domain(std::size_t dim, std::size_t n, int classes,
                                        std::uint64_t seed) {
  if (dim == 0 || n == 0 || classes <= 0) throw ConfigError("noise domain: sizes must be positive");
  std::mt19937_64 rng(derive_seed(seed, 0x6e6f697365ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  Tensor x = Tensor::zeros({n, dim});
  for (auto& v : x.values()) v = normal(rng);
  std::vector<int> labels(n);
  for (int& y : labels) y = label(rng);
  return DomainData{"noise", std::move(x), std::move(labels), classes};
}

/// Per-feature z-score with the domain's own statistics; constant features become 0.
inline DomainData standardize(const DomainData& domain) {
  const std::size_t n = domain.size();
  if (n < 2) throw ConfigError("standardize: need at least 2 samples in '" + domain.name + "'");
  DomainData out = domain;
  auto m = out.features.mat();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    const double var = (m.col(j).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      m.col(j).setZero();
    } else {
      m.col(j) = (m.col(j).array() - mean) / sd;
    }
  }
  return out;
}

struct TargetSplit {
  DomainData labeled;
  DomainData unlabeled;
  SealedLabels held_out;
  std::vector<std::size_t> labeled_indices;
  std::vector<std::size_t> unlabeled_indices;
};

/// Draws `labeled_per_class` samples of every class without replacement;
/// the remainder becomes the unlabeled split.
inline TargetSplit split_target(const DomainData& domain, std::size_t labeled_per_class,
                                std::uint64_t seed) {
  domain.validate();
  if (!domain.labeled()) throw ConfigError("split_target: target '" + domain.name + "' has no labels");
  const auto& y = *domain.labels;
  std::mt19937_64 rng(derive_seed(seed, 0x73706c6974ULL));
  std::vector<bool> chosen(domain.size(), false);
  for (int c = 0; c < domain.classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == c) members.push_back(i);
    }
    if (members.size() <= labeled_per_class) {
      throw ConfigError("split_target: class " + std::to_string(c) + " has " +
                        std::to_string(members.size()) + " samples, need more than " +
                        std::to_string(labeled_per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < labeled_per_class; ++i) chosen[members[i]] = true;
  }
  TargetSplit split;
  for (std::size_t i = 0; i < domain.size(); ++i) {
    (chosen[i] ? split.labeled_indices : split.unlabeled_indices).push_back(i);
  }
  auto labels_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    for (std::size_t i : idx) out.push_back(y[i]);
    return out;
  };
  split.labeled = DomainData{domain.name + "_labeled", domain.features.select_rows(split.labeled_indices),
                             labels_of(split.labeled_indices), domain.classes};
  split.unlabeled = DomainData{domain.name + "_unlabeled",
                               domain.features.select_rows(split.unlabeled_indices), std::nullopt,
                               domain.classes};
  split.held_out = SealedLabels(labels_of(split.unlabeled_indices));
  return split;
}

/// Assembles a task from labeled sources and a fully labeled target domain.
inline MultiSourceTask make_task(std::vector<DomainData> sources, const DomainData& target,
                                 std::size_t labeled_per_class, std::uint64_t split_seed) {
  TargetSplit split = split_target(target, labeled_per_class, split_seed);
  MultiSourceTask task;
  task.sources = std::move(sources);
  task.target_labeled = std::move(split.labeled);
  task.target_unlabeled = std::move(split.unlabeled);
  task.held_out = std::move(split.held_out);
  task.classes = target.classes;
  task.validate();
  return task;
}

/// Error while reading a domain file.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { io, malformed_header, bad_number, row_width, label_range, row_count, mixed_labels };

  ParseError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Parsed header-plus-rows text table shared by the domain and embedding formats.
struct RawDomainTable {
  std::size_t n = 0, d = 0;
  int classes = 0;
  std::vector<int> labels;
  Tensor features;
  std::vector<std::vector<double>> trailing;  // extra columns per row
};

inline RawDomainTable parse_domain_table(std::istream& in, std::size_t trailing_cols) {
  using K = ParseError::Kind;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(K::malformed_header, 1, "missing header");
  ++lineno;
  const auto head = detail::split_ws(line);
  RawDomainTable t;
  long long n = 0, d = 0, c = 0;
  if (head.size() != 3 || !detail::parse_number(head[0], n) || !detail::parse_number(head[1], d) ||
      !detail::parse_number(head[2], c) || n < 0 || d <= 0 || c <= 0) {
    throw ParseError(K::malformed_header, 1, "header must be 'n d C' with d, C positive");
  }
  t.n = static_cast<std::size_t>(n);
  t.d = static_cast<std::size_t>(d);
  t.classes = static_cast<int>(c);
  std::vector<double> values;
  values.reserve(t.n * t.d);
  const std::size_t width = 1 + t.d + trailing_cols;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (rows == t.n) throw ParseError(K::row_count, lineno, "more rows than header declares");
    if (tok.size() != width) {
      throw ParseError(K::row_width, lineno,
                       "expected " + std::to_string(width) + " fields, got " + std::to_string(tok.size()));
    }
    int label = 0;
    if (!detail::parse_number(tok[0], label)) throw ParseError(K::bad_number, lineno, "bad label");
    if (label < -1 || label >= t.classes) {
      throw ParseError(K::label_range, lineno, "label " + std::to_string(label) + " outside [-1, " +
                                                   std::to_string(t.classes) + ")");
    }
    t.labels.push_back(label);
    for (std::size_t j = 1; j <= t.d; ++j) {
      double v = 0.0;
      if (!detail::parse_number(tok[j], v) || !std::isfinite(v)) {
        throw ParseError(K::bad_number, lineno, "bad value '" + std::string(tok[j]) + "'");
      }
      values.push_back(v);
    }
    std::vector<double> extra;
    for (std::size_t j = 1 + t.d; j < width; ++j) {
      double v = 0.0;
      if (!detail::parse_number(tok[j], v)) throw ParseError(K::bad_number, lineno, "bad metadata");
      extra.push_back(v);
    }
    t.trailing.push_back(std::move(extra));
    ++rows;
  }
  if (rows != t.n) {
    throw ParseError(K::row_count, lineno, "header declares " + std::to_string(t.n) + " rows, found " +
                                               std::to_string(rows));
  }
  t.features = Tensor({t.n, t.d}, std::move(values));
  return t;
}

inline DomainData read_domain(std::istream& in, std::string name) {
  RawDomainTable t = parse_domain_table(in, 0);
  const bool any_labeled = std::any_of(t.labels.begin(), t.labels.end(), [](int y) { return y >= 0; });
  const bool any_unlabeled = std::any_of(t.labels.begin(), t.labels.end(), [](int y) { return y < 0; });
  if (any_labeled && any_unlabeled) {
    throw ParseError(ParseError::Kind::mixed_labels, 1, "file mixes labeled and unlabeled rows");
  }
  DomainData dom{std::move(name), std::move(t.features), std::nullopt, t.classes};
  if (any_labeled) dom.labels = std::move(t.labels);
  return dom;
}

/// Reads `n d C` followed by n rows of `label f_1 ... f_d`; label -1 marks unlabeled rows.
inline DomainData load_domain_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(ParseError::Kind::io, 0, "cannot open '" + path + "'");
  std::string name = path;
  if (auto pos = name.find_last_of('/'); pos != std::string::npos) name = name.substr(pos + 1);
  return read_domain(in, name);
}

inline void write_domain(std::ostream& out, const DomainData& domain) {
  out << domain.size() << ' ' << domain.dim() << ' ' << domain.classes << '\n';
  for (std::size_t i = 0; i < domain.size(); ++i) {
    out << (domain.labels ? (*domain.labels)[i] : -1);
    for (std::size_t j = 0; j < domain.dim(); ++j) out << ' ' << detail::format_double(domain.features(i, j));
    out << '\n';
  }
}

inline void save_domain_file(const std::string& path, const DomainData& domain) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_domain(out, domain);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace cwan
