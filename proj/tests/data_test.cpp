#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cwan/data.hpp"
#include "oracles.hpp"

using namespace cwan;

namespace {

SynthSpec small_spec(std::uint64_t seed = 3) {
  SynthSpec s;
  s.source_dims = {12, 20};
  s.target_dim = 30;
  s.latent_dim = 5;
  s.per_class = 40;
  s.unlabeled = 60;
  s.seed = seed;
  return s;
}

// Nearest-centroid predictions for `query` given labeled `train` rows.
std::vector<int> nearest_centroid(const oracle::Mat& train, const std::vector<int>& y, const oracle::Mat& query,
                                  int classes) {
  oracle::Mat centroids = oracle::Mat::Zero(classes, train.cols());
  std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    centroids.row(y[static_cast<std::size_t>(i)]) += train.row(i);
    count[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
  }
  for (int c = 0; c < classes; ++c) centroids.row(c) /= count[static_cast<std::size_t>(c)];
  std::vector<int> pred;
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    Eigen::Index best = 0;
    (centroids.rowwise() - query.row(i)).rowwise().squaredNorm().minCoeff(&best);
    pred.push_back(static_cast<int>(best));
  }
  return pred;
}

double agreement(const std::vector<int>& a, const std::vector<int>& b) {
  double hit = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return hit / static_cast<double>(a.size());
}

}  // namespace

TEST(Synthetic, SameSeedIsBitIdentical) {
  const auto a = generate_synthetic(small_spec()), b = generate_synthetic(small_spec());
  for (std::size_t k = 0; k < a.sources.size(); ++k) {
    EXPECT_EQ(a.sources[k].features, b.sources[k].features);
    EXPECT_EQ(a.sources[k].labels, b.sources[k].labels);
  }
  EXPECT_EQ(a.target.features, b.target.features);
  EXPECT_NE(a.target.features, generate_synthetic(small_spec(4)).target.features);
}

TEST(Synthetic, DefaultSweepShape) {
  const SynthSpec spec;
  EXPECT_EQ(spec.source_dims, (std::vector<std::size_t>{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000}));
  EXPECT_EQ(spec.target_dim, 2000u);
  EXPECT_EQ(spec.classes, 3);
  EXPECT_EQ(spec.latent_dim, 10u);
  SynthSpec light = spec;
  light.per_class = 5;
  light.unlabeled = 10;
  const auto domains = generate_synthetic_domains(light);
  ASSERT_EQ(domains.size(), 11u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(domains[k].dim(), 100 * (k + 1));
    EXPECT_EQ(domains[k].size(), 15u);
    EXPECT_EQ(domains[k].class_counts(), (std::vector<std::size_t>{5, 5, 5}));
  }
  EXPECT_EQ(domains[10].dim(), 2000u);
  EXPECT_EQ(domains[10].size(), light.target_size());
}

TEST(Synthetic, ProjectionsHaveOrthonormalColumns) {
  const auto d = generate_synthetic(small_spec());
  for (const Tensor& p : d.source_projections) {
    const oracle::Mat m = oracle::to_mat(p);
    EXPECT_LT((m.transpose() * m - oracle::Mat::Identity(m.cols(), m.cols())).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Synthetic, DimensionBelowLatentIsRejected) {
  SynthSpec s = small_spec();
  s.source_dims = {4};
  EXPECT_THROW(generate_synthetic(s), ConfigError);
}

TEST(Synthetic, DegenerateSpreadIsPerfectlySeparable) {
  SynthSpec s = small_spec();
  s.spread = 1e-9;
  s.noise = 1e-9;
  for (const DomainData& dom : generate_synthetic_domains(s)) {
    const oracle::Mat x = oracle::to_mat(dom.features);
    EXPECT_EQ(agreement(nearest_centroid(x, *dom.labels, x, s.classes), *dom.labels), 1.0) << dom.name;
  }
}

TEST(Synthetic, DomainsAreRelatedThroughTheLatentSpace) {
  SynthSpec s = small_spec(11);
  s.spread = 0.5;
  s.noise = 0.1;
  const auto d = generate_synthetic(s);
  const oracle::Mat za = oracle::to_mat(d.sources[0].features) * oracle::to_mat(d.source_projections[0]);
  const oracle::Mat zb = oracle::to_mat(d.target.features) * oracle::to_mat(d.target_projection);
  const auto pred = nearest_centroid(za, *d.sources[0].labels, zb, s.classes);
  EXPECT_GT(agreement(pred, *d.target.labels), 1.0 / s.classes + 0.2);
}

TEST(Synthetic, StandardizeFlagAppliesPerDomain) {
  SynthSpec s = small_spec();
  s.standardize = true;
  const auto d = generate_synthetic(s);
  const oracle::Mat x = oracle::to_mat(d.sources[1].features);
  EXPECT_LT(x.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Noise, ShapeDeterminismAndCounts) {
  const DomainData a = generate_noise_domain(7, 300, 3, 5), b = generate_noise_domain(7, 300, 3, 5);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_EQ(a.dim(), 7u);
  for (std::size_t c : a.class_counts()) {
    EXPECT_GE(c, 70u);
    EXPECT_LE(c, 130u);
  }
  EXPECT_THROW(generate_noise_domain(0, 3, 3, 0), ConfigError);
}

TEST(Noise, LabelsCarryNoSignal) {
  const DomainData train = generate_noise_domain(20, 600, 3, 1);
  const DomainData test = generate_noise_domain(20, 600, 3, 2);
  const auto pred =
      nearest_centroid(oracle::to_mat(train.features), *train.labels, oracle::to_mat(test.features), 3);
  EXPECT_NEAR(agreement(pred, *test.labels), 1.0 / 3.0, 0.1);
}

TEST(Split, IsAPartitionWithExactPerClassCounts) {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int classes = gen.integer(2, 5);
    const std::size_t lpc = static_cast<std::size_t>(gen.integer(1, 4));
    const std::size_t n = static_cast<std::size_t>(classes) * (lpc + 1) + static_cast<std::size_t>(gen.integer(0, 40));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    std::shuffle(y.begin(), y.end(), gen.engine());
    const DomainData dom{"t", gen.matrix(n, 3), y, classes};
    const std::uint64_t seed = static_cast<std::uint64_t>(trial);
    const TargetSplit s = split_target(dom, lpc, seed);

    EXPECT_EQ(s.labeled.size() + s.unlabeled.size(), n);
    std::set<std::size_t> all(s.labeled_indices.begin(), s.labeled_indices.end());
    all.insert(s.unlabeled_indices.begin(), s.unlabeled_indices.end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(s.labeled.class_counts(), std::vector<std::size_t>(static_cast<std::size_t>(classes), lpc));
    EXPECT_FALSE(s.unlabeled.labeled());
    for (std::size_t i = 0; i < s.unlabeled_indices.size(); ++i) {
      EXPECT_EQ(s.held_out.reveal_for_evaluation()[i], y[s.unlabeled_indices[i]]);
      EXPECT_EQ(s.unlabeled.features.row(i), dom.features.row(s.unlabeled_indices[i]));
    }
    EXPECT_EQ(split_target(dom, lpc, seed).labeled_indices, s.labeled_indices);
  }
}

TEST(Split, ThreePerClassGivesNineLabeled) {
  const auto d = generate_synthetic(small_spec());
  const TargetSplit s = split_target(d.target, 3, 0);
  EXPECT_EQ(s.labeled.size(), 9u);
  EXPECT_EQ(s.labeled.class_counts(), (std::vector<std::size_t>{3, 3, 3}));
}

TEST(Split, TooFewSamplesInAClass) {
  const DomainData dom{"t", Tensor::zeros({4, 2}), std::vector<int>{0, 0, 0, 1}, 2};
  EXPECT_THROW(split_target(dom, 1, 0), ConfigError);
}

TEST(Standardize, MomentsIdempotenceAndConstantColumns) {
  oracle::Gen gen(2);
  Tensor x = gen.matrix(50, 4, 3.0);
  for (std::size_t i = 0; i < 50; ++i) {
    x(i, 1) += 10.0;
    x(i, 3) = 7.5;
  }
  const DomainData once = standardize(DomainData{"d", x, std::nullopt, 2});
  const oracle::Mat m = oracle::to_mat(once.features);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(m.col(j).mean(), 0.0, 1e-12);
    EXPECT_NEAR((m.col(j).array() - m.col(j).mean()).square().mean(), 1.0, 1e-12);
  }
  EXPECT_EQ(m.col(3).cwiseAbs().maxCoeff(), 0.0);
  const DomainData twice = standardize(once);
  EXPECT_LT((oracle::to_mat(twice.features) - m).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(standardize(DomainData{"d", Tensor::zeros({1, 2}), std::nullopt, 2}), ConfigError);
}

TEST(DomainFile, ParsesTheDocumentedExample) {
  std::istringstream in("2 3 2\n0 1.5 2 -3\n1 0 0.25 1e-3\n");
  const DomainData d = read_domain(in, "x");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 3u);
  EXPECT_EQ(d.classes, 2);
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(d.features(1, 2), 1e-3);
}

TEST(DomainFile, AllMinusOneMeansUnlabeled) {
  std::istringstream in("2 1 3\n-1 0.5\n-1 1.5\n");
  EXPECT_FALSE(read_domain(in, "x").labeled());
}

TEST(DomainFile, ErrorsNameTheKindAndLine) {
  using K = ParseError::Kind;
  const std::vector<std::tuple<std::string, K, std::size_t>> cases = {
      {"2 3\n", K::malformed_header, 1},
      {"2 3 2\n0 1 2 3\n1 1 2\n", K::row_width, 3},
      {"1 2 2\n2 1 1\n", K::label_range, 2},
      {"1 2 2\n0 1 zz\n", K::bad_number, 2},
      {"1 2 2\n0 1 nan\n", K::bad_number, 2},
      {"2 2 2\n0 1 1\n", K::row_count, 2},
      {"1 2 2\n0 1 1\n1 1 1\n", K::row_count, 3},
      {"2 1 2\n0 1\n-1 2\n", K::mixed_labels, 1},
  };
  for (const auto& [text, kind, line] : cases) {
    std::istringstream in(text);
    try {
      read_domain(in, "x");
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.kind(), kind) << text;
      EXPECT_EQ(e.line(), line) << text;
    }
  }
  EXPECT_THROW(load_domain_file("/nonexistent/domain.txt"), ParseError);
}

TEST(DomainFile, SaveLoadRoundTripIsBitExact) {
  oracle::Gen gen(17);
  const auto dir = std::filesystem::temp_directory_path() / "cwan_data_test";
  std::filesystem::create_directories(dir);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = gen.matrix(6, 5);
    for (auto& v : x.values()) v *= std::pow(10.0, gen.integer(-300, 300));
    x(0, 0) = 5e-324;
    x(1, 1) = -0.0;
    DomainData d{"d", x, std::nullopt, 3};
    if (trial % 2 == 0) d.labels = gen.labels(6, 3);
    const std::string path = (dir / "d.txt").string();
    save_domain_file(path, d);
    const DomainData back = load_domain_file(path);
    EXPECT_EQ(back.labels, d.labels);
    ASSERT_EQ(back.features.shape(), d.features.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back.features[i]), std::bit_cast<std::uint64_t>(x[i]));
    }
  }
  std::filesystem::remove_all(dir);
}
