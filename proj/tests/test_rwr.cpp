#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>

#include <nlgad/rwr.hpp>
#include <nlgad/synth.hpp>

#include "support/oracles.hpp"

using namespace nlgad;

namespace {

Eigen::VectorXd eigenvalues(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(e).eigenvalues();
}

AttributedGraph featured(AttributedGraph g) {
  Matrix x(g.num_nodes(), 2);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    x(i, 0) = static_cast<double>(i) + 1.0;
    x(i, 1) = -2.0 * static_cast<double>(i);
  }
  return g.with_features(std::move(x));
}

}  // namespace

TEST(Rwr, IsolatedTargetIsPaddedWithItself) {
  auto g = featured(AttributedGraph::from_edges(3, std::vector<Edge>{{0, 1}}, Matrix(3, 2)));
  Rng rng(1);
  auto s = sample_subgraph(g, 2, SamplerConfig{}, rng);
  EXPECT_EQ(s.nodes, (std::vector<NodeId>{2, 2, 2, 2}));
  for (double a : s.raw_adjacency.values()) EXPECT_EQ(a, 0.0);
  for (double x : s.features_masked.row(0)) EXPECT_EQ(x, 0.0);
  // Padding copies keep the true features.
  EXPECT_EQ(s.features_masked(1, 0), 3.0);
  EXPECT_EQ(s.target_features(0, 0), 3.0);
}

TEST(Rwr, PadsByCyclingCollectedNodes) {
  auto g = featured(AttributedGraph::from_edges(2, std::vector<Edge>{{0, 1}}, Matrix(2, 2)));
  Rng rng(1);
  auto s = sample_subgraph(g, 0, SamplerConfig{}, rng);
  EXPECT_EQ(s.nodes, (std::vector<NodeId>{0, 1, 1, 1}));
  EXPECT_EQ(s.raw_adjacency(0, 1), 1.0);
  EXPECT_EQ(s.raw_adjacency(1, 2), 0.0);  // duplicates of one node are not adjacent
}

TEST(Rwr, TriangleCollectsBothNeighbors) {
  auto g = AttributedGraph::from_edges(3, std::vector<Edge>{{0, 1}, {1, 2}, {0, 2}}, Matrix(3, 1));
  SamplerConfig cfg;
  cfg.subgraph_size = 3;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto s = sample_subgraph(g, 1, cfg, rng);
    EXPECT_EQ(s.nodes.front(), 1u);
    EXPECT_EQ(std::set<NodeId>(s.nodes.begin() + 1, s.nodes.end()), (std::set<NodeId>{0, 2}));
  }
}

TEST(Rwr, SampleInvariantsOnRandomGraph) {
  Rng grng(3);
  auto g = generate_sbm(SbmConfig{}, grng);
  SamplerConfig cfg;
  Rng rng(9);
  for (NodeId v = 0; v < g.num_nodes(); v += 7) {
    auto s = sample_subgraph(g, v, cfg, rng);
    ASSERT_EQ(s.size(), cfg.subgraph_size);
    EXPECT_EQ(s.target(), v);
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_EQ(s.raw_adjacency(i, i), 0.0);
      for (std::size_t j = 0; j < s.size(); ++j) EXPECT_EQ(s.raw_adjacency(i, j), s.raw_adjacency(j, i));
    }
    for (std::size_t i = 1; i < s.size(); ++i)
      for (std::size_t k = 0; k < g.feature_dim(); ++k) EXPECT_EQ(s.features_masked(i, k), g.features()(s.nodes[i], k));
  }
}

TEST(Rwr, DeterministicForFixedSeed) {
  Rng grng(3);
  auto g = generate_sbm(SbmConfig{}, grng);
  Rng a(77), b(77);
  for (NodeId v = 0; v < 50; ++v) EXPECT_EQ(rwr_walk(g, v, SamplerConfig{}, a), rwr_walk(g, v, SamplerConfig{}, b));
}

TEST(Rwr, PathFrequenciesMatchExactEnumeration) {
  auto g = oracle::path_graph(5);
  SamplerConfig cfg;
  for (NodeId target : {NodeId{0}, NodeId{2}}) {
    auto exact = oracle::rwr_exact_distribution(g, target, cfg);
    std::map<std::vector<NodeId>, double> empirical;
    Rng rng(1000 + target);
    const int samples = 100000;
    for (int i = 0; i < samples; ++i) empirical[rwr_walk(g, target, cfg, rng)] += 1.0 / samples;
    EXPECT_LT(oracle::total_variation(empirical, exact), 0.02) << "target " << target;
  }
}

TEST(NormalizedAdjacency, TwoConnectedNodes) {
  Matrix a(2, 2);
  a(0, 1) = a(1, 0) = 1;
  auto n = normalized_adjacency(a);
  for (double x : n.values()) EXPECT_DOUBLE_EQ(x, 0.5);
}

TEST(NormalizedAdjacency, EdgelessIsIdentity) { EXPECT_EQ(normalized_adjacency(Matrix(4, 4)), Matrix::identity(4)); }

TEST(NormalizedAdjacency, RegularSubgraphRowsSumToOne) {
  // 4-cycle: 2-regular.
  Matrix a(4, 4);
  for (std::size_t i = 0; i < 4; ++i) a(i, (i + 1) % 4) = a((i + 1) % 4, i) = 1;
  auto n = normalized_adjacency(a);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 4; ++j) s += n(i, j);
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
}

TEST(NormalizedAdjacency, SymmetricBoundedSpectrum) {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution edge(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + trial % 6;
    Matrix a(c, c);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = i + 1; j < c; ++j) a(i, j) = a(j, i) = edge(rng) ? 1.0 : 0.0;
    auto n = normalized_adjacency(a);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        EXPECT_EQ(n(i, j), n(j, i));
        EXPECT_GE(n(i, j), 0.0);
        EXPECT_LE(n(i, j), 1.0);
      }
    auto ev = eigenvalues(n);
    EXPECT_GT(ev.minCoeff(), -1.0);
    EXPECT_LE(ev.maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(NormalizedAdjacency, PathOfThreeIsIndefinite) {
  // The augmented normalized adjacency is not PSD in general: on the path
  // 0-1-2 the symmetric mode [a, b, a] has a negative eigenvalue.
  Matrix a(3, 3);
  a(0, 1) = a(1, 0) = a(1, 2) = a(2, 1) = 1;
  auto ev = eigenvalues(normalized_adjacency(a));
  EXPECT_LT(ev.minCoeff(), -0.1);
}

TEST(MaskTarget, OnlyPositionZeroIsMasked) {
  auto g = featured(AttributedGraph::from_edges(3, std::vector<Edge>{{0, 1}}, Matrix(3, 2)));
  auto s = make_sample(g, {2, 2, 1, 2});
  double norm = 0;
  for (double x : s.features_masked.row(0)) norm += x * x;
  EXPECT_EQ(norm, 0.0);
  EXPECT_EQ(s.features_masked(1, 0), g.features()(2, 0));
  EXPECT_EQ(s.features_masked(3, 1), g.features()(2, 1));
  EXPECT_EQ(s.target_features(0, 0), g.features()(2, 0));
  EXPECT_EQ(s.target_features(0, 1), g.features()(2, 1));

  auto again = mask_target(s);
  EXPECT_EQ(again.features_masked, s.features_masked);
}
