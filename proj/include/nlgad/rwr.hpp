#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace nlgad {

struct SamplerConfig {
  std::size_t subgraph_size = 4;
  double restart_prob = 0.5;
  std::uint64_t rng_seed = 0;

  /// Walk steps allowed before padding takes over.
  std::size_t step_budget() const { return 100 * subgraph_size; }

  void validate() const {
    if (subgraph_size < 2) throw ConfigError("subgraph_size must be >= 2");
    if (!(restart_prob > 0.0 && restart_prob < 1.0)) throw ConfigError("restart_prob must be in (0,1)");
  }
};

/// Fixed-size neighborhood of one target. Position 0 is always the target;
/// positions may repeat when the walk could not reach enough distinct nodes.
struct SubgraphSample {
  std::vector<NodeId> nodes;
  Matrix raw_adjacency;     // c x c, induced over positions, zero diagonal
  Matrix features_masked;   // c x d, row 0 zeroed
  Matrix target_features;   // 1 x d, unmasked

  NodeId target() const { return nodes.front(); }
  std::size_t size() const { return nodes.size(); }
};

/// Random walk with restart from `target`. Returns the target followed by the
/// first-visited distinct nodes, padded to `c` entries by cycling through the
/// collected nodes (or repeating the target if nothing was reached).
inline std::vector<NodeId> rwr_walk(const AttributedGraph& graph, NodeId target, const SamplerConfig& cfg, Rng& rng) {
  const std::size_t c = cfg.subgraph_size;
  std::vector<NodeId> collected;
  collected.reserve(c - 1);

  if (graph.degree(target) > 0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    NodeId cur = target;
    for (std::size_t step = 0; step < cfg.step_budget() && collected.size() < c - 1; ++step) {
      if (coin(rng) < cfg.restart_prob) {
        cur = target;
        continue;
      }
      auto nb = graph.neighbors(cur);
      std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
      cur = nb[pick(rng)];
      if (cur != target && std::find(collected.begin(), collected.end(), cur) == collected.end())
        collected.push_back(cur);
    }
  }

  std::vector<NodeId> nodes;
  nodes.reserve(c);
  nodes.push_back(target);
  for (std::size_t i = 0; nodes.size() < c; ++i)
    nodes.push_back(collected.empty() ? target : collected[i % collected.size()]);
  return nodes;
}

/// Copy of `sample` whose row 0 of the masked features is zero. Later
/// positions holding the same node (padding) keep their true features.
inline SubgraphSample mask_target(SubgraphSample sample) {
  auto row = sample.features_masked.row(0);
  std::fill(row.begin(), row.end(), 0.0);
  return sample;
}

/// Builds the sample for an explicit node list (target first).
inline SubgraphSample make_sample(const AttributedGraph& graph, std::vector<NodeId> nodes) {
  const std::size_t c = nodes.size();
  const std::size_t d = graph.feature_dim();
  SubgraphSample s;
  s.raw_adjacency = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      if (i != j && graph.has_edge(nodes[i], nodes[j])) s.raw_adjacency(i, j) = 1.0;
  s.features_masked = Matrix(c, d);
  for (std::size_t i = 0; i < c; ++i) {
    auto src = graph.feature_row(nodes[i]);
    std::copy(src.begin(), src.end(), s.features_masked.row(i).begin());
  }
  s.target_features = Matrix(1, d);
  auto t = graph.feature_row(nodes[0]);
  std::copy(t.begin(), t.end(), s.target_features.row(0).begin());
  s.nodes = std::move(nodes);
  return mask_target(std::move(s));
}

inline SubgraphSample sample_subgraph(const AttributedGraph& graph, NodeId target, const SamplerConfig& cfg, Rng& rng) {
  return make_sample(graph, rwr_walk(graph, target, cfg, rng));
}

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
inline Matrix normalized_adjacency(const Matrix& raw_adjacency) {
  const std::size_t c = raw_adjacency.rows();
  Matrix a = raw_adjacency;
  for (std::size_t i = 0; i < c; ++i) a(i, i) += 1.0;
  std::vector<double> inv_sqrt(c);
  for (std::size_t i = 0; i < c; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < c; ++j) deg += a(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  return a;
}

inline Matrix normalized_adjacency(const SubgraphSample& sample) { return normalized_adjacency(sample.raw_adjacency); }

/// Debug dump: one line per sample, "target: n0 n1 ... | edges i-j ...".
inline void dump_sample(std::ostream& out, const SubgraphSample& s) {
  out << s.target() << ':';
  for (auto v : s.nodes) out << ' ' << v;
  out << " |";
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (s.raw_adjacency(i, j) != 0.0) out << ' ' << i << '-' << j;
  out << '\n';
}

}  // namespace nlgad
