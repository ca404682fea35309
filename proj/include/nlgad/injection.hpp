#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"

namespace nlgad {

struct InjectionConfig {
  std::size_t candidate_pool_size = 50;  // candidates scanned per contextual anomaly
  std::size_t clique_size = 15;
  std::size_t num_cliques = 1;
  std::uint64_t rng_seed = 0;

  void validate(std::size_t n) const {
    if (clique_size < 2) throw ConfigError("clique_size must be >= 2");
    if (num_cliques * clique_size > n)
      throw CapacityError(std::to_string(num_cliques) + " cliques of " + std::to_string(clique_size) +
                          " exceed node count " + std::to_string(n));
    if (candidate_pool_size < 1 || candidate_pool_size + 1 > n)
      throw ConfigError("candidate_pool_size must be in [1, n-1]");
  }
};

struct InjectionResult {
  AttributedGraph graph;        // labels = previous labels united with the new ones
  std::vector<NodeId> injected;  // ascending
};

struct CombinedInjection {
  AttributedGraph graph;
  std::vector<NodeId> structural;
  std::vector<NodeId> contextual;
};

namespace detail {

/// Draws `k` distinct items from `pool` (partial Fisher-Yates; order is the draw order).
inline std::vector<NodeId> sample_without_replacement(std::vector<NodeId> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

inline std::vector<NodeId> unlabeled_nodes(const AttributedGraph& g) {
  std::vector<NodeId> out;
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (!g.has_labels() || (*g.labels())[v] == 0) out.push_back(v);
  return out;
}

inline Labels merged_labels(const AttributedGraph& g, const std::vector<NodeId>& extra) {
  Labels labels = g.has_labels() ? *g.labels() : Labels(g.num_nodes(), 0);
  for (NodeId v : extra) labels[v] = 1;
  return labels;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Contextual anomalies: each selected node takes the feature row of the
/// candidate (out of `candidate_pool_size` drawn without replacement) that is
/// farthest from it in Euclidean distance. Adjacency is untouched.
inline InjectionResult inject_contextual(const AttributedGraph& graph, std::size_t count, const InjectionConfig& cfg,
                                         Rng& rng) {
  const std::size_t n = graph.num_nodes();
  if (count == 0) return {graph, {}};
  if (cfg.candidate_pool_size < 1 || cfg.candidate_pool_size + 1 > n)
    throw ConfigError("candidate_pool_size must be in [1, n-1]");
  auto eligible = detail::unlabeled_nodes(graph);
  if (count > eligible.size())
    throw CapacityError("requested " + std::to_string(count) + " contextual anomalies but only " +
                        std::to_string(eligible.size()) + " unlabeled nodes");

  auto targets = detail::sample_without_replacement(std::move(eligible), count, rng);
  const Matrix& original = graph.features();
  Matrix features = original;

  std::vector<NodeId> others;
  others.reserve(n - 1);
  for (NodeId v : targets) {
    others.clear();
    for (NodeId u = 0; u < n; ++u)
      if (u != v) others.push_back(u);
    auto candidates = detail::sample_without_replacement(others, cfg.candidate_pool_size, rng);
    NodeId best = candidates.front();
    double best_dist = -1.0;
    for (NodeId u : candidates) {
      const double dist = detail::squared_distance(original.row(v), original.row(u));
      if (dist > best_dist) {
        best_dist = dist;
        best = u;
      }
    }
    std::copy(original.row(best).begin(), original.row(best).end(), features.row(v).begin());
  }

  std::sort(targets.begin(), targets.end());
  auto labels = detail::merged_labels(graph, targets);
  auto out = graph.with_features(std::move(features)).with_labels(std::move(labels));
  return {std::move(out), std::move(targets)};
}

/// Structural anomalies: `num_cliques` disjoint groups of `clique_size`
/// unlabeled nodes, each made fully connected. Existing edges are kept and
/// features are untouched.
inline InjectionResult inject_structural(const AttributedGraph& graph, const InjectionConfig& cfg, Rng& rng) {
  if (cfg.num_cliques == 0) return {graph, {}};
  cfg.validate(graph.num_nodes());
  auto eligible = detail::unlabeled_nodes(graph);
  const std::size_t need = cfg.num_cliques * cfg.clique_size;
  if (need > eligible.size())
    throw CapacityError("need " + std::to_string(need) + " unlabeled nodes for cliques, have " +
                        std::to_string(eligible.size()));

  auto members = detail::sample_without_replacement(std::move(eligible), need, rng);
  std::vector<Edge> extra;
  for (std::size_t c = 0; c < cfg.num_cliques; ++c) {
    const auto first = members.begin() + static_cast<std::ptrdiff_t>(c * cfg.clique_size);
    for (auto a = first; a != first + static_cast<std::ptrdiff_t>(cfg.clique_size); ++a)
      for (auto b = a + 1; b != first + static_cast<std::ptrdiff_t>(cfg.clique_size); ++b) extra.emplace_back(*a, *b);
  }

  std::sort(members.begin(), members.end());
  auto labels = detail::merged_labels(graph, members);
  auto out = graph.with_added_edges(extra).with_labels(std::move(labels));
  return {std::move(out), std::move(members)};
}

/// Half structural (as total / (2 * clique_size) cliques), then half
/// contextual on the remaining unlabeled nodes.
inline CombinedInjection inject_combined(const AttributedGraph& graph, std::size_t total_anomalies,
                                         InjectionConfig cfg, Rng& rng) {
  if (total_anomalies % 2 != 0) throw ConfigError("total anomalies must be even");
  const std::size_t half = total_anomalies / 2;
  if (cfg.clique_size < 2) throw ConfigError("clique_size must be >= 2");
  if (half % cfg.clique_size != 0)
    throw ConfigError("half of the anomalies (" + std::to_string(half) + ") must be a multiple of clique_size " +
                      std::to_string(cfg.clique_size));
  if (total_anomalies == 0) return {graph, {}, {}};

  cfg.num_cliques = half / cfg.clique_size;
  auto structural = inject_structural(graph, cfg, rng);
  auto contextual = inject_contextual(structural.graph, half, cfg, rng);
  return {std::move(contextual.graph), std::move(structural.injected), std::move(contextual.injected)};
}

}  // namespace nlgad
