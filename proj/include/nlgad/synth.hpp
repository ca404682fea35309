#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "injection.hpp"
#include "rng.hpp"

namespace nlgad {

/// Planted-partition stochastic block model with block-specific Gaussian
/// features. Nodes are assigned to blocks contiguously.
struct SbmConfig {
  std::size_t nodes = 500;
  std::size_t blocks = 4;
  double p_in = 0.03;       // ~3.7 expected intra-block neighbors at 125 nodes per block
  double p_out = 0.001;     // ~0.4 expected inter-block neighbors
  std::size_t feature_dim = 32;
  double center_scale = 1.0;  // std of each block's center coordinates
  double feature_noise = 0.5;  // std of per-node deviation from its block center

  void validate() const {
    if (nodes < 2 || blocks < 1 || blocks > nodes) throw ConfigError("sbm: need 1 <= blocks <= nodes, nodes >= 2");
    if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1) throw ConfigError("sbm: probabilities must lie in [0,1]");
    if (feature_dim < 1) throw ConfigError("sbm: feature_dim must be >= 1");
  }
};

inline std::size_t sbm_block(const SbmConfig& cfg, NodeId v) { return static_cast<std::size_t>(v) * cfg.blocks / cfg.nodes; }

inline AttributedGraph generate_sbm(const SbmConfig& cfg, Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Edge> edges;
  for (NodeId u = 0; u < cfg.nodes; ++u)
    for (NodeId v = u + 1; v < cfg.nodes; ++v) {
      const double p = sbm_block(cfg, u) == sbm_block(cfg, v) ? cfg.p_in : cfg.p_out;
      if (coin(rng) < p) edges.emplace_back(u, v);
    }

  std::normal_distribution<double> center(0.0, cfg.center_scale);
  std::normal_distribution<double> noise(0.0, cfg.feature_noise);
  Matrix centers(cfg.blocks, cfg.feature_dim);
  for (auto& x : centers.values()) x = center(rng);
  Matrix features(cfg.nodes, cfg.feature_dim);
  for (NodeId v = 0; v < cfg.nodes; ++v) {
    auto c = centers.row(sbm_block(cfg, v));
    auto row = features.row(v);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j) row[j] = c[j] + noise(rng);
  }
  return AttributedGraph::from_edges(cfg.nodes, edges, std::move(features));
}

/// The benchmark used by the acceptance suite: 500-node, 4-block SBM with
/// 32-dimensional features, plus `anomalies` injected anomalies (half as
/// cliques of 15, half contextual with 50 candidates).
inline AttributedGraph synthetic_benchmark(std::uint64_t seed, std::size_t anomalies = 30) {
  Rng graph_rng = make_stream(seed, StreamTag::synth);
  auto clean = generate_sbm(SbmConfig{}, graph_rng);
  Rng inject_rng = make_stream(seed, StreamTag::injection);
  InjectionConfig icfg;
  icfg.rng_seed = seed;
  auto injected = inject_combined(clean, anomalies, icfg, inject_rng);
  if (!injected.graph.has_labels()) return injected.graph.with_labels(Labels(injected.graph.num_nodes(), 0));
  return std::move(injected.graph);
}

}  // namespace nlgad
