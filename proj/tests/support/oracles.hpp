#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <nlgad/autodiff.hpp>
#include <nlgad/graph.hpp>
#include <nlgad/rwr.hpp>

namespace nlgad::oracle {

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

inline constexpr double kFdStep = 1e-6;
/// Gradients smaller than this are compared absolutely: central differences
/// carry ~1e-10 roundoff regardless of the gradient's size.
inline constexpr double kGradFloor = 1e-3;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

using LossBuilder = std::function<ad::Tensor(ad::Tape&)>;

/// Max relative error between tape gradients and central differences over
/// every entry of every tensor in `inputs`.
inline double gradient_check(const LossBuilder& build, std::vector<ad::Tensor> inputs) {
  for (auto& t : inputs) t.zero_grad();
  {
    ad::Tape tape;
    auto loss = build(tape);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& t : inputs) {
    const Matrix analytic = t.grad();
    for (std::size_t i = 0; i < t.value().size(); ++i) {
      const double orig = t.value()[i];
      t.value_mut()[i] = orig + kFdStep;
      ad::Tape tp;
      const double up = build(tp).item();
      t.value_mut()[i] = orig - kFdStep;
      ad::Tape tm;
      const double down = build(tm).item();
      t.value_mut()[i] = orig;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * kFdStep)));
    }
  }
  return worst;
}

/// Entries uniform in [lo, hi] with random sign, so |x| >= lo keeps ReLU
/// inputs away from the kink.
inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = 0.1, double hi = 1.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = sign(rng) ? mag(rng) : -mag(rng);
  return m;
}

// ---------------------------------------------------------------------------
// AUC by exhaustive pair counting
// ---------------------------------------------------------------------------

inline double brute_force_auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (!labels[a]) continue;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (labels[b]) continue;
      ++pairs;
      if (scores[a] > scores[b])
        wins += 1.0;
      else if (scores[a] == scores[b])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// RWR: exact distribution of the sampled node list by propagating
// probability mass over walk states (current node, collected list).
// ---------------------------------------------------------------------------

inline std::vector<NodeId> pad_walk(NodeId target, const std::vector<NodeId>& collected, std::size_t c) {
  std::vector<NodeId> out{target};
  for (std::size_t i = 0; out.size() < c; ++i) out.push_back(collected.empty() ? target : collected[i % collected.size()]);
  return out;
}

inline std::map<std::vector<NodeId>, double> rwr_exact_distribution(const AttributedGraph& g, NodeId target,
                                                                    const SamplerConfig& cfg) {
  const std::size_t c = cfg.subgraph_size;
  std::map<std::vector<NodeId>, double> outcome;
  if (g.degree(target) == 0) {
    outcome[pad_walk(target, {}, c)] = 1.0;
    return outcome;
  }
  using State = std::pair<NodeId, std::vector<NodeId>>;
  std::map<State, double> frontier{{{target, {}}, 1.0}};
  for (std::size_t step = 0; step < cfg.step_budget() && !frontier.empty(); ++step) {
    std::map<State, double> next;
    for (const auto& [state, mass] : frontier) {
      const auto& [cur, collected] = state;
      next[{target, collected}] += mass * cfg.restart_prob;
      auto nb = g.neighbors(cur);
      const double move = mass * (1.0 - cfg.restart_prob) / static_cast<double>(nb.size());
      for (NodeId u : nb) {
        auto col = collected;
        if (u != target && std::find(col.begin(), col.end(), u) == col.end()) col.push_back(u);
        if (col.size() == c - 1)
          outcome[pad_walk(target, col, c)] += move;
        else
          next[{u, col}] += move;
      }
    }
    frontier = std::move(next);
  }
  for (const auto& [state, mass] : frontier) outcome[pad_walk(target, state.second, c)] += mass;
  return outcome;
}

inline double total_variation(const std::map<std::vector<NodeId>, double>& p,
                              const std::map<std::vector<NodeId>, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q)
    if (!p.count(k)) tv += std::abs(v);
  return 0.5 * tv;
}

// ---------------------------------------------------------------------------
// Small graphs
// ---------------------------------------------------------------------------

inline AttributedGraph path_graph(std::size_t n, std::size_t d = 2) {
  std::vector<Edge> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return AttributedGraph::from_edges(n, e, Matrix(n, d));
}

inline AttributedGraph star_graph(std::size_t leaves, std::size_t d = 2) {
  std::vector<Edge> e;
  for (NodeId i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return AttributedGraph::from_edges(leaves + 1, e, Matrix(leaves + 1, d));
}

}  // namespace nlgad::oracle
