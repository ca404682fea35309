#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "rwr.hpp"

namespace nlgad {

// ---------------------------------------------------------------------------
// Speed schedule and normality pool
// ---------------------------------------------------------------------------

/// Number of estimates admitted to the pool at step j:
/// floor(n * tan(pi/4 * j / T_s)), with p(T_s) = n exactly.
struct SpeedSchedule {
  std::size_t total_steps = 1;
  std::size_t node_count = 0;

  std::size_t operator()(std::size_t j) const {
    if (total_steps < 1) throw ConfigError("selection steps must be >= 1");
    if (j < 1 || j > total_steps)
      throw ConfigError("step " + std::to_string(j) + " outside [1," + std::to_string(total_steps) + "]");
    if (j == total_steps) return node_count;
    const double frac = static_cast<double>(j) / static_cast<double>(total_steps);
    const double p = static_cast<double>(node_count) * std::tan(std::numbers::pi / 4.0 * frac);
    return std::min(node_count, static_cast<std::size_t>(std::floor(p)));
  }
};

inline std::size_t speed(std::size_t j, const SpeedSchedule& schedule) { return schedule(j); }

/// Min-max scaling to [0,1]; a constant vector maps to zeros.
inline std::vector<double> normalize_step_estimates(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) / range;
  return out;
}

/// Indices sorted by ascending value, ties by ascending index.
inline std::vector<NodeId> ascending_order(std::span<const double> values) {
  std::vector<NodeId> idx(values.size());
  std::iota(idx.begin(), idx.end(), NodeId{0});
  std::stable_sort(idx.begin(), idx.end(), [&](NodeId a, NodeId b) { return values[a] < values[b]; });
  return idx;
}

class NormalityPool {
 public:
  NormalityPool() = default;
  explicit NormalityPool(std::size_t n) : entries_(n) {}

  std::size_t num_nodes() const noexcept { return entries_.size(); }
  std::size_t count(NodeId v) const { return entries_[v].size(); }
  const std::vector<double>& entries(NodeId v) const { return entries_[v]; }
  std::size_t total_entries() const {
    std::size_t t = 0;
    for (const auto& e : entries_) t += e.size();
    return t;
  }
  void add(NodeId v, double estimate) { entries_[v].push_back(estimate); }

  /// Mean of node v's pooled estimates; requires at least one entry.
  double mean(NodeId v) const {
    const auto& e = entries_[v];
    if (e.empty()) throw InternalError("node " + std::to_string(v) + " has no pooled estimates");
    double s = 0.0;
    for (double x : e) s += x;
    return s / static_cast<double>(e.size());
  }

 private:
  std::vector<std::vector<double>> entries_;
};

/// Appends the `count` lowest estimates (ties by node index) to the pool.
inline void pool_add(NormalityPool& pool, std::span<const double> estimates, std::size_t count) {
  if (estimates.size() != pool.num_nodes())
    throw InternalError("pool_add: " + std::to_string(estimates.size()) + " estimates for " +
                        std::to_string(pool.num_nodes()) + " nodes");
  count = std::min(count, estimates.size());
  if (count == 0) return;
  auto order = ascending_order(estimates);
  for (std::size_t k = 0; k < count; ++k) pool.add(order[k], estimates[order[k]]);
}

inline void pool_add(NormalityPool& pool, std::span<const double> estimates, std::size_t j,
                     const SpeedSchedule& schedule) {
  pool_add(pool, estimates, schedule(j));
}

struct PseudoLabels {
  double fraction = 0.8;                // K
  std::vector<NodeId> normal_set;       // ascending node ids
  std::vector<double> mean_estimates;   // per node
  std::vector<std::uint8_t> is_normal;  // per node
};

inline std::size_t normal_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("normal fraction K must lie in (0,1]");
  // Small slack so that e.g. 0.7 * 10 lands on 7 despite binary rounding.
  return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

/// Averages each node's pooled estimates and labels the lowest floor(K*n) normal.
inline PseudoLabels finalize_pseudo_labels(const NormalityPool& pool, double fraction) {
  const std::size_t n = pool.num_nodes();
  const std::size_t keep = normal_count(n, fraction);
  PseudoLabels out;
  out.fraction = fraction;
  out.mean_estimates.resize(n);
  for (NodeId v = 0; v < n; ++v) {
    if (pool.count(v) == 0) throw InternalError("node " + std::to_string(v) + " never entered the normality pool");
    out.mean_estimates[v] = pool.mean(v);
  }
  auto order = ascending_order(out.mean_estimates);
  out.normal_set.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(out.normal_set.begin(), out.normal_set.end());
  out.is_normal.assign(n, 0);
  for (auto v : out.normal_set) out.is_normal[v] = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochOptions {
  SamplerConfig sampler;
  std::size_t batch_size = 300;
  double alpha = 0.6;
};

/// Splits a shuffled order into batches of `batch_size`. A trailing batch of a
/// single node is folded into the previous one, since it cannot form a
/// negative pair on its own.
inline std::vector<std::span<const NodeId>> partition_batches(std::span<const NodeId> order, std::size_t batch_size) {
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (order.size() < 2) throw ConfigError("need at least 2 nodes per epoch to form negative pairs");
  std::vector<std::span<const NodeId>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t len = std::min(batch_size, order.size() - start);
    if (order.size() - start - len == 1) ++len;
    out.push_back(order.subspan(start, len));
    if (start + len >= order.size()) break;
  }
  return out;
}

struct EpochResult {
  double loss = 0.0;                // summed over batches
  std::vector<double> estimates;    // indexed by node id; NaN for nodes not visited
};

/// Owns the model parameters and optimizer state and runs epochs over node subsets.
class ContrastTrainer {
 public:
  ContrastTrainer(ModelParams params, ad::AdamOptions opts) : params_(std::move(params)), adam_(opts) {}

  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }
  const ad::AdamState& optimizer() const noexcept { return adam_; }
  void reset_optimizer() { adam_ = ad::AdamState(adam_.options); }

  /// One pass over `nodes`: shuffle, batch, sample fresh subgraphs per target,
  /// forward both contrasts, record per-node estimates from that forward, and
  /// (when `update`) backpropagate and take one Adam step per batch.
  /// `stream_seed` and `stream_path` fix every random draw of the epoch.
  EpochResult run_epoch(const AttributedGraph& graph, std::span<const NodeId> nodes, const EpochOptions& opt,
                        std::uint64_t stream_seed, StreamTag tag, std::uint64_t epoch, bool update = true) {
    check_alpha(opt.alpha);
    opt.sampler.validate();
    std::vector<NodeId> order(nodes.begin(), nodes.end());
    Rng shuffle_rng = make_stream(stream_seed, tag, {epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochResult result;
    result.estimates.assign(graph.num_nodes(), std::numeric_limits<double>::quiet_NaN());
    std::vector<SubgraphSample> samples;
    auto params = params_.all();
    for (auto batch_nodes : partition_batches(order, opt.batch_size)) {
      samples.clear();
      for (NodeId v : batch_nodes) {
        Rng rng = make_stream(stream_seed, StreamTag::sampling, {static_cast<std::uint64_t>(tag), epoch, v});
        samples.push_back(sample_subgraph(graph, v, opt.sampler, rng));
      }
      auto stacked = StackedBatch::from_samples(samples);
      ad::Tape tape;
      auto out = contrast_forward(tape, params_, stacked);
      auto loss = batch_loss(tape, out, opt.alpha);
      result.loss += loss.item();
      auto scores = pair_scores(out);
      for (std::size_t i = 0; i < batch_nodes.size(); ++i)
        result.estimates[batch_nodes[i]] = estimate_anomaly(scores[i], opt.alpha);
      if (update) {
        tape.backward(loss);
        ad::adam_step(params, adam_);
      }
    }
    return result;
  }

 private:
  ModelParams params_;
  ad::AdamState adam_;
};

/// Which estimates enter the pool at each selection step.
enum class PoolPolicy {
  dynamic,    // p(j) lowest per step (full method)
  all_steps,  // every node every step
  last_step,  // every node, final step only
};

inline std::size_t pool_admission(PoolPolicy policy, std::size_t j, const SpeedSchedule& schedule) {
  switch (policy) {
    case PoolPolicy::dynamic: return schedule(j);
    case PoolPolicy::all_steps: return schedule.node_count;
    case PoolPolicy::last_step: return j == schedule.total_steps ? schedule.node_count : 0;
  }
  return 0;
}

struct SelectionResult {
  NormalityPool pool;
  std::vector<double> losses;  // one per step
};

/// Called after each selection step with (j, normalized estimates of all nodes).
using StepObserver = std::function<void(std::size_t, std::span<const double>)>;

inline std::vector<NodeId> all_nodes(const AttributedGraph& graph) {
  std::vector<NodeId> v(graph.num_nodes());
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

/// Phase 1: T_s full passes over all nodes. After each pass the estimates are
/// min-max normalized and the pool admits the lowest pool_admission() of them.
inline SelectionResult selection_phase(ContrastTrainer& trainer, const AttributedGraph& graph, std::size_t steps,
                                       const EpochOptions& opt, std::uint64_t seed,
                                       PoolPolicy policy = PoolPolicy::dynamic, const StepObserver& observer = {}) {
  if (steps < 1) throw ConfigError("selection steps must be >= 1");
  if (opt.batch_size < 2) throw ConfigError("batch size must be >= 2");
  const auto nodes = all_nodes(graph);
  const SpeedSchedule schedule{steps, graph.num_nodes()};
  SelectionResult result{NormalityPool(graph.num_nodes()), {}};
  for (std::size_t j = 1; j <= steps; ++j) {
    auto epoch = trainer.run_epoch(graph, nodes, opt, seed, StreamTag::selection, j);
    result.losses.push_back(epoch.loss);
    auto normalized = normalize_step_estimates(epoch.estimates);
    pool_add(result.pool, normalized, pool_admission(policy, j, schedule));
    if (observer) observer(j, normalized);
  }
  return result;
}

/// Phase 2: `epochs` passes restricted to the pseudo-normal nodes.
inline std::vector<double> learning_phase(ContrastTrainer& trainer, const AttributedGraph& graph,
                                          std::span<const NodeId> normal_set, std::size_t epochs, EpochOptions opt,
                                          std::uint64_t seed) {
  std::vector<double> losses;
  if (epochs == 0) return losses;
  if (normal_set.size() < 2) throw ConfigError("normal set needs at least 2 nodes");
  if (normal_set.size() < opt.batch_size) {
    std::clog << "warning: normal set (" << normal_set.size() << ") smaller than batch size (" << opt.batch_size
              << "); clamping batch size\n";
    opt.batch_size = normal_set.size();
  }
  for (std::size_t t = 1; t <= epochs; ++t)
    losses.push_back(trainer.run_epoch(graph, normal_set, opt, seed, StreamTag::learning, t).loss);
  return losses;
}

// ---------------------------------------------------------------------------
// End-to-end training under one of the ablation modes
// ---------------------------------------------------------------------------

enum class AblationMode {
  full,  // dynamic pool, then normality learning
  aas,   // pool every estimate at every step
  ols,   // pool only the last step's estimates
  osp,   // selection-phase training only, no normality learning
  snp,   // T_s + T_r epochs on all nodes, no selection
};

inline std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::full: return "full";
    case AblationMode::aas: return "aas";
    case AblationMode::ols: return "ols";
    case AblationMode::osp: return "osp";
    case AblationMode::snp: return "snp";
  }
  return "?";
}

inline AblationMode parse_mode(const std::string& s) {
  if (s == "full") return AblationMode::full;
  if (s == "aas") return AblationMode::aas;
  if (s == "ols") return AblationMode::ols;
  if (s == "osp") return AblationMode::osp;
  if (s == "snp") return AblationMode::snp;
  throw ConfigError("unknown mode '" + s + "' (expected full, aas, ols, osp, snp)");
}

inline PoolPolicy pool_policy(AblationMode m) {
  switch (m) {
    case AblationMode::aas: return PoolPolicy::all_steps;
    case AblationMode::ols: return PoolPolicy::last_step;
    default: return PoolPolicy::dynamic;
  }
}

struct TrainOptions {
  ModelConfig model;  // feature_dim is taken from the graph
  ad::AdamOptions adam;
  EpochOptions epoch;
  std::size_t selection_steps = 200;
  std::size_t learning_epochs = 500;
  double normal_fraction = 0.8;
  AblationMode mode = AblationMode::full;
  bool reinit_phase2 = false;
  std::uint64_t seed = 0;
};

struct TrainOutcome {
  ModelParams phase1;                 // snapshot after selection
  std::optional<ModelParams> phase2;  // absent for osp
  NormalityPool pool;
  std::optional<PseudoLabels> labels;  // absent for snp
  std::vector<double> selection_losses;
  std::vector<double> learning_losses;

  const ModelParams& final_model() const { return phase2 ? *phase2 : phase1; }
};

inline TrainOutcome train(const AttributedGraph& graph, TrainOptions opt, const StepObserver& observer = {}) {
  opt.model.feature_dim = graph.feature_dim();
  Rng init_rng = make_stream(opt.seed, StreamTag::init);
  ContrastTrainer trainer(ModelParams::initialize(opt.model, init_rng), opt.adam);

  auto selection =
      selection_phase(trainer, graph, opt.selection_steps, opt.epoch, opt.seed, pool_policy(opt.mode), observer);
  TrainOutcome out{trainer.params().clone(), std::nullopt, std::move(selection.pool), std::nullopt,
                   std::move(selection.losses), {}};

  if (opt.mode == AblationMode::osp) {
    out.labels = finalize_pseudo_labels(out.pool, opt.normal_fraction);
    return out;
  }
  std::vector<NodeId> train_set;
  if (opt.mode == AblationMode::snp) {
    train_set = all_nodes(graph);
  } else {
    out.labels = finalize_pseudo_labels(out.pool, opt.normal_fraction);
    train_set = out.labels->normal_set;
  }
  if (opt.reinit_phase2) {
    Rng rng = make_stream(opt.seed, StreamTag::init, {2});
    trainer = ContrastTrainer(ModelParams::initialize(opt.model, rng), opt.adam);
  }
  out.learning_losses = learning_phase(trainer, graph, train_set, opt.learning_epochs, opt.epoch, opt.seed);
  out.phase2 = trainer.params().clone();
  return out;
}

}  // namespace nlgad
