#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "rng.hpp"
#include "rwr.hpp"

namespace nlgad {

struct ModelConfig {
  std::size_t feature_dim = 0;
  std::size_t hidden_dim = 64;
  std::size_t gcn_layers = 1;

  void validate() const {
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (gcn_layers < 1) throw ConfigError("gcn_layers must be >= 1");
  }
};

/// Trainable weights of both contrast branches. Layer 0 maps d -> d', later
/// layers d' -> d'. The subgraph-node branch uses one weight stack for both
/// its GCN and its MLP; the node-node branch has separate stacks.
///
/// Copies share storage (tensors are handles); use clone() for a snapshot.
struct ModelParams {
  ModelConfig config;
  std::vector<ad::Tensor> sn_weights;
  ad::Tensor sn_bilinear;
  std::vector<ad::Tensor> nn_gcn_weights;
  std::vector<ad::Tensor> nn_mlp_weights;
  ad::Tensor nn_bilinear;

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per matrix, drawn in
  /// parameter order.
  static ModelParams initialize(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    auto draw = [&rng](std::size_t rows, std::size_t cols) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      std::uniform_real_distribution<double> u(-bound, bound);
      Matrix m(rows, cols);
      for (auto& x : m.values()) x = u(rng);
      return ad::Tensor::parameter(std::move(m));
    };
    auto stack = [&](std::vector<ad::Tensor>& out) {
      for (std::size_t l = 0; l < cfg.gcn_layers; ++l)
        out.push_back(draw(l == 0 ? cfg.feature_dim : cfg.hidden_dim, cfg.hidden_dim));
    };
    ModelParams p;
    p.config = cfg;
    stack(p.sn_weights);
    p.sn_bilinear = draw(cfg.hidden_dim, cfg.hidden_dim);
    stack(p.nn_gcn_weights);
    stack(p.nn_mlp_weights);
    p.nn_bilinear = draw(cfg.hidden_dim, cfg.hidden_dim);
    return p;
  }

  /// Every trainable tensor in a fixed order (checkpoints and the optimizer rely on it).
  std::vector<ad::Tensor> all() const {
    std::vector<ad::Tensor> out(sn_weights.begin(), sn_weights.end());
    out.push_back(sn_bilinear);
    out.insert(out.end(), nn_gcn_weights.begin(), nn_gcn_weights.end());
    out.insert(out.end(), nn_mlp_weights.begin(), nn_mlp_weights.end());
    out.push_back(nn_bilinear);
    return out;
  }

  ModelParams clone() const {
    ModelParams p;
    p.config = config;
    auto copy = [](const ad::Tensor& t) { return ad::Tensor::parameter(t.value()); };
    for (const auto& t : sn_weights) p.sn_weights.push_back(copy(t));
    p.sn_bilinear = copy(sn_bilinear);
    for (const auto& t : nn_gcn_weights) p.nn_gcn_weights.push_back(copy(t));
    for (const auto& t : nn_mlp_weights) p.nn_mlp_weights.push_back(copy(t));
    p.nn_bilinear = copy(nn_bilinear);
    return p;
  }

  bool all_finite() const {
    for (const auto& t : all())
      for (double x : t.value().values())
        if (!std::isfinite(x)) return false;
    return true;
  }
};

/// B subgraph samples stacked for one batched forward pass.
struct StackedBatch {
  std::size_t batch_size = 0;
  std::size_t subgraph_size = 0;
  std::shared_ptr<const std::vector<Matrix>> adjacency;  // normalized, one c x c block per sample
  Matrix features;                                       // (B*c) x d, target rows masked
  Matrix target_features;                                // B x d

  static StackedBatch from_samples(std::span<const SubgraphSample> samples) {
    if (samples.empty()) throw ConfigError("empty batch");
    StackedBatch b;
    b.batch_size = samples.size();
    b.subgraph_size = samples.front().size();
    const std::size_t c = b.subgraph_size;
    const std::size_t d = samples.front().features_masked.cols();
    auto adj = std::make_shared<std::vector<Matrix>>();
    adj->reserve(samples.size());
    b.features = Matrix(b.batch_size * c, d);
    b.target_features = Matrix(b.batch_size, d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (s.size() != c || s.features_masked.cols() != d)
        throw DimensionError("batch samples must share subgraph size and feature dimension");
      adj->push_back(normalized_adjacency(s));
      std::copy(s.features_masked.values().begin(), s.features_masked.values().end(),
                b.features.values().begin() + static_cast<std::ptrdiff_t>(i * c * d));
      std::copy(s.target_features.values().begin(), s.target_features.values().end(), b.target_features.row(i).begin());
    }
    b.adjacency = std::move(adj);
    return b;
  }
};

/// Per-branch forward products for a batch. `context` is the subgraph side
/// (readout z for SN, target-row embedding u for NN); `node` is the MLP
/// embedding of the unmasked target features.
struct BranchOutput {
  ad::Tensor context;   // B x d'
  ad::Tensor node;      // B x d'
  ad::Tensor positive;  // B x 1
  ad::Tensor negative;  // B x 1; context of the next batch node against this node
};

struct ContrastOutput {
  BranchOutput sn;
  BranchOutput nn;
};

/// Similarities of one node in both branches, each in (0,1).
struct PairScores {
  double sn_positive = 0.5;
  double sn_negative = 0.5;
  double nn_positive = 0.5;
  double nn_negative = 0.5;
};

namespace detail {

inline ad::Tensor gcn(ad::Tape& tape, std::span<const ad::Tensor> weights, const StackedBatch& batch) {
  ad::Tensor h = ad::Tensor::constant(batch.features);
  for (const auto& w : weights) h = ad::relu(tape, ad::matmul(tape, ad::block_aggregate(tape, batch.adjacency, h), w));
  return h;
}

inline ad::Tensor mlp(ad::Tape& tape, std::span<const ad::Tensor> weights, const Matrix& x) {
  ad::Tensor h = ad::Tensor::constant(x);
  for (const auto& w : weights) h = ad::relu(tape, ad::matmul(tape, h, w));
  return h;
}

/// Row i pairs with row (i+1) mod B.
inline std::vector<std::size_t> cyclic_shift(std::size_t b) {
  std::vector<std::size_t> idx(b);
  for (std::size_t i = 0; i < b; ++i) idx[i] = (i + 1) % b;
  return idx;
}

inline void check_batch(const ModelParams& params, const StackedBatch& batch) {
  if (batch.features.cols() != params.config.feature_dim)
    throw DimensionError("features have dimension " + std::to_string(batch.features.cols()) + ", model expects " +
                         std::to_string(params.config.feature_dim));
}

}  // namespace detail

/// Subgraph-node contrast: GCN over the masked subgraph, mean readout, MLP of
/// the target features through the same weights, bilinear similarity.
inline BranchOutput sn_forward(ad::Tape& tape, const ModelParams& params, const StackedBatch& batch) {
  detail::check_batch(params, batch);
  auto h = detail::gcn(tape, params.sn_weights, batch);
  BranchOutput out;
  out.context = ad::block_row_mean(tape, h, batch.subgraph_size);
  out.node = detail::mlp(tape, params.sn_weights, batch.target_features);
  out.positive = ad::bilinear(tape, out.context, params.sn_bilinear, out.node);
  if (batch.batch_size > 1) {
    auto shifted = ad::gather_rows(tape, out.context, detail::cyclic_shift(batch.batch_size));
    out.negative = ad::bilinear(tape, shifted, params.sn_bilinear, out.node);
  }
  return out;
}

/// Node-node contrast: separate GCN; the target's row (position 0 of each
/// block) is its neighbor-aggregated embedding, compared with a separate MLP
/// of its true features.
inline BranchOutput nn_forward(ad::Tape& tape, const ModelParams& params, const StackedBatch& batch) {
  detail::check_batch(params, batch);
  auto h = detail::gcn(tape, params.nn_gcn_weights, batch);
  std::vector<std::size_t> target_rows(batch.batch_size);
  for (std::size_t i = 0; i < batch.batch_size; ++i) target_rows[i] = i * batch.subgraph_size;
  BranchOutput out;
  out.context = ad::gather_rows(tape, h, std::move(target_rows));
  out.node = detail::mlp(tape, params.nn_mlp_weights, batch.target_features);
  out.positive = ad::bilinear(tape, out.context, params.nn_bilinear, out.node);
  if (batch.batch_size > 1) {
    auto shifted = ad::gather_rows(tape, out.context, detail::cyclic_shift(batch.batch_size));
    out.negative = ad::bilinear(tape, shifted, params.nn_bilinear, out.node);
  }
  return out;
}

inline BranchOutput sn_forward(ad::Tape& tape, const ModelParams& params, const SubgraphSample& sample) {
  return sn_forward(tape, params, StackedBatch::from_samples(std::span(&sample, 1)));
}

inline BranchOutput nn_forward(ad::Tape& tape, const ModelParams& params, const SubgraphSample& sample) {
  return nn_forward(tape, params, StackedBatch::from_samples(std::span(&sample, 1)));
}

inline ContrastOutput contrast_forward(ad::Tape& tape, const ModelParams& params, const StackedBatch& batch) {
  if (batch.batch_size < 2) throw ConfigError("contrast batches need at least 2 nodes to form negative pairs");
  return {sn_forward(tape, params, batch), nn_forward(tape, params, batch)};
}

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie strictly inside (0,1)");
}

/// BCE over positive pairs (label 1) plus negative pairs (label 0).
inline ad::Tensor branch_loss(ad::Tape& tape, const BranchOutput& branch) {
  return ad::add(tape, ad::bce_loss(tape, branch.positive, 1.0), ad::bce_loss(tape, branch.negative, 0.0));
}

inline ad::Tensor combine_losses(ad::Tape& tape, const ad::Tensor& sn_loss, const ad::Tensor& nn_loss, double alpha) {
  check_alpha(alpha);
  return ad::add(tape, ad::scale(tape, sn_loss, alpha), ad::scale(tape, nn_loss, 1.0 - alpha));
}

inline ad::Tensor batch_loss(ad::Tape& tape, const ContrastOutput& out, double alpha) {
  check_alpha(alpha);
  return combine_losses(tape, branch_loss(tape, out.sn), branch_loss(tape, out.nn), alpha);
}

inline std::vector<PairScores> pair_scores(const ContrastOutput& out) {
  const std::size_t b = out.sn.positive.rows();
  std::vector<PairScores> scores(b);
  for (std::size_t i = 0; i < b; ++i)
    scores[i] = {out.sn.positive.value()[i], out.sn.negative.value()[i], out.nn.positive.value()[i],
                 out.nn.negative.value()[i]};
  return scores;
}

/// Anomaly degree: alpha * (s_n - s_p)_SN + (1 - alpha) * (s_n - s_p)_NN, in [-1, 1].
inline double estimate_anomaly(const PairScores& s, double alpha) {
  return alpha * (s.sn_negative - s.sn_positive) + (1.0 - alpha) * (s.nn_negative - s.nn_positive);
}

// ---------------------------------------------------------------------------
// Checkpoint format (u64 little-endian integers, f64 little-endian reals):
//
//   magic         8 bytes "NLGADCK1"
//   version       u64     currently 1
//   config_hash   u64     hash of the training configuration
//   feature_dim   u64
//   hidden_dim    u64
//   gcn_layers    u64
//   count         u64     number of matrices, 3 * gcn_layers + 2
//   count times:  rows u64, cols u64, rows*cols f64 (row-major)
//
// Matrix order: sn_weights[0..L), sn_bilinear, nn_gcn_weights[0..L),
// nn_mlp_weights[0..L), nn_bilinear.
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kCheckpointMagic{'N', 'L', 'G', 'A', 'D', 'C', 'K', '1'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::uint64_t config_hash = 0;
};

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::uint64_t config_hash) {
  auto out = detail::open_output(path, true);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u64(out, kCheckpointVersion);
  detail::put_u64(out, config_hash);
  detail::put_u64(out, params.config.feature_dim);
  detail::put_u64(out, params.config.hidden_dim);
  detail::put_u64(out, params.config.gcn_layers);
  const auto tensors = params.all();
  detail::put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    detail::put_u64(out, t.rows());
    detail::put_u64(out, t.cols());
    for (double x : t.value().values()) detail::put_f64(out, x);
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), 8) || magic != kCheckpointMagic) throw DataError(path.string() + ": not a checkpoint");
  if (detail::get_u64(in) != kCheckpointVersion) throw DataError(path.string() + ": unsupported checkpoint version");
  Checkpoint ck;
  ck.config_hash = detail::get_u64(in);
  ModelConfig cfg;
  cfg.feature_dim = detail::get_u64(in);
  cfg.hidden_dim = detail::get_u64(in);
  cfg.gcn_layers = detail::get_u64(in);
  cfg.validate();
  const auto count = detail::get_u64(in);
  if (count != 3 * cfg.gcn_layers + 2) throw DataError(path.string() + ": unexpected matrix count");

  // Shapes come from a fresh layout so a corrupted header cannot slip through.
  Rng dummy(0);
  ModelParams p = ModelParams::initialize(cfg, dummy);
  for (auto& t : p.all()) {
    const auto rows = detail::get_u64(in);
    const auto cols = detail::get_u64(in);
    if (rows != t.rows() || cols != t.cols()) throw DataError(path.string() + ": matrix shape mismatch");
    auto copy = t;
    for (auto& x : copy.value_mut().values()) x = detail::get_f64(in);
  }
  ck.params = std::move(p);
  return ck;
}

}  // namespace nlgad
