#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "matrix.hpp"
#include "model.hpp"
#include "pipeline.hpp"

namespace nlgad {

/// Per-node multi-round scores: final = mean + population std over rounds.
struct AnomalyScoreTable {
  Matrix raw;  // n x r
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> final_score;

  std::size_t num_nodes() const { return final_score.size(); }
  std::size_t rounds() const { return raw.cols(); }
};

inline AnomalyScoreTable aggregate_rounds(Matrix raw) {
  const std::size_t n = raw.rows(), r = raw.cols();
  if (r < 1) throw ConfigError("at least one scoring round is required");
  AnomalyScoreTable t;
  t.mean.resize(n);
  t.stddev.resize(n);
  t.final_score.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = raw.row(i);
    double mean = 0.0;
    for (double x : row) mean += x;
    mean /= static_cast<double>(r);
    double var = 0.0;
    for (double x : row) var += (x - mean) * (x - mean);
    var /= static_cast<double>(r);
    t.mean[i] = mean;
    t.stddev[i] = std::sqrt(var);
    t.final_score[i] = mean + t.stddev[i];
  }
  t.raw = std::move(raw);
  return t;
}

/// r independent detection rounds with frozen parameters. Each round shuffles
/// the nodes into batches, draws fresh subgraphs and records the anomaly
/// degree estimate of every node.
inline AnomalyScoreTable score_rounds(const ModelParams& params, const AttributedGraph& graph, std::size_t rounds,
                                      const EpochOptions& opt, std::uint64_t seed) {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  const auto nodes = all_nodes(graph);
  // Copies share parameter storage; no update happens with update=false.
  ContrastTrainer scorer(params, ad::AdamOptions{});
  Matrix raw(graph.num_nodes(), rounds);
  for (std::size_t k = 0; k < rounds; ++k) {
    auto epoch = scorer.run_epoch(graph, nodes, opt, seed, StreamTag::scoring, k, false);
    for (NodeId v = 0; v < graph.num_nodes(); ++v) raw(v, k) = epoch.estimates[v];
  }
  return aggregate_rounds(std::move(raw));
}

namespace detail {

inline void check_binary_labels(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                std::size_t& positives, std::size_t& negatives) {
  if (scores.size() != labels.size())
    throw ShapeError(std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw UndefinedMetricError("AUC needs both anomalous and normal nodes");
}

}  // namespace detail

/// Mann-Whitney AUC: fraction of (anomaly, normal) pairs where the anomaly
/// scores higher, ties counting one half. Computed via mid-ranks.
inline double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t pos = 0, neg = 0;
  detail::check_binary_labels(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps mid-ranks integral.
  std::uint64_t rank_sum_x2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t mid_x2 = static_cast<std::uint64_t>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) rank_sum_x2 += mid_x2;
    i = j;
  }
  const std::uint64_t u_x2 = rank_sum_x2 - static_cast<std::uint64_t>(pos) * (pos + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;  // trapezoidal area under `points`
};

/// Threshold sweep over distinct scores, highest first. Starts at (0,0) and
/// ends at (1,1).
inline RocCurve roc_points(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t pos = 0, neg = 0;
  detail::check_binary_labels(scores, labels, pos, neg);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  std::uint64_t tp = 0, fp = 0, area_x2 = 0;  // area in units of 1/(2*pos*neg)
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    const std::uint64_t tp_before = tp, fp_before = fp;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      ++j;
    }
    area_x2 += (fp - fp_before) * (tp + tp_before);
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  roc.auc = static_cast<double>(area_x2) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Header "node\tscore\tmean\tstd", one row per node, shortest round-trip reals.
inline void write_scores_tsv(const AnomalyScoreTable& t, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "node\tscore\tmean\tstd\n";
  for (std::size_t i = 0; i < t.num_nodes(); ++i)
    out << i << '\t' << detail::format_real(t.final_score[i]) << '\t' << detail::format_real(t.mean[i]) << '\t'
        << detail::format_real(t.stddev[i]) << '\n';
}

/// Reads the final-score column of a scores TSV.
inline std::vector<double> read_scores_tsv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<double> scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("node", 0) == 0) continue;
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto toks = detail::split_ws(t);
    std::size_t node = 0;
    double s = 0;
    if (toks.size() < 2 || !detail::parse_number(toks[0], node) || !detail::parse_number(toks[1], s))
      throw ParseError(path.string(), lineno, "expected node id and score");
    if (node != scores.size()) throw ParseError(path.string(), lineno, "node ids must be consecutive from 0");
    scores.push_back(s);
  }
  return scores;
}

inline void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "fpr,tpr\n";
  for (const auto& p : roc.points) out << detail::format_real(p.fpr) << ',' << detail::format_real(p.tpr) << '\n';
}

}  // namespace nlgad
