#pragma once

// The pipeline stages behind the CLI subcommands. Each writes its outputs
// (plus the exact config that produced them) into an output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "graph.hpp"
#include "injection.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "run_config.hpp"
#include "rwr.hpp"
#include "scoring.hpp"
#include "synth.hpp"

namespace nlgad {

namespace fs = std::filesystem;

struct GraphInput {
  std::optional<fs::path> edges;
  std::optional<fs::path> features;
  std::optional<fs::path> labels;
  std::optional<fs::path> binary;

  bool given() const { return binary || edges || features; }
};

inline AttributedGraph load_input(const GraphInput& in) {
  if (in.binary) {
    auto g = load_binary(*in.binary);
    if (in.labels) g = g.with_labels(read_labels(*in.labels));
    return g;
  }
  if (!in.edges || !in.features) throw ConfigError("need --edges and --features (or --graph)");
  return load_graph(*in.edges, *in.features, in.labels);
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

/// edges.txt, features.txt, labels.txt (when labeled) and graph.bin.
inline void write_graph_dir(const AttributedGraph& g, const fs::path& dir) {
  ensure_dir(dir);
  write_edges(g, dir / "edges.txt");
  write_features(g, dir / "features.txt");
  if (g.has_labels()) write_labels(*g.labels(), dir / "labels.txt");
  save_binary(g, dir / "graph.bin");
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline CombinedInjection cmd_inject(const AttributedGraph& graph, const RunConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  InjectionConfig icfg;
  icfg.candidate_pool_size = cfg.candidate_pool_size;
  icfg.clique_size = cfg.clique_size;
  icfg.rng_seed = cfg.seed;
  Rng rng = make_stream(cfg.seed, StreamTag::injection);
  auto result = inject_combined(graph, cfg.anomalies, icfg, rng);
  if (!result.graph.has_labels()) result.graph = result.graph.with_labels(Labels(graph.num_nodes(), 0));
  write_graph_dir(result.graph, out_dir);
  cfg.save(out_dir / "config.txt");
  return result;
}

inline AttributedGraph cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
  auto g = synthetic_benchmark(cfg.seed, cfg.anomalies);
  write_graph_dir(g, out_dir);
  cfg.save(out_dir / "config.txt");
  return g;
}

inline void write_selection_report(const TrainOutcome& t, const fs::path& path) {
  auto out = detail::open_output(path);
  out << "node\tpool_count\tmean_estimate\tpseudo_label\n";
  for (NodeId v = 0; v < t.pool.num_nodes(); ++v) {
    out << v << '\t' << t.pool.count(v) << '\t';
    out << (t.pool.count(v) ? detail::format_real(t.pool.mean(v)) : std::string("NA")) << '\t';
    out << (t.labels ? std::to_string(t.labels->is_normal[v]) : std::string("NA")) << '\n';
  }
}

inline void dump_samples(const AttributedGraph& g, const RunConfig& cfg, const fs::path& path) {
  auto out = detail::open_output(path);
  SamplerConfig sc{cfg.subgraph_size, cfg.restart_prob, cfg.seed};
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    // Same stream as the first selection epoch.
    Rng rng = make_stream(cfg.seed, StreamTag::sampling, {static_cast<std::uint64_t>(StreamTag::selection), 1, v});
    dump_sample(out, sample_subgraph(g, v, sc, rng));
  }
}

/// Trains under cfg.mode. Writes config.txt, phase1.ckpt, phase2.ckpt (not in
/// osp mode), selection_report.tsv and losses.tsv.
inline TrainOutcome cmd_train(const AttributedGraph& graph, const RunConfig& base, const fs::path& out_dir) {
  const RunConfig cfg = base.resolved(graph.num_nodes());
  cfg.validate();
  ensure_dir(out_dir);
  cfg.save(out_dir / "config.txt");
  auto outcome = train(graph, cfg.train_options());
  const auto hash = cfg.training_hash();
  save_checkpoint(out_dir / "phase1.ckpt", outcome.phase1, hash);
  if (outcome.phase2) save_checkpoint(out_dir / "phase2.ckpt", *outcome.phase2, hash);
  write_selection_report(outcome, out_dir / "selection_report.tsv");
  auto losses = detail::open_output(out_dir / "losses.tsv");
  losses << "phase\tepoch\tloss\n";
  for (std::size_t i = 0; i < outcome.selection_losses.size(); ++i)
    losses << "selection\t" << i + 1 << '\t' << detail::format_real(outcome.selection_losses[i]) << '\n';
  for (std::size_t i = 0; i < outcome.learning_losses.size(); ++i)
    losses << "learning\t" << i + 1 << '\t' << detail::format_real(outcome.learning_losses[i]) << '\n';
  return outcome;
}

struct EvalResult {
  std::optional<double> auc;
  std::string reason;  // why auc is absent
};

inline void write_metrics(const EvalResult& r, const RunConfig& cfg, std::size_t n, const fs::path& path) {
  nlohmann::ordered_json j;
  if (r.auc)
    j["auc"] = *r.auc;
  else {
    j["auc"] = nullptr;
    j["auc_unavailable_reason"] = r.reason;
  }
  j["nodes"] = n;
  j["rounds"] = cfg.rounds;
  j["seed"] = cfg.seed;
  j["mode"] = to_string(cfg.mode);
  j["config_hash"] = hash_hex(cfg.training_hash());
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

/// Writes metrics.json and, when both classes are present, roc.csv.
inline EvalResult cmd_eval(std::span<const double> scores, const std::optional<Labels>& labels, const RunConfig& cfg,
                           const fs::path& out_dir) {
  ensure_dir(out_dir);
  EvalResult r;
  if (!labels) {
    r.reason = "no ground-truth labels supplied";
  } else {
    auto roc = roc_points(scores, *labels);
    r.auc = auc(scores, *labels);
    write_roc_csv(roc, out_dir / "roc.csv");
  }
  write_metrics(r, cfg, scores.size(), out_dir / "metrics.json");
  return r;
}

struct ScoreOutcome {
  AnomalyScoreTable table;
  EvalResult eval;
};

/// Scores every node with a checkpoint trained under `base`, then evaluates.
inline ScoreOutcome cmd_score(const AttributedGraph& graph, const fs::path& checkpoint, const RunConfig& base,
                              const fs::path& out_dir) {
  const RunConfig cfg = base.resolved(graph.num_nodes());
  cfg.validate();
  auto ck = load_checkpoint(checkpoint);
  if (ck.config_hash != cfg.training_hash())
    throw HashMismatchError("checkpoint hash " + hash_hex(ck.config_hash) + " does not match config hash " +
                            hash_hex(cfg.training_hash()));
  if (ck.params.config.feature_dim != graph.feature_dim())
    throw ShapeError("checkpoint expects " + std::to_string(ck.params.config.feature_dim) + " features, graph has " +
                     std::to_string(graph.feature_dim()));
  ensure_dir(out_dir);
  cfg.save(out_dir / "config.txt");
  auto opts = cfg.train_options();
  ScoreOutcome out;
  out.table = score_rounds(ck.params, graph, cfg.rounds, opts.epoch, cfg.seed);
  write_scores_tsv(out.table, out_dir / "scores.tsv");
  out.eval = cmd_eval(out.table.final_score, graph.labels(), cfg, out_dir);
  return out;
}

/// synth (or load + optional inject) -> train -> score -> eval in one directory.
inline ScoreOutcome cmd_run_all(const GraphInput& input, bool inject, const RunConfig& base, const fs::path& out_dir) {
  base.validate();
  ensure_dir(out_dir);
  AttributedGraph graph;
  if (!input.given())
    graph = cmd_synth(base, out_dir);
  else if (inject)
    graph = cmd_inject(load_input(input), base, out_dir).graph;
  else
    graph = load_input(input);
  auto outcome = cmd_train(graph, base, out_dir);
  const char* ckpt = outcome.phase2 ? "phase2.ckpt" : "phase1.ckpt";
  return cmd_score(graph, out_dir / ckpt, base, out_dir);
}

}  // namespace nlgad
