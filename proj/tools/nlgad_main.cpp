// nlgad command-line front end: synth, inject, train, score, eval, run-all.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <nlgad/commands.hpp>

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kInternal = 4 };

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  for (auto& ch : s)
    if (ch == '_') ch = '-';
  return s;
}

void add_graph_options(CLI::App* cmd, nlgad::GraphInput& in) {
  cmd->add_option("--edges", in.edges, "edge list file");
  cmd->add_option("--features", in.features, "feature matrix file");
  cmd->add_option("--labels", in.labels, "0/1 anomaly label file");
  cmd->add_option("--graph", in.binary, "binary graph file (alternative to --edges/--features)");
}

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  CLI::App app{"Contrastive node anomaly scoring with pseudo-normal selection"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<fs::path> config_path;
  app.add_option("--config", config_path, "key = value config file; flags override it");
  std::map<std::string, std::optional<std::string>> overrides;
  for (const auto& f : nlgad::RunConfig::fields())
    app.add_option(flag_name(f.key), overrides[f.key], f.help);

  nlgad::GraphInput input;
  fs::path out_dir = "out";
  std::optional<fs::path> checkpoint, scores_path, dump_path;
  bool inject = false;

  auto* synth = app.add_subcommand("synth", "write the synthetic SBM benchmark graph");
  synth->add_option("--out", out_dir, "output directory")->required();

  auto* inj = app.add_subcommand("inject", "inject contextual and structural anomalies");
  add_graph_options(inj, input);
  inj->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "run normality selection and normality learning");
  add_graph_options(train, input);
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_option("--dump-samples", dump_path, "write the first-epoch RWR subgraph of every node");

  auto* score = app.add_subcommand("score", "multi-round scoring of every node with a checkpoint");
  add_graph_options(score, input);
  score->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  score->add_option("--out", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "AUC and ROC curve from a scores file");
  eval->add_option("--scores", scores_path, "scores TSV")->required();
  eval->add_option("--labels", input.labels, "0/1 anomaly label file");
  eval->add_option("--out", out_dir, "output directory")->required();

  auto* run_all = app.add_subcommand("run-all", "synth or load (+inject), train, score, eval");
  add_graph_options(run_all, input);
  run_all->add_flag("--inject", inject, "inject anomalies into the loaded graph first");
  run_all->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    nlgad::RunConfig cfg;
    // A score run next to a training run picks up that run's config.
    if (!config_path && checkpoint && fs::exists(checkpoint->parent_path() / "config.txt"))
      config_path = checkpoint->parent_path() / "config.txt";
    if (config_path) cfg = nlgad::RunConfig::load(*config_path);
    for (const auto& [key, value] : overrides)
      if (value) cfg.set(key, *value);
    cfg.validate();

    if (*synth) {
      auto g = nlgad::cmd_synth(cfg, out_dir);
      std::cout << "wrote " << g.num_nodes() << " nodes, " << g.num_edges() << " edges to " << out_dir << '\n';
    } else if (*inj) {
      auto r = nlgad::cmd_inject(nlgad::load_input(input), cfg, out_dir);
      std::cout << "injected " << r.structural.size() << " structural and " << r.contextual.size()
                << " contextual anomalies into " << out_dir << '\n';
    } else if (*train) {
      auto g = nlgad::load_input(input);
      if (dump_path) nlgad::dump_samples(g, cfg.resolved(g.num_nodes()), *dump_path);
      auto t = nlgad::cmd_train(g, cfg, out_dir);
      std::cout << "trained (" << nlgad::to_string(cfg.mode) << "), final selection loss "
                << (t.selection_losses.empty() ? 0.0 : t.selection_losses.back()) << '\n';
    } else if (*score) {
      auto r = nlgad::cmd_score(nlgad::load_input(input), *checkpoint, cfg, out_dir);
      if (r.eval.auc)
        std::cout << "auc " << *r.eval.auc << '\n';
      else
        std::cout << "auc unavailable: " << r.eval.reason << '\n';
    } else if (*eval) {
      auto s = nlgad::read_scores_tsv(*scores_path);
      std::optional<nlgad::Labels> labels;
      if (input.labels) labels = nlgad::read_labels(*input.labels);
      auto r = nlgad::cmd_eval(s, labels, cfg, out_dir);
      if (r.auc)
        std::cout << "auc " << *r.auc << '\n';
      else
        std::cout << "auc unavailable: " << r.reason << '\n';
    } else if (*run_all) {
      auto r = nlgad::cmd_run_all(input, inject, cfg, out_dir);
      if (r.eval.auc)
        std::cout << "auc " << *r.eval.auc << '\n';
      else
        std::cout << "auc unavailable: " << r.eval.reason << '\n';
    }
  } catch (const nlgad::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case nlgad::ErrorKind::config: return kConfig;
      case nlgad::ErrorKind::data: return kData;
      case nlgad::ErrorKind::internal: return kInternal;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
