#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "pipeline.hpp"

namespace nlgad {

/// Every knob of a pipeline run. Serialized as flat "key = value" lines; the
/// training subset is hashed into checkpoints.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t subgraph_size = 4;
  double restart_prob = 0.5;
  std::size_t hidden_dim = 64;
  std::size_t gcn_layers = 1;
  double learning_rate = 0.001;
  double alpha = 0.6;
  double normal_fraction = 0.8;
  std::optional<std::size_t> selection_steps;  // unset: 200 if n < 5000 else 300
  std::optional<std::size_t> learning_epochs;  // unset: 500 if n < 5000 else 600
  std::size_t batch_size = 300;
  std::size_t rounds = 256;
  AblationMode mode = AblationMode::full;
  bool reinit_phase2 = false;
  std::size_t anomalies = 30;
  std::size_t candidate_pool_size = 50;
  std::size_t clique_size = 15;

  struct Field {
    std::string key;
    std::string help;
    bool training;  // participates in the checkpoint hash
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
  };

  static const std::vector<Field>& fields();

  /// Fills the size-dependent defaults.
  RunConfig resolved(std::size_t n) const {
    RunConfig c = *this;
    if (!c.selection_steps) c.selection_steps = n < 5000 ? 200 : 300;
    if (!c.learning_epochs) c.learning_epochs = n < 5000 ? 500 : 600;
    return c;
  }

  void validate() const {
    if (subgraph_size < 2) throw ConfigError("subgraph_size must be >= 2");
    if (!(restart_prob > 0.0 && restart_prob < 1.0)) throw ConfigError("restart_prob must be in (0,1)");
    if (hidden_dim < 1 || gcn_layers < 1) throw ConfigError("hidden_dim and gcn_layers must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    check_alpha(alpha);
    normal_count(1, normal_fraction);
    if (selection_steps && *selection_steps < 1) throw ConfigError("selection_steps must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (clique_size < 2) throw ConfigError("clique_size must be >= 2");
  }

  std::string to_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
  }

  static RunConfig from_text(const std::string& text, const std::string& origin = "config") {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string_view::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      c.set(std::string(detail::trim(t.substr(0, eq))), std::string(detail::trim(t.substr(eq + 1))));
    }
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path.string());
  }

  void save(const std::filesystem::path& path) const {
    auto out = detail::open_output(path);
    out << to_text();
  }

  void set(const std::string& key, const std::string& value) {
    for (const auto& f : fields())
      if (f.key == key) {
        f.set(*this, value);
        return;
      }
    throw ConfigError("unknown config key '" + key + "'");
  }

  /// FNV-1a over the "key = value" lines of the training fields.
  std::uint64_t training_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : fields()) {
      if (!f.training) continue;
      for (char ch : f.key + "=" + f.get(*this) + "\n") {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
      }
    }
    return h;
  }

  TrainOptions train_options() const {
    TrainOptions o;
    o.model.hidden_dim = hidden_dim;
    o.model.gcn_layers = gcn_layers;
    o.adam.learning_rate = learning_rate;
    o.epoch.sampler.subgraph_size = subgraph_size;
    o.epoch.sampler.restart_prob = restart_prob;
    o.epoch.sampler.rng_seed = seed;
    o.epoch.batch_size = batch_size;
    o.epoch.alpha = alpha;
    o.selection_steps = selection_steps.value_or(200);
    o.learning_epochs = learning_epochs.value_or(500);
    o.normal_fraction = normal_fraction;
    o.mode = mode;
    o.reinit_phase2 = reinit_phase2;
    o.seed = seed;
    return o;
  }
};

namespace detail {

template <typename T>
T parse_config_number(const std::string& key, const std::string& v) {
  T out{};
  if (!parse_number(std::string_view(v), out)) throw ConfigError("bad value '" + v + "' for " + key);
  return out;
}

inline bool parse_config_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean '" + v + "' for " + key);
}

template <typename T>
RunConfig::Field number_field(std::string key, std::string help, bool training, T RunConfig::*member) {
  return {key, std::move(help), training,
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_real(c.*member);
            else
              return std::to_string(c.*member);
          },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_config_number<T>(key, v); }};
}

inline RunConfig::Field auto_field(std::string key, std::string help, std::optional<std::size_t> RunConfig::*member) {
  return {key, std::move(help), true,
          [member](const RunConfig& c) { return c.*member ? std::to_string(*(c.*member)) : std::string("auto"); },
          [member, key](RunConfig& c, const std::string& v) {
            if (v == "auto")
              (c.*member).reset();
            else
              c.*member = parse_config_number<std::size_t>(key, v);
          }};
}

}  // namespace detail

inline const std::vector<RunConfig::Field>& RunConfig::fields() {
  using detail::number_field;
  static const std::vector<Field> table = {
      number_field("seed", "master random seed", true, &RunConfig::seed),
      number_field("subgraph_size", "nodes per RWR subgraph (c)", true, &RunConfig::subgraph_size),
      number_field("restart_prob", "RWR restart probability", true, &RunConfig::restart_prob),
      number_field("hidden_dim", "embedding dimension d'", true, &RunConfig::hidden_dim),
      number_field("gcn_layers", "GCN/MLP layers per branch", true, &RunConfig::gcn_layers),
      number_field("learning_rate", "Adam learning rate", true, &RunConfig::learning_rate),
      number_field("alpha", "SN/NN trade-off in (0,1)", true, &RunConfig::alpha),
      number_field("normal_fraction", "fraction K labeled pseudo-normal", true, &RunConfig::normal_fraction),
      detail::auto_field("selection_steps", "normality selection steps T_s (or auto)", &RunConfig::selection_steps),
      detail::auto_field("learning_epochs", "normality learning epochs T_r (or auto)", &RunConfig::learning_epochs),
      number_field("batch_size", "nodes per batch B", true, &RunConfig::batch_size),
      number_field("rounds", "scoring rounds r", false, &RunConfig::rounds),
      {"mode", "full | aas | ols | osp | snp", true, [](const RunConfig& c) { return to_string(c.mode); },
       [](RunConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      {"reinit_phase2", "re-initialize parameters before normality learning", true,
       [](const RunConfig& c) { return std::string(c.reinit_phase2 ? "true" : "false"); },
       [](RunConfig& c, const std::string& v) { c.reinit_phase2 = detail::parse_config_bool("reinit_phase2", v); }},
      number_field("anomalies", "total injected anomalies (half cliques, half contextual)", false,
                   &RunConfig::anomalies),
      number_field("candidate_pool_size", "candidates per contextual anomaly", false,
                   &RunConfig::candidate_pool_size),
      number_field("clique_size", "nodes per structural clique", false, &RunConfig::clique_size),
  };
  return table;
}

}  // namespace nlgad
