#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace nlgad {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;
using Labels = std::vector<std::uint8_t>;

/// Undirected attributed graph: CSR adjacency with ascending, duplicate-free
/// neighbor lists, a dense n x d feature matrix and optional 0/1 anomaly
/// labels. Immutable once built; derived graphs are new values.
class AttributedGraph {
 public:
  AttributedGraph() = default;

  /// Builds a graph from an arbitrary edge list. Edges are symmetrized and
  /// deduplicated; self-loops and out-of-range ids are rejected.
  static AttributedGraph from_edges(std::size_t n, std::span<const Edge> edges, Matrix features,
                                    std::optional<Labels> labels = std::nullopt) {
    if (features.rows() != n)
      throw ShapeError("feature matrix has " + std::to_string(features.rows()) + " rows, expected " +
                       std::to_string(n));
    if (features.cols() < 1) throw ShapeError("feature dimension must be at least 1");
    if (labels) validate_labels(*labels, n);

    std::vector<Edge> directed;
    directed.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
      if (u >= n || v >= n)
        throw RangeError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") references node >= n=" +
                         std::to_string(n));
      if (u == v) throw DataError("self-loop on node " + std::to_string(u));
      directed.emplace_back(u, v);
      directed.emplace_back(v, u);
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    AttributedGraph g;
    g.offsets_.assign(n + 1, 0);
    for (auto [u, v] : directed) ++g.offsets_[u + 1];
    for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
    g.targets_.reserve(directed.size());
    for (auto [u, v] : directed) g.targets_.push_back(v);
    g.features_ = std::move(features);
    g.labels_ = std::move(labels);
    return g;
  }

  std::size_t num_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  /// Number of undirected edges.
  std::size_t num_edges() const noexcept { return targets_.size() / 2; }
  std::size_t feature_dim() const noexcept { return features_.cols(); }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  bool has_edge(NodeId u, NodeId v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
  }

  const Matrix& features() const noexcept { return features_; }
  std::span<const double> feature_row(NodeId v) const { return features_.row(v); }

  const std::optional<Labels>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return labels_.has_value(); }

  /// Each undirected edge once, as (u, v) with u < v, in ascending order.
  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (NodeId u = 0; u < num_nodes(); ++u)
      for (NodeId v : neighbors(u))
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  const std::vector<std::uint64_t>& csr_offsets() const noexcept { return offsets_; }
  const std::vector<NodeId>& csr_targets() const noexcept { return targets_; }

  AttributedGraph with_features(Matrix features) const {
    return from_edges(num_nodes(), edge_list(), std::move(features), labels_);
  }

  AttributedGraph with_labels(std::optional<Labels> labels) const {
    AttributedGraph g = *this;
    if (labels) validate_labels(*labels, num_nodes());
    g.labels_ = std::move(labels);
    return g;
  }

  AttributedGraph with_added_edges(std::span<const Edge> extra) const {
    std::vector<Edge> all = edge_list();
    all.insert(all.end(), extra.begin(), extra.end());
    return from_edges(num_nodes(), all, features_, labels_);
  }

  friend bool operator==(const AttributedGraph&, const AttributedGraph&) = default;

 private:
  static void validate_labels(const Labels& labels, std::size_t n) {
    if (labels.size() != n)
      throw ShapeError("label count " + std::to_string(labels.size()) + " != node count " + std::to_string(n));
    for (auto l : labels)
      if (l > 1) throw DataError("labels must be 0 or 1");
  }

  std::vector<std::uint64_t> offsets_;
  std::vector<NodeId> targets_;
  Matrix features_;
  std::optional<Labels> labels_;
};

inline std::size_t degree(const AttributedGraph& g, NodeId v) { return g.degree(v); }
inline std::span<const NodeId> neighbors(const AttributedGraph& g, NodeId v) { return g.neighbors(v); }

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Splits on spaces/tabs; returns views into `line`.
inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline std::string format_real(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

inline std::vector<Edge> read_edges(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto toks = detail::split_ws(t);
    std::uint64_t u = 0, v = 0;
    if (toks.size() != 2 || !detail::parse_number(toks[0], u) || !detail::parse_number(toks[1], v))
      throw ParseError(path.string(), lineno, "expected two non-negative integer node ids");
    if (u > UINT32_MAX || v > UINT32_MAX) throw RangeError(path.string() + ":" + std::to_string(lineno));
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

inline Matrix read_features(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<double> values;
  std::size_t d = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty()) continue;
    auto toks = detail::split_ws(t);
    if (rows == 0) d = toks.size();
    if (toks.size() != d)
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(d) + " values, got " + std::to_string(toks.size()));
    for (auto tok : toks) {
      double x = 0;
      if (!detail::parse_number(tok, x)) throw ParseError(path.string(), lineno, "bad real '" + std::string(tok) + "'");
      values.push_back(x);
    }
    ++rows;
  }
  if (rows == 0) throw ShapeError(path.string() + " has no feature rows");
  return Matrix(rows, d, std::move(values));
}

inline Labels read_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  Labels labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t == "0")
      labels.push_back(0);
    else if (t == "1")
      labels.push_back(1);
    else
      throw ParseError(path.string(), lineno, "label must be 0 or 1");
  }
  return labels;
}

/// Loads the text triple. The node count is the number of feature rows.
inline AttributedGraph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                                  const std::optional<std::filesystem::path>& label_path = std::nullopt) {
  auto edges = read_edges(edge_path);
  auto features = read_features(feature_path);
  std::optional<Labels> labels;
  if (label_path) labels = read_labels(*label_path);
  const std::size_t n = features.rows();
  return AttributedGraph::from_edges(n, edges, std::move(features), std::move(labels));
}

inline void write_edges(const AttributedGraph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (auto [u, v] : g.edge_list()) out << u << ' ' << v << '\n';
}

inline void write_features(const AttributedGraph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  const Matrix& x = g.features();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j) out << ' ';
      out << detail::format_real(x(i, j));
    }
    out << '\n';
  }
}

inline void write_labels(const Labels& labels, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (auto l : labels) out << static_cast<int>(l) << '\n';
}

// ---------------------------------------------------------------------------
// Binary format (all integers u64 little-endian, reals IEEE-754 binary64 LE):
//
//   magic        8 bytes  "NLGADGR1"
//   n            u64      node count
//   d            u64      feature dimension
//   nnz          u64      length of the CSR target array (2 * undirected edges)
//   has_labels   u64      0 or 1
//   offsets      (n+1) x u64
//   targets      nnz x u64
//   features     n*d x f64, row-major
//   labels       n x u8   (present only when has_labels == 1)
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kGraphMagic{'N', 'L', 'G', 'A', 'D', 'G', 'R', '1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw DataError("truncated binary file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline double get_f64(std::istream& in) {
  std::uint64_t bits = get_u64(in);
  double v = 0;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline void save_binary(const AttributedGraph& g, const std::filesystem::path& path) {
  auto out = detail::open_output(path, true);
  out.write(kGraphMagic.data(), kGraphMagic.size());
  detail::put_u64(out, g.num_nodes());
  detail::put_u64(out, g.feature_dim());
  detail::put_u64(out, g.csr_targets().size());
  detail::put_u64(out, g.has_labels() ? 1 : 0);
  for (auto o : g.csr_offsets()) detail::put_u64(out, o);
  for (auto t : g.csr_targets()) detail::put_u64(out, t);
  for (double x : g.features().values()) detail::put_f64(out, x);
  if (g.has_labels()) out.write(reinterpret_cast<const char*>(g.labels()->data()), g.num_nodes());
}

inline AttributedGraph load_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), 8) || magic != kGraphMagic) throw DataError(path.string() + ": bad magic");
  const auto n = detail::get_u64(in);
  const auto d = detail::get_u64(in);
  const auto nnz = detail::get_u64(in);
  const auto has_labels = detail::get_u64(in);
  std::vector<std::uint64_t> offsets(n + 1);
  for (auto& o : offsets) o = detail::get_u64(in);
  if (offsets.front() != 0 || offsets.back() != nnz) throw DataError(path.string() + ": inconsistent CSR offsets");
  std::vector<Edge> edges;
  edges.reserve(nnz);
  for (std::uint64_t u = 0; u < n; ++u) {
    if (offsets[u + 1] < offsets[u]) throw DataError(path.string() + ": inconsistent CSR offsets");
    for (auto k = offsets[u]; k < offsets[u + 1]; ++k) {
      auto v = detail::get_u64(in);
      if (v >= n) throw RangeError(path.string() + ": neighbor id out of range");
      edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
  }
  Matrix features(n, d);
  for (auto& x : features.values()) x = detail::get_f64(in);
  std::optional<Labels> labels;
  if (has_labels) {
    labels.emplace(n);
    if (!in.read(reinterpret_cast<char*>(labels->data()), static_cast<std::streamsize>(n)))
      throw DataError("truncated binary file");
  }
  auto g = AttributedGraph::from_edges(n, edges, std::move(features), std::move(labels));
  if (g.csr_targets().size() != nnz) throw DataError(path.string() + ": adjacency is not symmetric");
  return g;
}

}  // namespace nlgad
