#pragma once

// Randomized finite-difference sweeps shared by the unit tests and the
// acceptance binary.

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlgad/autodiff.hpp>
#include <nlgad/model.hpp>

#include "oracles.hpp"

namespace nlgad::oracle {

using OpErrors = std::vector<std::pair<std::string, double>>;

/// Reduces a matrix-valued op to a scalar through fixed random weights.
inline ad::Tensor weighted_sum(ad::Tape& tape, const ad::Tensor& x, const Matrix& w) {
  return ad::sum(tape, ad::mul(tape, x, ad::Tensor::constant(w)));
}

/// One random instance of every differentiable op; returns the max relative
/// gradient error per op.
inline OpErrors op_gradient_errors(std::mt19937_64& rng, std::size_t trial) {
  using ad::Tape;
  using ad::Tensor;
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  const std::size_t m = dim(rng), k = dim(rng), n = dim(rng), c = 1 + trial % 4;
  auto a = Tensor::parameter(random_matrix(rng, m, k));
  auto b = Tensor::parameter(random_matrix(rng, k, n));
  auto a2 = Tensor::parameter(random_matrix(rng, m, k));
  auto row = Tensor::parameter(random_matrix(rng, 1, k));
  const Matrix w_mn = random_matrix(rng, m, n);
  const Matrix w_mk = random_matrix(rng, m, k);
  const Matrix w_km = random_matrix(rng, k, m);
  const Matrix w_1k = random_matrix(rng, 1, k);
  const Matrix w_m1 = random_matrix(rng, m, 1);

  OpErrors out;
  auto check = [&](const char* op, const LossBuilder& f, std::vector<Tensor> in) {
    out.emplace_back(op, gradient_check(f, std::move(in)));
  };
  check("matmul", [&](Tape& t) { return weighted_sum(t, ad::matmul(t, a, b), w_mn); }, {a, b});
  check("add", [&](Tape& t) { return weighted_sum(t, ad::add(t, a, a2), w_mk); }, {a, a2});
  check("add_broadcast", [&](Tape& t) { return weighted_sum(t, ad::add(t, a, row), w_mk); }, {a, row});
  check("sub", [&](Tape& t) { return weighted_sum(t, ad::sub(t, a, a2), w_mk); }, {a, a2});
  check("mul", [&](Tape& t) { return weighted_sum(t, ad::mul(t, a, a2), w_mk); }, {a, a2});
  check("scale", [&](Tape& t) { return weighted_sum(t, ad::scale(t, a, -1.7), w_mk); }, {a});
  check("add_scalar", [&](Tape& t) { return weighted_sum(t, ad::add_scalar(t, a, 0.3), w_mk); }, {a});
  check("relu", [&](Tape& t) { return weighted_sum(t, ad::relu(t, a), w_mk); }, {a});
  check("sigmoid", [&](Tape& t) { return weighted_sum(t, ad::sigmoid(t, a), w_mk); }, {a});
  check("transpose", [&](Tape& t) { return weighted_sum(t, ad::transpose(t, a), w_km); }, {a});
  check("sum", [&](Tape& t) { return ad::sum(t, ad::mul(t, a, a2)); }, {a, a2});
  check("row_mean", [&](Tape& t) { return weighted_sum(t, ad::row_mean(t, a), w_1k); }, {a});
  check("rowwise_dot", [&](Tape& t) { return weighted_sum(t, ad::rowwise_dot(t, a, a2), w_m1); }, {a, a2});

  // Block ops over B blocks of c rows.
  const std::size_t blocks = 1 + trial % 3;
  auto h = Tensor::parameter(random_matrix(rng, blocks * c, k));
  auto adj = std::make_shared<std::vector<Matrix>>();
  for (std::size_t i = 0; i < blocks; ++i) adj->push_back(random_matrix(rng, c, c));
  const Matrix w_hk = random_matrix(rng, blocks * c, k);
  const Matrix w_bk = random_matrix(rng, blocks, k);
  check("block_aggregate", [&](Tape& t) { return weighted_sum(t, ad::block_aggregate(t, adj, h), w_hk); }, {h});
  check("block_row_mean", [&](Tape& t) { return weighted_sum(t, ad::block_row_mean(t, h, c), w_bk); }, {h});
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < blocks * c; ++i) idx.push_back((i * 7 + 3) % (blocks * c));
  check("gather_rows", [&](Tape& t) { return weighted_sum(t, ad::gather_rows(t, h, idx), w_hk); }, {h});

  auto zz = Tensor::parameter(random_matrix(rng, m, k));
  auto ww = Tensor::parameter(random_matrix(rng, k, k));
  check("bilinear", [&](Tape& t) { return weighted_sum(t, ad::bilinear(t, zz, ww, a), w_m1); }, {zz, ww, a});

  // Scores strictly inside the clamp band.
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  Matrix sv(m, 1);
  for (auto& x : sv.values()) x = prob(rng);
  auto s = Tensor::parameter(sv);
  std::vector<double> y(m);
  for (std::size_t i = 0; i < m; ++i) y[i] = static_cast<double>(i % 2);
  check("bce", [&](Tape& t) { return ad::bce_loss(t, s, y); }, {s});
  return out;
}

/// Combined SN+NN loss on a random small graph, gradients of every parameter.
inline double model_gradient_error(std::mt19937_64& rng, std::size_t trial) {
  std::uniform_int_distribution<std::size_t> nd(2, 6), dd(1, 4);
  const std::size_t n = nd(rng), d = dd(rng), hidden = dd(rng), layers = 1 + trial % 2;
  std::vector<Edge> edges;
  std::bernoulli_distribution coin(0.5);
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (coin(rng)) edges.emplace_back(u, v);
  auto g = AttributedGraph::from_edges(n, edges, random_matrix(rng, n, d));
  Rng init(rng());
  auto params = ModelParams::initialize({d, hidden, layers}, init);
  SamplerConfig sc;
  sc.subgraph_size = 2 + trial % 3;
  Rng srng(rng());
  std::vector<SubgraphSample> samples;
  for (NodeId v = 0; v < n; ++v) samples.push_back(sample_subgraph(g, v, sc, srng));
  auto batch = StackedBatch::from_samples(samples);
  return gradient_check([&](ad::Tape& t) { return batch_loss(t, contrast_forward(t, params, batch), 0.6); },
                        params.all());
}

}  // namespace nlgad::oracle
