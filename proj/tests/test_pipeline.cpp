#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include <nlgad/pipeline.hpp>
#include <nlgad/synth.hpp>

using namespace nlgad;

namespace {

AttributedGraph toy_graph(std::uint64_t seed = 2, std::size_t n = 80) {
  Rng rng(seed);
  SbmConfig sc;
  sc.nodes = n;
  sc.feature_dim = 6;
  sc.p_in = 0.12;
  return generate_sbm(sc, rng);
}

TrainOptions toy_options(AblationMode mode) {
  TrainOptions o;
  o.model.hidden_dim = 8;
  o.epoch.batch_size = 32;
  o.selection_steps = 6;
  o.learning_epochs = 4;
  o.mode = mode;
  o.seed = 13;
  return o;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  auto x = a.all(), y = b.all();
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i].value() == y[i].value())) return false;
  return true;
}

}  // namespace

TEST(SpeedSchedule, HandValues) {
  SpeedSchedule s{200, 1000};
  EXPECT_EQ(s(100), 414u);
  EXPECT_EQ(s(200), 1000u);
  EXPECT_EQ(speed(1, s), 3u);  // floor(1000 tan(pi/800)) = floor(3.927)
  EXPECT_THROW(s(0), ConfigError);
  EXPECT_THROW(s(201), ConfigError);
}

TEST(SpeedSchedule, MonotoneAndEndsAtN) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> nd(1, 3000), td(1, 300);
  for (int trial = 0; trial < 200; ++trial) {
    SpeedSchedule s{td(rng), nd(rng)};
    std::size_t prev = 0;
    for (std::size_t j = 1; j <= s.total_steps; ++j) {
      const auto p = s(j);
      EXPECT_GE(p, prev);
      EXPECT_LE(p, s.node_count);
      const double exact = static_cast<double>(s.node_count) *
                           std::tan(std::atan(1.0) * static_cast<double>(j) / static_cast<double>(s.total_steps));
      if (j < s.total_steps) EXPECT_LE(std::abs(static_cast<double>(p) - std::floor(exact)), 1.0);
      prev = p;
    }
    EXPECT_EQ(s(s.total_steps), s.node_count);
  }
}

TEST(Normalize, MinMax) {
  std::vector<double> raw{-0.5, 0.5, 0.0};
  auto n = normalize_step_estimates(raw);
  EXPECT_EQ(n, (std::vector<double>{0.0, 1.0, 0.5}));
  std::vector<double> flat{0.3, 0.3, 0.3};
  EXPECT_EQ(normalize_step_estimates(flat), (std::vector<double>{0, 0, 0}));
}

TEST(Pool, TiesBreakByLowerIndex) {
  NormalityPool pool(4);
  std::vector<double> est{0.9, 0.1, 0.5, 0.1};
  pool_add(pool, est, 2);
  EXPECT_EQ(pool.count(0), 0u);
  EXPECT_EQ(pool.count(1), 1u);
  EXPECT_EQ(pool.count(2), 0u);
  EXPECT_EQ(pool.count(3), 1u);
  EXPECT_EQ(ascending_order(est), (std::vector<NodeId>{1, 3, 2, 0}));
  EXPECT_THROW(pool_add(pool, std::vector<double>{0.1}, 1), InternalError);
}

TEST(Pool, FinalizeSelectsLowestMeans) {
  NormalityPool pool(10);
  for (NodeId v = 0; v < 10; ++v) pool.add(v, 0.1 * (9 - v));
  pool.add(9, 0.6);  // node 9: mean of {0, 0.6} = 0.3
  auto labels = finalize_pseudo_labels(pool, 0.8);
  EXPECT_EQ(labels.normal_set, (std::vector<NodeId>{2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_NEAR(labels.mean_estimates[9], 0.3, 1e-15);
  EXPECT_EQ(labels.is_normal[0], 0);
  EXPECT_EQ(labels.is_normal[9], 1);
  EXPECT_EQ(finalize_pseudo_labels(pool, 0.5).normal_set.size(), 5u);
  EXPECT_EQ(normal_count(10, 0.7), 7u);
  EXPECT_EQ(normal_count(7, 1.0), 7u);
  EXPECT_THROW(normal_count(10, 0.0), ConfigError);
  EXPECT_THROW(normal_count(10, 1.2), ConfigError);

  NormalityPool sparse(3);
  sparse.add(0, 0.1);
  EXPECT_THROW(finalize_pseudo_labels(sparse, 0.5), InternalError);
}

TEST(Batches, TrailingSingletonIsFolded) {
  std::vector<NodeId> order(10);
  std::iota(order.begin(), order.end(), NodeId{0});
  auto sizes = [](const auto& batches) {
    std::vector<std::size_t> s;
    for (const auto& b : batches) s.push_back(b.size());
    return s;
  };
  EXPECT_EQ(sizes(partition_batches(order, 3)), (std::vector<std::size_t>{3, 3, 4}));
  EXPECT_EQ(sizes(partition_batches(std::span(order).first(9), 3)), (std::vector<std::size_t>{3, 3, 3}));
  EXPECT_EQ(sizes(partition_batches(order, 4)), (std::vector<std::size_t>{4, 4, 2}));
  EXPECT_EQ(sizes(partition_batches(order, 300)), (std::vector<std::size_t>{10}));
  EXPECT_THROW(partition_batches(order, 1), ConfigError);
  EXPECT_THROW(partition_batches(std::span(order).first(1), 3), ConfigError);
}

TEST(Selection, PoolBookkeeping) {
  auto g = toy_graph();
  for (std::size_t steps : {1u, 5u}) {
    Rng init(0);
    ContrastTrainer trainer(ModelParams::initialize({6, 8, 1}, init), ad::AdamOptions{});
    EpochOptions opt;
    opt.batch_size = 32;
    std::size_t observed = 0;
    auto sel = selection_phase(trainer, g, steps, opt, 3, PoolPolicy::dynamic,
                               [&](std::size_t j, std::span<const double> est) {
                                 EXPECT_EQ(j, ++observed);
                                 for (double x : est) {
                                   EXPECT_GE(x, 0.0);
                                   EXPECT_LE(x, 1.0);
                                 }
                               });
    const SpeedSchedule s{steps, g.num_nodes()};
    std::size_t expected = 0;
    for (std::size_t j = 1; j <= steps; ++j) expected += s(j);
    EXPECT_EQ(sel.pool.total_entries(), expected);
    EXPECT_EQ(sel.losses.size(), steps);
    for (NodeId v = 0; v < g.num_nodes(); ++v) EXPECT_GE(sel.pool.count(v), 1u);
  }
}

TEST(Selection, PolicyCounts) {
  const SpeedSchedule s{4, 10};
  EXPECT_EQ(pool_admission(PoolPolicy::all_steps, 1, s), 10u);
  EXPECT_EQ(pool_admission(PoolPolicy::last_step, 3, s), 0u);
  EXPECT_EQ(pool_admission(PoolPolicy::last_step, 4, s), 10u);
  EXPECT_EQ(pool_admission(PoolPolicy::dynamic, 2, s), s(2));
}

TEST(Selection, RejectsDegenerateSettings) {
  auto g = toy_graph();
  Rng init(0);
  ContrastTrainer trainer(ModelParams::initialize({6, 8, 1}, init), ad::AdamOptions{});
  EpochOptions opt;
  EXPECT_THROW(selection_phase(trainer, g, 0, opt, 1), ConfigError);
  opt.batch_size = 1;
  EXPECT_THROW(selection_phase(trainer, g, 2, opt, 1), ConfigError);
}

TEST(Learning, ZeroEpochsLeaveModelUnchanged) {
  auto g = toy_graph();
  Rng init(0);
  ContrastTrainer trainer(ModelParams::initialize({6, 8, 1}, init), ad::AdamOptions{});
  auto before = trainer.params().clone();
  auto nodes = all_nodes(g);
  EXPECT_TRUE(learning_phase(trainer, g, nodes, 0, EpochOptions{}, 1).empty());
  EXPECT_TRUE(same_params(before, trainer.params()));
}

TEST(Learning, SmallNormalSetClampsBatch) {
  auto g = toy_graph();
  Rng init(0);
  ContrastTrainer trainer(ModelParams::initialize({6, 8, 1}, init), ad::AdamOptions{});
  std::vector<NodeId> few{1, 4, 9};
  EXPECT_EQ(learning_phase(trainer, g, few, 2, EpochOptions{}, 1).size(), 2u);
  EXPECT_THROW(learning_phase(trainer, g, std::span(few).first(1), 2, EpochOptions{}, 1), ConfigError);
}

TEST(Learning, LossTrendsDownward) {
  auto g = toy_graph(5, 150);
  Rng init(0);
  ContrastTrainer trainer(ModelParams::initialize({6, 16, 1}, init), ad::AdamOptions{0.005});
  EpochOptions opt;
  opt.batch_size = 50;
  auto nodes = all_nodes(g);
  auto losses = learning_phase(trainer, g, nodes, 40, opt, 2);
  const double head = std::accumulate(losses.begin(), losses.begin() + 10, 0.0);
  const double tail = std::accumulate(losses.end() - 10, losses.end(), 0.0);
  EXPECT_LT(tail, head);
  EXPECT_TRUE(trainer.params().all_finite());
}

TEST(Train, DeterministicAndModesShareSelection) {
  auto g = toy_graph();
  auto full = train(g, toy_options(AblationMode::full));
  auto again = train(g, toy_options(AblationMode::full));
  EXPECT_TRUE(same_params(full.phase1, again.phase1));
  EXPECT_TRUE(same_params(*full.phase2, *again.phase2));
  EXPECT_EQ(full.learning_losses, again.learning_losses);

  for (auto mode : {AblationMode::aas, AblationMode::ols, AblationMode::osp, AblationMode::snp}) {
    auto other = train(g, toy_options(mode));
    EXPECT_TRUE(same_params(full.phase1, other.phase1)) << to_string(mode);
    EXPECT_EQ(full.selection_losses, other.selection_losses) << to_string(mode);
  }
}

TEST(Train, ModeSpecificOutputs) {
  auto g = toy_graph();
  const std::size_t keep = normal_count(g.num_nodes(), 0.8);

  auto osp = train(g, toy_options(AblationMode::osp));
  EXPECT_FALSE(osp.phase2);
  EXPECT_TRUE(osp.learning_losses.empty());

  auto snp = train(g, toy_options(AblationMode::snp));
  EXPECT_FALSE(snp.labels);
  ASSERT_TRUE(snp.phase2);
  EXPECT_FALSE(same_params(*snp.phase2, *train(g, toy_options(AblationMode::full)).phase2));

  auto aas = train(g, toy_options(AblationMode::aas));
  EXPECT_EQ(aas.pool.total_entries(), 6 * g.num_nodes());
  EXPECT_EQ(aas.labels->normal_set.size(), keep);

  auto ols = train(g, toy_options(AblationMode::ols));
  EXPECT_EQ(ols.pool.total_entries(), g.num_nodes());
  EXPECT_EQ(ols.labels->normal_set.size(), keep);

  auto opt = toy_options(AblationMode::full);
  opt.reinit_phase2 = true;
  auto reinit = train(g, opt);
  EXPECT_EQ(reinit.labels->normal_set.size(), keep);
  EXPECT_TRUE(reinit.phase2->all_finite());
}

TEST(Modes, ParseRoundTrip) {
  for (auto m : {AblationMode::full, AblationMode::aas, AblationMode::ols, AblationMode::osp, AblationMode::snp})
    EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("fast"), ConfigError);
}
