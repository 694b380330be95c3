#include "fixtures.hpp"
#include "ride/jshc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <optional>

namespace {

using namespace ride;
using jshc::ConfigEval;
using jshc::Evaluator;
using jshc::JshcConfig;

std::vector<rae::FlowEmbedding> embeddings_of(const fixture::Dataset& d) {
  std::vector<rae::FlowEmbedding> out;
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
    rae::FlowEmbedding e;
    e.values.assign(d.x.col(j).data(), d.x.col(j).data() + d.x.rows());
    e.label = d.y[static_cast<std::size_t>(j)];
    out.push_back(std::move(e));
  }
  return out;
}

jshc::Artifacts artifacts(std::uint64_t seed) {
  // One labelling rule, split into 300 training and 200 evaluation samples.
  const auto all = fixture::random_dataset(seed, 500, 3, 2);
  fixture::Dataset train{all.x.leftCols(300), {all.y.begin(), all.y.begin() + 300}, 2};
  fixture::Dataset eval{all.x.rightCols(200), {all.y.begin() + 300, all.y.end()}, 2};
  auto t = tree::cart_train(train.x, train.y, 2, {.min_samples_leaf = 3});
  return jshc::prepare_artifacts(std::move(t), train.x, embeddings_of(eval), hw::CostCalibration::defaults());
}

JshcConfig small_config(const jshc::Artifacts& a) {
  JshcConfig cfg;
  const auto alphas = jshc::default_alpha_set(a.path);
  for (std::size_t i = 0; i < alphas.size(); i += std::max<std::size_t>(1, alphas.size() / 5))
    cfg.alpha_set.push_back(alphas[i]);
  cfg.beta_set = {1, 2, 4, 6, 8, 11};
  return cfg;
}

TEST(EvaluateConfig, LargeAlphaGivesTheRootLeaf) {
  const auto a = artifacts(1);
  Evaluator ev(a, {});
  const ConfigEval& e = ev.evaluate(1e6, 3);
  EXPECT_EQ(e.n_nodes, 1u);
  const int leaf = a.full_tree.node(0).predicted_class;
  const auto hits = std::count(a.eval_labels.begin(), a.eval_labels.end(), leaf);
  EXPECT_DOUBLE_EQ(e.accuracy, static_cast<double>(hits) / static_cast<double>(a.eval_labels.size()));
}

TEST(EvaluateConfig, ZeroAlphaHighPrecisionMatchesFullTree) {
  const auto a = artifacts(2);
  Evaluator ev(a, {});
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < a.eval_features.cols(); ++j) {
    const std::span<const double> x(a.eval_features.col(j).data(), static_cast<std::size_t>(a.eval_features.rows()));
    hits += a.full_tree.predict_label(x) == a.eval_labels[static_cast<std::size_t>(j)];
  }
  const ConfigEval& e = ev.evaluate(0.0, 16);
  EXPECT_EQ(e.n_nodes, a.full_tree.n_nodes());
  EXPECT_NEAR(e.accuracy, static_cast<double>(hits) / static_cast<double>(a.eval_labels.size()), 0.01);
}

TEST(EvaluateConfig, CacheIsCoherent) {
  const auto a = artifacts(3);
  Evaluator ev(a, {});
  const ConfigEval first = ev.evaluate(0.001, 5);
  const ConfigEval second = ev.evaluate(0.001, 5);
  EXPECT_EQ(first, second);
  EXPECT_EQ(ev.computed(), 1u);
  Evaluator fresh(a, {});
  EXPECT_EQ(fresh.evaluate(0.001, 5), first);
}

TEST(GridSweep, SingletonSets) {
  const auto a = artifacts(4);
  Evaluator ev(a, {});
  JshcConfig cfg;
  cfg.alpha_set = {0.002};
  cfg.beta_set = {7};
  const auto r = jshc::grid_sweep(cfg, ev);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.best, ev.evaluate(0.002, 7));
}

TEST(GridSweep, BudgetExcludesWideThresholds) {
  const auto a = artifacts(5);
  hw::Budget budget;
  budget.max_power_mw = static_cast<double>(a.full_tree.n_nodes()) * a.calib.power_mw_per_node[4];
  Evaluator ev(a, budget);
  JshcConfig cfg;
  cfg.alpha_set = {0.0};
  cfg.z_max = budget;
  const auto r = jshc::grid_sweep(cfg, ev);
  EXPECT_LE(r.best.beta, 5);
  for (const auto& e : r.log) EXPECT_EQ(e.feasible, e.beta <= 5);
}

TEST(GridSweep, MatchesBruteForceInReverseOrder) {
  for (std::uint64_t seed = 6; seed < 10; ++seed) {
    const auto a = artifacts(seed);
    Evaluator ev(a, {});
    const JshcConfig cfg = small_config(a);
    const auto r = jshc::grid_sweep(cfg, ev);
    ASSERT_EQ(r.log.size(), cfg.alpha_set.size() * cfg.beta_set.size());

    Evaluator other(a, {});
    std::optional<ConfigEval> best;
    for (auto ai = cfg.alpha_set.rbegin(); ai != cfg.alpha_set.rend(); ++ai)
      for (auto bi = cfg.beta_set.rbegin(); bi != cfg.beta_set.rend(); ++bi) {
        const ConfigEval e = other.evaluate(*ai, *bi);
        const bool wins = !best || e.accuracy > best->accuracy ||
                          (e.accuracy == best->accuracy &&
                           (e.beta < best->beta || (e.beta == best->beta && e.alpha > best->alpha)));
        if (wins) best = e;
      }
    EXPECT_EQ(r.best, *best) << "seed " << seed;

    // Log order is (alpha, beta) and node counts never grow with alpha.
    for (std::size_t i = 1; i < r.log.size(); ++i) {
      const auto& p = r.log[i - 1];
      const auto& q = r.log[i];
      EXPECT_TRUE(p.alpha < q.alpha || (p.alpha == q.alpha && p.beta < q.beta));
      if (p.beta == q.beta) EXPECT_GE(p.n_nodes, q.n_nodes);
    }
  }
}

TEST(GridSweep, NothingFeasibleIsReported) {
  const auto a = artifacts(11);
  hw::Budget budget;
  budget.max_power_mw = 1e-9;
  Evaluator ev(a, budget);
  JshcConfig cfg = small_config(a);
  cfg.z_max = budget;
  try {
    jshc::grid_sweep(cfg, ev);
    FAIL() << "expected NoFeasibleConfig";
  } catch (const jshc::NoFeasibleConfig& e) {
    EXPECT_EQ(e.budget(), "power");
  }
}

TEST(Bisect, AdjacentBoundsNeedAtMostOneEvaluation) {
  const auto a = artifacts(12);
  Evaluator ev(a, {});
  JshcConfig cfg;
  cfg.min_beta = 7;
  cfg.max_beta = 8;
  const ConfigEval start = ev.evaluate(0.0, 8);
  const std::size_t before = ev.computed();
  const auto r = jshc::bisect_beta(start, cfg, ev);
  EXPECT_LE(ev.computed() - before, 1u);
  EXPECT_LE(r.trace.size(), 1u);
}

TEST(Bisect, ZeroIterationsKeepsStart) {
  const auto a = artifacts(13);
  Evaluator ev(a, {});
  JshcConfig cfg;
  cfg.max_iter = 0;
  const ConfigEval start = ev.evaluate(0.0, 11);
  const auto r = jshc::bisect_beta(start, cfg, ev);
  EXPECT_EQ(r.best, start);
  EXPECT_TRUE(r.trace.empty());
}

TEST(Bisect, StaysInBoundsAndFindsSmallestBetaWhenMonotone) {
  std::size_t monotone_cases = 0;
  for (std::uint64_t seed = 20; seed < 40; ++seed) {
    const auto a = artifacts(seed);
    Evaluator scan(a, {});
    for (double alpha : jshc::default_alpha_set(a.path)) {
      JshcConfig cfg;
      cfg.min_beta = 1;
      cfg.max_beta = 16;
      cfg.beta_set = {16};
      cfg.alpha_set = {alpha};
      Evaluator ev(a, {});
      const auto result = jshc::jshc_optimize(cfg, ev);
      for (const auto& e : result.bisection) {
        EXPECT_GE(e.beta, cfg.min_beta);
        EXPECT_LE(e.beta, cfg.max_beta);
      }
      EXPECT_GE(result.best.accuracy, result.grid_best.accuracy);

      std::vector<double> acc;
      for (int b = 1; b <= 16; ++b) acc.push_back(scan.evaluate(alpha, b).accuracy);
      if (!std::is_sorted(acc.begin(), acc.end())) continue;
      ++monotone_cases;
      const double top = acc.back();
      const int smallest = 1 + static_cast<int>(std::find(acc.begin(), acc.end(), top) - acc.begin());
      EXPECT_LE(std::abs(result.best.beta - smallest), 1) << "seed " << seed << " alpha " << alpha;
      EXPECT_EQ(result.best.accuracy, top);
    }
  }
  EXPECT_GT(monotone_cases, 20u);
}

TEST(Optimize, DeterministicAndNeverWorseThanGrid) {
  const auto a = artifacts(14);
  const JshcConfig cfg = small_config(a);
  Evaluator ev1(a, {}), ev2(a, {});
  const auto r1 = jshc::jshc_optimize(cfg, ev1);
  const auto r2 = jshc::jshc_optimize(cfg, ev2);
  EXPECT_EQ(r1.best, r2.best);
  EXPECT_EQ(r1.sweep, r2.sweep);
  for (const auto& e : r1.sweep) EXPECT_GE(r1.best.accuracy, e.accuracy);
  const std::string csv = jshc::sweep_csv(r1.sweep);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r1.sweep.size() + 1);
}

TEST(Config, Validation) {
  JshcConfig cfg;
  cfg.alpha_set = {0.2, 0.1};
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.alpha_set = {};
  cfg.min_beta = 5;
  cfg.max_beta = 4;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg.max_beta = 6;
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

} // namespace
