#include "fixtures.hpp"
#include "oracles.hpp"
#include "ride/decision_tree.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace {

using namespace ride;

Eigen::MatrixXd row(std::initializer_list<double> values) {
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) x(0, j++) = v;
  return x;
}

TEST(PruningPath, SingleLeaf) {
  const auto t = tree::cart_train(row({1, 2}), std::vector<int>{0, 0}, 2);
  const auto path = tree::pruning_path(t);
  ASSERT_EQ(path.steps.size(), 1u);
  EXPECT_EQ(path.steps[0].alpha_eff, 0.0);
  EXPECT_EQ(path.steps[0].n_nodes_after, 1u);
}

TEST(PruningPath, StumpAlphaIsHalf) {
  // R(root) = 1 * gini(2, 2) = 0.5; both leaves are pure so R(T_root) = 0 over 2 leaves.
  const auto t = tree::cart_train(row({0, 1, 2, 3}), std::vector<int>{0, 0, 1, 1}, 2);
  const auto alphas = tree::effective_alphas(t);
  EXPECT_DOUBLE_EQ(alphas[0], 0.5);
  const auto path = tree::pruning_path(t);
  ASSERT_EQ(path.steps.size(), 2u);
  EXPECT_DOUBLE_EQ(path.steps[1].alpha_eff, 0.5);
  EXPECT_EQ(path.steps[1].n_nodes_after, 1u);
}

TEST(PruningPath, StrictlyMonotone) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto data = fixture::random_dataset(seed, 150, 3, 2);
    const auto t = tree::cart_train(data.x, data.y, 2);
    const auto path = tree::pruning_path(t);
    ASSERT_FALSE(path.steps.empty());
    EXPECT_EQ(path.steps.front().alpha_eff, 0.0);
    EXPECT_EQ(path.steps.front().n_nodes_after, t.n_nodes());
    EXPECT_EQ(path.steps.back().n_nodes_after, 1u);
    for (std::size_t i = 1; i < path.steps.size(); ++i) {
      EXPECT_GT(path.steps[i].alpha_eff, path.steps[i - 1].alpha_eff);
      EXPECT_LT(path.steps[i].n_nodes_after, path.steps[i - 1].n_nodes_after);
      EXPECT_EQ(path.snapshots[path.steps[i].snapshot].n_nodes(), path.steps[i].n_nodes_after);
    }
  }
}

TEST(PruningPath, MatchesBruteForceEnvelope) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto st = fixture::small_random_tree(seed);
    const auto path = tree::pruning_path(st.tree);
    const auto oracle_path = oracle::brute_force_path(st.tree);
    ASSERT_EQ(path.steps.size(), oracle_path.size()) << "seed " << seed;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
      EXPECT_NEAR(path.steps[i].alpha_eff, oracle_path[i].alpha, 1e-12) << "seed " << seed << " step " << i;
      EXPECT_EQ(oracle::signature(path.snapshots[path.steps[i].snapshot]), oracle::signature(st.tree, oracle_path[i].pruning))
          << "seed " << seed << " step " << i;
    }
  }
}

TEST(Prune, EqualsExhaustiveMinimizerOnAGrid) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto st = fixture::small_random_tree(seed);
    const auto path = tree::pruning_path(st.tree);
    double max_alpha = path.steps.back().alpha_eff;
    for (int g = 0; g <= 60; ++g) {
      const double alpha = 1.2 * max_alpha * g / 60.0;
      const auto pruned = tree::prune(st.tree, alpha);
      const auto best = oracle::brute_force_prune(st.tree, alpha);
      const double risk = pruned.terminal_impurity() + alpha * static_cast<double>(pruned.n_leaves());
      EXPECT_NEAR(risk, best.risk + alpha * static_cast<double>(best.leaves), 1e-12) << "seed " << seed;
      EXPECT_EQ(pruned.n_leaves(), best.leaves) << "seed " << seed << " alpha " << alpha;
    }
  }
}

TEST(Prune, ZeroAlphaLeavesTreeUnchanged) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto st = fixture::small_random_tree(seed);
    EXPECT_EQ(oracle::signature(tree::prune(st.tree, 0.0)), oracle::signature(st.tree));
  }
}

TEST(Prune, InfiniteAlphaGivesMajorityLeaf) {
  const auto data = fixture::random_dataset(4, 90, 2, 3);
  const auto t = tree::cart_train(data.x, data.y, 3);
  const auto leaf = tree::prune(t, std::numeric_limits<double>::infinity());
  EXPECT_EQ(leaf.n_nodes(), 1u);
  EXPECT_EQ(leaf.node(0).predicted_class, t.node(0).predicted_class);
  std::vector<std::size_t> counts(3);
  for (int y : data.y) ++counts[static_cast<std::size_t>(y)];
  EXPECT_EQ(leaf.node(0).predicted_class,
            static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin()));
}

TEST(Prune, NodeCountNonIncreasingInAlpha) {
  const auto data = fixture::random_dataset(6, 300, 4, 2);
  const auto t = tree::cart_train(data.x, data.y, 2);
  const auto path = tree::pruning_path(t);
  std::size_t prev = t.n_nodes();
  for (int g = 0; g <= 100; ++g) {
    const double alpha = 0.05 * g / 100.0;
    const auto n = tree::prune(path, alpha).n_nodes();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(Prune, PathAndTreeOverloadsAgree) {
  const auto data = fixture::random_dataset(7, 200, 3, 2);
  const auto t = tree::cart_train(data.x, data.y, 2);
  const auto path = tree::pruning_path(t);
  for (double alpha : path.alphas()) {
    EXPECT_EQ(oracle::signature(tree::prune(t, alpha)), oracle::signature(tree::prune(path, alpha)));
    EXPECT_EQ(tree::prune(path, alpha).n_nodes(), path.steps[path.step_for(alpha)].n_nodes_after);
  }
}

} // namespace
