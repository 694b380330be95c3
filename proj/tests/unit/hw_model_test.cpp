#include "fixtures.hpp"
#include "oracles.hpp"
#include "ride/error.hpp"
#include "ride/hw_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace {

using namespace ride;
using hw::FeatureRange;

Eigen::MatrixXd row(std::initializer_list<double> values) {
  Eigen::MatrixXd x(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) x(0, j++) = v;
  return x;
}

std::span<const double> column(const Eigen::MatrixXd& x, Eigen::Index j) {
  return {x.col(j).data(), static_cast<std::size_t>(x.rows())};
}

TEST(Ranges, ObservedMinAndMax) {
  Eigen::MatrixXd x(3, 4);
  x << 0.2, 0.8, 0.5, 0.3,  //
      0.5, 0.5, 0.5, 0.5,   //
      9, 9, 9, 9;
  const std::vector<int> y = {0, 1, 1, 0};
  // Feature 0 separates the classes perfectly; build a tree that also splits on feature 1.
  std::vector<tree::Node> nodes(5);
  nodes[0] = {.feature = 0, .threshold = 0.4, .left = 1, .right = 2};
  nodes[2] = {.feature = 1, .threshold = 0.5, .left = 3, .right = 4};
  nodes[0].class_counts = {2, 2};
  nodes[1].class_counts = {2, 0};
  nodes[2].class_counts = {0, 2};
  nodes[3].class_counts = {0, 1};
  nodes[4].class_counts = {0, 1};
  const tree::DecisionTree t(nodes, 2, 3, 4, tree::Criterion::gini);
  const auto ranges = hw::fit_quantization_ranges(t, x);
  ASSERT_EQ(ranges.size(), 2u);
  EXPECT_EQ(ranges.at(0).lo, 0.2);
  EXPECT_EQ(ranges.at(0).hi, 0.8);
  EXPECT_EQ(ranges.at(1).lo, 0.0);
  EXPECT_EQ(ranges.at(1).hi, 1.0);
  EXPECT_FALSE(ranges.contains(2));
}

TEST(QuantizeValue, Examples) {
  EXPECT_EQ(hw::quantize_value(0.3, {0, 1}, 1), 0.0);
  EXPECT_EQ(hw::quantize_value(0.7, {0, 1}, 1), 1.0);
  EXPECT_EQ(hw::quantize_value(0.5, {0, 1}, 1), 1.0);
  // beta = 2: levels 0, 1/3, 2/3, 1. 0.5 is halfway between 1/3 and 2/3.
  EXPECT_DOUBLE_EQ(hw::quantize_value(0.5, {0, 1}, 2), 2.0 / 3.0);
  EXPECT_EQ(hw::quantize_value(-4.0, {0, 1}, 3), 0.0);
  EXPECT_EQ(hw::quantize_value(7.0, {0, 1}, 3), 1.0);
  std::uint64_t level = 99;
  EXPECT_EQ(hw::quantize_value(1.5, {0, 15}, 4, &level), 2.0);
  EXPECT_EQ(level, 2u);
  EXPECT_THROW(hw::quantize_value(0.5, {0, 1}, 0), InvalidArgument);
  EXPECT_THROW(hw::quantize_value(0.5, {0, 1}, hw::kMaxQuantBits + 1), InvalidArgument);
}

TEST(QuantizeValue, MatchesLevelScanOracleAndErrorBound) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  for (int trial = 0; trial < 3000; ++trial) {
    const double a = u(rng), b = u(rng);
    const FeatureRange r{std::min(a, b), std::max(a, b) + 1e-3};
    const int beta = 1 + static_cast<int>(rng() % 10);
    const double t = r.lo + (r.hi - r.lo) * std::uniform_real_distribution<double>(0, 1)(rng);
    const double q = hw::quantize_value(t, r, beta);
    EXPECT_NEAR(q, oracle::nearest_level(t, r.lo, r.hi, beta), 1e-12 * (r.hi - r.lo));
    if (beta >= 2) EXPECT_LE(std::abs(q - t), (r.hi - r.lo) / (2.0 * (std::ldexp(1.0, beta) - 1.0)) + 1e-12);
  }
}

TEST(QuantizeTree, PreservesStructure) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto st = fixture::small_random_tree(seed);
    const auto ranges = hw::fit_quantization_ranges(st.tree, st.data.x);
    for (int beta : {1, 3, 8}) {
      const auto q = hw::quantize_tree(st.tree, beta, ranges);
      ASSERT_EQ(q.n_nodes(), st.tree.n_nodes());
      for (std::size_t i = 0; i < q.n_nodes(); ++i) {
        const auto& a = st.tree.node(i);
        const auto& b = q.tree.node(i);
        EXPECT_EQ(a.feature, b.feature);
        EXPECT_EQ(a.left, b.left);
        EXPECT_EQ(a.right, b.right);
        EXPECT_EQ(a.predicted_class, b.predicted_class);
        EXPECT_EQ(a.class_counts, b.class_counts);
        if (!a.is_leaf()) {
          const auto& r = ranges.at(a.feature);
          const double step = (r.hi - r.lo) / (std::ldexp(1.0, beta) - 1.0);
          EXPECT_NEAR(b.threshold, r.lo + static_cast<double>(q.levels[i]) * step, 1e-12);
        }
      }
    }
  }
}

TEST(QuantizeTree, HighPrecisionKeepsPredictions) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto st = fixture::small_random_tree(seed);
    const auto ranges = hw::fit_quantization_ranges(st.tree, st.data.x);
    const auto q = hw::quantize_tree(st.tree, 24, ranges);
    for (std::size_t i = 0; i < q.n_nodes(); ++i) {
      const auto& n = st.tree.node(i);
      if (n.is_leaf()) continue;
      const auto& r = ranges.at(n.feature);
      EXPECT_LE(std::abs(q.tree.node(i).threshold - n.threshold), (r.hi - r.lo) / std::ldexp(1.0, 24));
    }
    for (Eigen::Index j = 0; j < st.data.x.cols(); ++j)
      EXPECT_EQ(q.predict_label(column(st.data.x, j)), st.tree.predict_label(column(st.data.x, j)));
  }
}

TEST(QuantizeTree, MissingRangeIsAnError) {
  const auto t = tree::cart_train(row({0, 1, 2, 3}), std::vector<int>{0, 0, 1, 1}, 2);
  try {
    hw::quantize_tree(t, 4, {});
    FAIL() << "expected an error";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("feature 0"), std::string::npos);
  }
}

TEST(QuantizeTree, JsonRoundTrip) {
  const auto st = fixture::small_random_tree(2);
  const auto q = hw::quantize_tree(st.tree, 6, hw::fit_quantization_ranges(st.tree, st.data.x));
  const auto back = hw::quantized_tree_from_json(hw::to_json(q));
  EXPECT_EQ(back.beta, 6);
  EXPECT_EQ(back.levels, q.levels);
  EXPECT_EQ(oracle::signature(back.tree), oracle::signature(q.tree));
}

TEST(Cost, PublishedPowerAnchors) {
  const auto calib = hw::CostCalibration::defaults();
  EXPECT_NEAR(hw::cost_estimate(35, 6, 11, calib).power_mw, 3.88, 1e-12);
  EXPECT_NEAR(hw::cost_estimate(35, 6, 5, calib).power_mw, 0.97, 1e-12);
  for (int beta = 1; beta <= 5; ++beta) EXPECT_NEAR(hw::cost_estimate(35, 6, beta, calib).power_mw, 0.97, 1e-12);
}

TEST(Cost, FifteenNodeLatencyScale) {
  const auto calib = hw::CostCalibration::defaults();
  // A 15-node tree has between 3 (balanced) and 7 (a chain) comparator levels.
  for (std::size_t depth = 3; depth <= 7; ++depth) {
    const double t = hw::cost_estimate(15, depth, 5, calib).inference_time_s;
    EXPECT_GE(t, 1e-5);
    EXPECT_LE(t, 1e-4);
  }
  EXPECT_DOUBLE_EQ(hw::cost_estimate(15, 4, 5, calib).inference_time_s, 4e-5);
}

TEST(Cost, MonotoneInBetaAndNodes) {
  const auto calib = hw::CostCalibration::defaults();
  EXPECT_NO_THROW(calib.validate());
  for (int beta = 2; beta <= calib.max_beta(); ++beta) {
    const auto a = hw::cost_estimate(20, 5, beta - 1, calib);
    const auto b = hw::cost_estimate(20, 5, beta, calib);
    EXPECT_LE(a.power_mw, b.power_mw);
    EXPECT_LE(a.area_units, b.area_units);
    EXPECT_EQ(a.inference_time_s, b.inference_time_s);
  }
  for (std::size_t n = 2; n < 60; ++n) {
    EXPECT_LE(hw::cost_estimate(n - 1, 3, 7, calib).power_mw, hw::cost_estimate(n, 3, 7, calib).power_mw);
    EXPECT_LE(hw::cost_estimate(n - 1, 3, 7, calib).area_units, hw::cost_estimate(n, 3, 7, calib).area_units);
  }
  // Area stays within 10% of the 5-bit figure up to 11 bits.
  EXPECT_LE(calib.area_units_per_node[10], 1.1 * calib.area_units_per_node[4]);
  EXPECT_THROW(hw::cost_estimate(5, 2, calib.max_beta() + 1, calib), InvalidArgument);
}

TEST(Cost, UsesTreeDepth) {
  const auto st = fixture::small_random_tree(4);
  const auto q = hw::quantize_tree(st.tree, 5, hw::fit_quantization_ranges(st.tree, st.data.x));
  const auto c = hw::cost_estimate(q, hw::CostCalibration::defaults());
  EXPECT_EQ(c.n_nodes, st.tree.n_nodes());
  EXPECT_EQ(c.depth, st.tree.max_depth());
  EXPECT_DOUBLE_EQ(c.inference_time_s, 1e-5 * static_cast<double>(st.tree.max_depth()));
}

TEST(Calibration, JsonRoundTripAndValidation) {
  const auto calib = hw::CostCalibration::defaults();
  const auto back = hw::CostCalibration::from_json(calib.to_json());
  EXPECT_EQ(back.power_mw_per_node, calib.power_mw_per_node);
  EXPECT_EQ(back.area_units_per_node, calib.area_units_per_node);
  EXPECT_EQ(back.latency_s_per_level, calib.latency_s_per_level);
  EXPECT_THROW(hw::CostCalibration::from_json(R"({"power_mw_per_node":[2,1],"area_units_per_node":[1,1],"latency_s_per_level":0})"),
               InvalidArgument);
  EXPECT_THROW(hw::CostCalibration::from_json(R"({"power_mw_per_node":[1],"area_units_per_node":[1],"latency_s_per_level":0,"x":1})"),
               ParseError);
  const fixture::TempDir dir;
  EXPECT_EQ(hw::CostCalibration::load(dir / "missing.json").power_mw_per_node, calib.power_mw_per_node);
}

TEST(Constraint, Examples) {
  hw::HardwareCost cost;
  cost.power_mw = 3.88;
  cost.area_units = 35;
  cost.inference_time_s = 4e-5;
  EXPECT_TRUE(hw::check_constraint(cost, {}).ok);

  hw::Budget tight;
  tight.max_power_mw = 1.0;
  const auto r = hw::check_constraint(cost, tight);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.violations, std::vector<std::string>{"power"});

  hw::Budget exact;
  exact.max_power_mw = 3.88;
  exact.max_area_units = 35;
  exact.max_latency_s = 4e-5;
  EXPECT_TRUE(hw::check_constraint(cost, exact).ok);
}

} // namespace
