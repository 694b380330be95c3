#pragma once

#include "ride/decision_tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Cost model for a tree whose split boundaries are programmed into analog comparator nodes.
namespace ride::hw {

inline constexpr int kMaxQuantBits = 52;

struct FeatureRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Keyed by feature index; only features used by some split have an entry.
using QuantRanges = std::map<int, FeatureRange>;

/// Observed min/max of every split feature over `features` (n_features x n). A constant feature
/// is widened to (v - 0.5, v + 0.5).
QuantRanges fit_quantization_ranges(const tree::DecisionTree& tree, const Eigen::MatrixXd& features);

/// Snaps t to the nearest of 2^beta evenly spaced levels on [lo, hi]; halfway values go up.
/// Values outside the range clamp to the end levels.
double quantize_value(double t, const FeatureRange& range, int beta, std::uint64_t* level = nullptr);

struct QuantizedTree {
  tree::DecisionTree tree; ///< same topology as the source, thresholds replaced
  int beta = 0;
  QuantRanges ranges;
  std::vector<std::uint64_t> levels; ///< per node; 0 for leaves

  int predict_label(std::span<const double> x) const { return tree.predict_label(x); }
  std::size_t n_nodes() const noexcept { return tree.n_nodes(); }
};

/// Throws InvalidArgument for beta outside [1, kMaxQuantBits] or a split feature with no range.
QuantizedTree quantize_tree(const tree::DecisionTree& tree, int beta, const QuantRanges& ranges);

std::string to_json(const QuantizedTree& qtree);
QuantizedTree quantized_tree_from_json(std::string_view text);

struct HardwareCost {
  double power_mw = 0.0;
  double area_units = 0.0;       ///< 1.0 = one node at 5 bits
  double inference_time_s = 0.0; ///< modeled compute latency per sample, I/O excluded
  std::size_t n_nodes = 0;
  std::size_t depth = 0;
  int beta = 0;

  friend bool operator==(const HardwareCost&, const HardwareCost&) = default;
};

/// Per-node power and area tables indexed by beta (entry 0 is beta = 1) plus the latency of
/// one tree level.
struct CostCalibration {
  std::vector<double> power_mw_per_node;
  std::vector<double> area_units_per_node;
  double latency_s_per_level = 0.0;

  /// Built-in table anchored to the published measurements.
  static CostCalibration defaults();
  static CostCalibration from_json(std::string_view text);
  /// Missing file returns defaults().
  static CostCalibration load(const std::filesystem::path& path);

  int max_beta() const noexcept { return static_cast<int>(power_mw_per_node.size()); }
  /// Throws InvalidArgument: equal lengths, non-negative, non-decreasing in beta.
  void validate() const;
  std::string to_json() const;
};

/// power = n_nodes * p(beta); area = n_nodes * a(beta); latency = depth * latency_per_level,
/// where depth counts comparator levels on the longest root-to-leaf path.
HardwareCost cost_estimate(std::size_t n_nodes, std::size_t depth, int beta, const CostCalibration& calib);
HardwareCost cost_estimate(const QuantizedTree& qtree, const CostCalibration& calib);

struct Budget {
  std::optional<double> max_power_mw;
  std::optional<double> max_area_units;
  std::optional<double> max_latency_s;

  bool empty() const noexcept { return !max_power_mw && !max_area_units && !max_latency_s; }
};

struct ConstraintCheck {
  bool ok = true;
  std::vector<std::string> violations; ///< "power", "area", "latency"
};

/// Inclusive: a cost exactly at its budget passes.
ConstraintCheck check_constraint(const HardwareCost& cost, const Budget& budget);

} // namespace ride::hw
