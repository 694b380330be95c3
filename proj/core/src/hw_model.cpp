#include "ride/hw_model.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ride::hw {

namespace {

// Published anchors: a 35-node tree draws 3.88 mW at 11 bits and a quarter of that at 5 bits
// or fewer; a 15-node tree answers in about 4e-5 s.
constexpr double kAnchorNodes = 35.0;
constexpr double kPowerAt5Bits = 0.97;
constexpr double kPowerAt11Bits = 3.88;
constexpr int kCalibratedBits = 16;
constexpr double kAreaStepPerBit = 0.009;
constexpr double kLatencyPerLevel = 1e-5;

} // namespace

QuantRanges fit_quantization_ranges(const tree::DecisionTree& tree, const Eigen::MatrixXd& features) {
  if (features.cols() == 0) throw InvalidArgument("fit_quantization_ranges: no training samples");
  QuantRanges ranges;
  for (const auto& n : tree.nodes()) {
    if (n.is_leaf() || ranges.contains(n.feature)) continue;
    if (n.feature >= features.rows())
      throw DimensionError("fit_quantization_ranges: feature " + std::to_string(n.feature) +
                           " outside the training matrix");
    const auto row = features.row(n.feature);
    FeatureRange r{row.minCoeff(), row.maxCoeff()};
    if (r.lo == r.hi) {
      r.lo -= 0.5;
      r.hi += 0.5;
    }
    ranges.emplace(n.feature, r);
  }
  return ranges;
}

double quantize_value(double t, const FeatureRange& range, int beta, std::uint64_t* level) {
  if (beta < 1 || beta > kMaxQuantBits)
    throw InvalidArgument("beta must be in [1, " + std::to_string(kMaxQuantBits) + "], got " +
                          std::to_string(beta));
  const std::uint64_t top = (std::uint64_t{1} << beta) - 1;
  const double step = (range.hi - range.lo) / static_cast<double>(top);
  const double pos = std::floor((t - range.lo) / step + 0.5);
  const std::uint64_t j = pos <= 0.0 ? 0 : pos >= static_cast<double>(top) ? top : static_cast<std::uint64_t>(pos);
  if (level) *level = j;
  return j == top ? range.hi : range.lo + static_cast<double>(j) * step;
}

QuantizedTree quantize_tree(const tree::DecisionTree& tree, int beta, const QuantRanges& ranges) {
  QuantizedTree out;
  out.beta = beta;
  out.ranges = ranges;
  out.levels.assign(tree.n_nodes(), 0);
  std::vector<double> thresholds(tree.n_nodes(), 0.0);
  for (std::size_t i = 0; i < tree.n_nodes(); ++i) {
    const auto& n = tree.node(i);
    if (n.is_leaf()) continue;
    const auto it = ranges.find(n.feature);
    if (it == ranges.end())
      throw InvalidArgument("quantize_tree: no quantization range for feature " + std::to_string(n.feature));
    thresholds[i] = quantize_value(n.threshold, it->second, beta, &out.levels[i]);
  }
  out.tree = tree.with_thresholds(thresholds);
  return out;
}

std::string to_json(const QuantizedTree& qtree) {
  detail::json ranges = detail::json::array();
  for (const auto& [f, r] : qtree.ranges) ranges.push_back({{"feature", f}, {"lo", r.lo}, {"hi", r.hi}});
  detail::json j = {{"beta", qtree.beta},
                    {"ranges", std::move(ranges)},
                    {"levels", qtree.levels},
                    {"tree", detail::json::parse(tree::to_json(qtree.tree))}};
  return j.dump(1);
}

QuantizedTree quantized_tree_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "quantized tree json", [](const detail::json& j) {
    QuantizedTree q;
    q.beta = j.at("beta").get<int>();
    for (const auto& r : j.at("ranges"))
      q.ranges[r.at("feature").get<int>()] = {r.at("lo").get<double>(), r.at("hi").get<double>()};
    q.levels = j.at("levels").get<std::vector<std::uint64_t>>();
    q.tree = tree::tree_from_json(j.at("tree").dump());
    if (q.levels.size() != q.tree.n_nodes()) throw ParseError("quantized tree json: levels/nodes mismatch");
    return q;
  });
}

CostCalibration CostCalibration::defaults() {
  CostCalibration c;
  const double p5 = kPowerAt5Bits / kAnchorNodes;
  const double p11 = kPowerAt11Bits / kAnchorNodes;
  const double slope = (p11 - p5) / 6.0;
  for (int b = 1; b <= kCalibratedBits; ++b) {
    c.power_mw_per_node.push_back(b <= 5 ? p5 : b == 11 ? p11 : p5 + slope * (b - 5));
    c.area_units_per_node.push_back(b <= 5 ? 1.0 : 1.0 + kAreaStepPerBit * (b - 5));
  }
  c.latency_s_per_level = kLatencyPerLevel;
  return c;
}

void CostCalibration::validate() const {
  if (power_mw_per_node.empty()) throw InvalidArgument("calibration: empty power table");
  if (area_units_per_node.size() != power_mw_per_node.size())
    throw InvalidArgument("calibration: power and area tables differ in length");
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i]) || v[i] < 0.0)
        throw InvalidArgument(std::string("calibration: ") + name + " must be finite and >= 0");
      if (i > 0 && v[i] < v[i - 1])
        throw InvalidArgument(std::string("calibration: ") + name + " decreases at beta " +
                              std::to_string(i + 1));
    }
  };
  check(power_mw_per_node, "power_mw_per_node");
  check(area_units_per_node, "area_units_per_node");
  if (!std::isfinite(latency_s_per_level) || latency_s_per_level < 0.0)
    throw InvalidArgument("calibration: latency_s_per_level must be finite and >= 0");
}

CostCalibration CostCalibration::from_json(std::string_view text) {
  auto c = detail::parse_json_or_throw(text, "calibration", [](const detail::json& j) {
    for (const auto& [key, _] : j.items())
      if (key != "power_mw_per_node" && key != "area_units_per_node" && key != "latency_s_per_level" &&
          key != "note")
        throw ParseError("calibration: unknown key '" + key + "'");
    CostCalibration out;
    out.power_mw_per_node = j.at("power_mw_per_node").get<std::vector<double>>();
    out.area_units_per_node = j.at("area_units_per_node").get<std::vector<double>>();
    out.latency_s_per_level = j.at("latency_s_per_level").get<double>();
    return out;
  });
  c.validate();
  return c;
}

CostCalibration CostCalibration::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return defaults();
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string CostCalibration::to_json() const {
  detail::json j = {{"note", "Estimates derived from published measurements; entry i is beta = i + 1."},
                    {"power_mw_per_node", power_mw_per_node},
                    {"area_units_per_node", area_units_per_node},
                    {"latency_s_per_level", latency_s_per_level}};
  return j.dump(2) + "\n";
}

HardwareCost cost_estimate(std::size_t n_nodes, std::size_t depth, int beta, const CostCalibration& calib) {
  if (beta < 1 || beta > calib.max_beta())
    throw InvalidArgument("cost_estimate: beta " + std::to_string(beta) + " outside calibration [1, " +
                          std::to_string(calib.max_beta()) + "]");
  const auto b = static_cast<std::size_t>(beta - 1);
  HardwareCost cost;
  cost.n_nodes = n_nodes;
  cost.depth = depth;
  cost.beta = beta;
  cost.power_mw = static_cast<double>(n_nodes) * calib.power_mw_per_node[b];
  cost.area_units = static_cast<double>(n_nodes) * calib.area_units_per_node[b];
  cost.inference_time_s = static_cast<double>(depth) * calib.latency_s_per_level;
  return cost;
}

HardwareCost cost_estimate(const QuantizedTree& qtree, const CostCalibration& calib) {
  return cost_estimate(qtree.tree.n_nodes(), qtree.tree.max_depth(), qtree.beta, calib);
}

ConstraintCheck check_constraint(const HardwareCost& cost, const Budget& budget) {
  ConstraintCheck out;
  if (budget.max_power_mw && cost.power_mw > *budget.max_power_mw) out.violations.emplace_back("power");
  if (budget.max_area_units && cost.area_units > *budget.max_area_units) out.violations.emplace_back("area");
  if (budget.max_latency_s && cost.inference_time_s > *budget.max_latency_s)
    out.violations.emplace_back("latency");
  out.ok = out.violations.empty();
  return out;
}

} // namespace ride::hw
