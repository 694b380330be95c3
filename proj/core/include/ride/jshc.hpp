#pragma once

#include "ride/decision_tree.hpp"
#include "ride/distill.hpp"
#include "ride/error.hpp"
#include "ride/hw_model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

/// Joint search over the pruning strength alpha and the threshold bit width beta.
namespace ride::jshc {

struct JshcConfig {
  std::vector<double> alpha_set; ///< ascending; empty means "the tree's own pruning path"
  std::vector<int> beta_set = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  int min_beta = 1;
  int max_beta = 11;
  double tol = 1.0;
  std::size_t max_iter = 16;
  hw::Budget z_max;

  /// Throws InvalidArgument.
  void validate() const;
};

/// Everything evaluate_config needs, prepared once.
struct Artifacts {
  tree::DecisionTree full_tree;
  tree::PruningPath path;
  hw::QuantRanges ranges;
  hw::CostCalibration calib;
  Eigen::MatrixXd eval_features; ///< n_features x n_eval
  std::vector<int> eval_labels;  ///< ground truth
  std::size_t k_classes = 0;
};

/// Fits the full tree on the teacher-labeled training set, computes its pruning path, and fits
/// quantization ranges on the same training features.
Artifacts prepare_artifacts(const distill::TeacherDataset& train, const tree::CartParams& params,
                            std::span<const rae::FlowEmbedding> eval, hw::CostCalibration calib);
/// Same, for an already distilled tree; ranges come from `train_features`.
Artifacts prepare_artifacts(tree::DecisionTree full_tree, const Eigen::MatrixXd& train_features,
                            std::span<const rae::FlowEmbedding> eval, hw::CostCalibration calib);

/// Alpha values 0 plus every alpha_eff on the path, ascending and distinct.
std::vector<double> default_alpha_set(const tree::PruningPath& path);

struct ConfigEval {
  double alpha = 0.0;
  int beta = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  hw::HardwareCost cost;
  bool feasible = true;
  std::vector<std::string> violations;
  std::size_t n_nodes = 0;

  friend bool operator==(const ConfigEval&, const ConfigEval&) = default;
};

/// Raised by grid_sweep when no configuration meets the budget.
class NoFeasibleConfig : public Error {
public:
  NoFeasibleConfig(std::string budget, double closest, double limit)
      : Error("no feasible configuration: " + budget + " budget " + std::to_string(limit) +
              " is below the cheapest evaluated value " + std::to_string(closest)),
        budget_(std::move(budget)) {}

  /// "power", "area" or "latency".
  const std::string& budget() const noexcept { return budget_; }

private:
  std::string budget_;
};

/// Memoizing evaluator: prune(alpha) -> quantize(beta) -> accuracy on the eval set + cost.
class Evaluator {
public:
  Evaluator(const Artifacts& artifacts, hw::Budget budget);

  const ConfigEval& evaluate(double alpha, int beta);
  /// Number of evaluations that missed the cache.
  std::size_t computed() const noexcept { return computed_; }
  const Artifacts& artifacts() const noexcept { return artifacts_; }

private:
  const Artifacts& artifacts_;
  hw::Budget budget_;
  std::map<std::pair<double, int>, ConfigEval> cache_;
  std::size_t computed_ = 0;
};

/// True if a beats b: higher accuracy, then smaller beta, then larger alpha.
bool better(const ConfigEval& a, const ConfigEval& b);

struct GridResult {
  ConfigEval best;
  std::vector<ConfigEval> log; ///< ordered by (alpha, beta)
};

/// Evaluates every (alpha, beta) pair. Throws NoFeasibleConfig.
GridResult grid_sweep(const JshcConfig& cfg, Evaluator& evaluator);

struct BisectResult {
  ConfigEval best;
  std::vector<ConfigEval> trace;
};

/// Integer bisection at a fixed alpha for the smallest beta that keeps the best accuracy found
/// so far. Returns the best configuration seen, starting from `start`.
BisectResult bisect_beta(const ConfigEval& start, const JshcConfig& cfg, Evaluator& evaluator);

struct JshcResult {
  ConfigEval best;
  ConfigEval grid_best;
  std::vector<ConfigEval> sweep;
  std::vector<ConfigEval> bisection;
  std::vector<double> alpha_set;
};

JshcResult jshc_optimize(const JshcConfig& cfg, Evaluator& evaluator);

/// alpha,beta,accuracy,f1,n_nodes,power_mw,area_units,latency_s,feasible
std::string sweep_csv(std::span<const ConfigEval> log);

} // namespace ride::jshc
