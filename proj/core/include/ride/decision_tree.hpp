#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ride::tree {

enum class Criterion { gini, entropy };

std::string_view to_string(Criterion c) noexcept;
Criterion criterion_from_string(std::string_view name);

/// Node impurity of a class histogram.
double impurity(std::span<const std::size_t> counts, Criterion criterion);

inline constexpr int kNoChild = -1;

struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = kNoChild;
  int right = kNoChild;

  std::vector<std::size_t> class_counts;
  int predicted_class = 0;
  std::size_t n_samples = 0;
  int depth = 0;

  double impurity = 0.0;          ///< unweighted impurity of the node's samples
  double weighted_impurity = 0.0; ///< R(t) = n_t / N * impurity
  double subtree_impurity = 0.0;  ///< R(T_t): sum of R over the branch's leaves
  std::size_t subtree_leaves = 1; ///< |leaves(T_t)|

  bool is_leaf() const noexcept { return left == kNoChild; }
};

/// Binary classification tree. Routing: go left iff x[feature] <= threshold.
/// Nodes are stored in preorder with the root at index 0.
class DecisionTree {
public:
  DecisionTree() = default;
  DecisionTree(std::vector<Node> nodes, std::size_t k_classes, std::size_t n_features,
               std::size_t total_samples, Criterion criterion);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t k_classes() const noexcept { return k_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t total_samples() const noexcept { return total_samples_; }
  Criterion criterion() const noexcept { return criterion_; }

  std::size_t n_nodes() const noexcept { return nodes_.size(); }
  std::size_t n_leaves() const noexcept;
  /// Edges on the longest root-to-leaf path.
  std::size_t max_depth() const noexcept;
  /// R(T): total sample-weighted impurity of the leaves.
  double terminal_impurity() const noexcept;

  int predict_label(std::span<const double> x) const;
  int leaf_of(std::span<const double> x) const;

  /// Replaces split thresholds; topology, features, and leaf classes stay as they are.
  DecisionTree with_thresholds(std::span<const double> thresholds) const;

  /// Checks acyclicity, child ranges, reachability, and R(T_t) <= R(t).
  void validate() const;

private:
  void refresh_branch_stats();

  std::vector<Node> nodes_;
  std::size_t k_ = 0;
  std::size_t n_features_ = 0;
  std::size_t total_samples_ = 0;
  Criterion criterion_ = Criterion::gini;
};

struct CartParams {
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;
  Criterion criterion = Criterion::gini;
};

/// Greedy CART induction. `features` is n_features x n_samples (one column per sample).
/// Split candidates are midpoints between consecutive distinct values; ties prefer the lower
/// feature index and then the lower threshold. A node is split only if impurity strictly drops.
DecisionTree cart_train(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t k,
                        const CartParams& params = {});

// ---------------------------------------------------------------------------
// Minimal cost-complexity pruning

/// alpha_eff(t) = (R(t) - R(T_t)) / (|leaves(T_t)| - 1) for each internal node, NaN for leaves.
std::vector<double> effective_alphas(const DecisionTree& tree);

/// Builds the subtree obtained by turning every node flagged in `collapsed` into a leaf.
/// Node ids are renumbered in preorder.
DecisionTree collapse(const DecisionTree& tree, const std::vector<bool>& collapsed);

inline constexpr double kAlphaTieTolerance = 1e-12;

struct PruningStep {
  double alpha_eff = 0.0;
  std::size_t n_nodes_after = 0;
  std::size_t n_leaves_after = 0;
  double terminal_impurity = 0.0;
  std::size_t snapshot = 0;       ///< index into PruningPath::snapshots
  std::vector<bool> collapsed;    ///< collapsed flags in the source tree's node ids
};

struct PruningPath {
  std::vector<PruningStep> steps;
  std::vector<DecisionTree> snapshots;

  std::vector<double> alphas() const;
  /// Index of the last step whose alpha_eff <= alpha. An alpha within kAlphaTieTolerance below a
  /// breakpoint counts as reaching it, so rounding in alpha_eff never keeps a costlier subtree.
  std::size_t step_for(double alpha) const;
};

/// Iterated weakest-link pruning. Every internal node tying at the minimal alpha_eff
/// collapses in the same step. The first step is (0, full tree).
PruningPath pruning_path(const DecisionTree& tree);

/// Subtree minimizing R(T') + alpha * |leaves(T')|, smallest on ties.
DecisionTree prune(const DecisionTree& tree, double alpha);
DecisionTree prune(const PruningPath& path, double alpha);

// ---------------------------------------------------------------------------
// Serialization

std::string to_json(const DecisionTree& tree);
DecisionTree tree_from_json(std::string_view text);

/// Indented if/else rules, one split per line.
std::string to_rules_text(const DecisionTree& tree, std::span<const std::string> class_names = {});

} // namespace ride::tree
