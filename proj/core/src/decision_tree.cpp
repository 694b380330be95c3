#include "ride/decision_tree.hpp"

#include "ride/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ride::tree {

namespace {

// A split must lower the weighted child impurity by more than this to be taken.
constexpr double kMinImpurityDecrease = 1e-12;

struct Sample {
  double value;
  int label;
};

class CartBuilder {
public:
  CartBuilder(const Eigen::MatrixXd& x, std::span<const int> y, std::size_t k, const CartParams& p)
      : x_(x), y_(y), k_(k), params_(p) {}

  std::vector<Node> build() {
    std::vector<std::size_t> idx(y_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    grow(idx, 0);
    return std::move(nodes_);
  }

private:
  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      Node& n = nodes_.back();
      n.depth = depth;
      n.n_samples = idx.size();
      n.class_counts.assign(k_, 0);
      for (std::size_t i : idx) ++n.class_counts[static_cast<std::size_t>(y_[i])];
      n.predicted_class = static_cast<int>(
          std::max_element(n.class_counts.begin(), n.class_counts.end()) - n.class_counts.begin());
      n.impurity = impurity(n.class_counts, params_.criterion);
    }
    const double node_impurity = nodes_.back().impurity;
    const std::size_t n = idx.size();

    const bool depth_capped = params_.max_depth && static_cast<std::size_t>(depth) >= *params_.max_depth;
    if (node_impurity <= 0.0 || n < 2 * params_.min_samples_leaf || depth_capped) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = node_impurity - kMinImpurityDecrease;

    std::vector<Sample> col(n);
    std::vector<std::size_t> left(k_), right(k_);
    for (Eigen::Index f = 0; f < x_.rows(); ++f) {
      for (std::size_t j = 0; j < n; ++j) col[j] = {x_(f, static_cast<Eigen::Index>(idx[j])), y_[idx[j]]};
      std::stable_sort(col.begin(), col.end(),
                       [](const Sample& a, const Sample& b) { return a.value < b.value; });
      std::fill(left.begin(), left.end(), 0);
      right = nodes_[static_cast<std::size_t>(id)].class_counts;
      for (std::size_t j = 0; j + 1 < n; ++j) {
        ++left[static_cast<std::size_t>(col[j].label)];
        --right[static_cast<std::size_t>(col[j].label)];
        const std::size_t n_left = j + 1;
        const std::size_t n_right = n - n_left;
        if (col[j].value == col[j + 1].value) continue;
        if (n_left < params_.min_samples_leaf || n_right < params_.min_samples_leaf) continue;
        const double score = (static_cast<double>(n_left) * impurity(left, params_.criterion) +
                              static_cast<double>(n_right) * impurity(right, params_.criterion)) /
                             static_cast<double>(n);
        if (score < best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (col[j].value + col[j + 1].value);
          // Rounding can push the midpoint onto the upper value; keep it strictly below.
          if (mid >= col[j + 1].value) mid = col[j].value;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> go_left, go_right;
    for (std::size_t i : idx) {
      if (x_(best_feature, static_cast<Eigen::Index>(i)) <= best_threshold)
        go_left.push_back(i);
      else
        go_right.push_back(i);
    }
    const int l = grow(go_left, depth + 1);
    const int r = grow(go_right, depth + 1);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  std::size_t k_;
  CartParams params_;
  std::vector<Node> nodes_;
};

} // namespace

std::string_view to_string(Criterion c) noexcept { return c == Criterion::gini ? "gini" : "entropy"; }

Criterion criterion_from_string(std::string_view name) {
  if (name == "gini") return Criterion::gini;
  if (name == "entropy") return Criterion::entropy;
  throw ParseError("unknown impurity criterion '" + std::string(name) + "'");
}

double impurity(std::span<const std::size_t> counts, Criterion criterion) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n == 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    acc += criterion == Criterion::gini ? p * p : -p * std::log2(p);
  }
  return criterion == Criterion::gini ? std::max(0.0, 1.0 - acc) : acc;
}

DecisionTree::DecisionTree(std::vector<Node> nodes, std::size_t k_classes, std::size_t n_features,
                           std::size_t total_samples, Criterion criterion)
    : nodes_(std::move(nodes)), k_(k_classes), n_features_(n_features),
      total_samples_(total_samples), criterion_(criterion) {
  refresh_branch_stats();
  validate();
}

void DecisionTree::refresh_branch_stats() {
  if (nodes_.empty()) return;
  const double total = static_cast<double>(std::max<std::size_t>(total_samples_, 1));
  for (Node& n : nodes_) n.weighted_impurity = static_cast<double>(n.n_samples) / total * n.impurity;
  // Preorder storage puts children after parents, so a reverse sweep is bottom-up.
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.is_leaf()) {
      n.subtree_impurity = n.weighted_impurity;
      n.subtree_leaves = 1;
    } else {
      const Node& l = nodes_.at(static_cast<std::size_t>(n.left));
      const Node& r = nodes_.at(static_cast<std::size_t>(n.right));
      n.subtree_impurity = l.subtree_impurity + r.subtree_impurity;
      n.subtree_leaves = l.subtree_leaves + r.subtree_leaves;
    }
  }
  nodes_[0].depth = 0;
  for (Node& n : nodes_) {
    if (n.is_leaf()) continue;
    nodes_[static_cast<std::size_t>(n.left)].depth = n.depth + 1;
    nodes_[static_cast<std::size_t>(n.right)].depth = n.depth + 1;
  }
}

std::size_t DecisionTree::n_leaves() const noexcept {
  return nodes_.empty() ? 0 : nodes_.front().subtree_leaves;
}

std::size_t DecisionTree::max_depth() const noexcept {
  int d = 0;
  for (const Node& n : nodes_) d = std::max(d, n.depth);
  return static_cast<std::size_t>(d);
}

double DecisionTree::terminal_impurity() const noexcept {
  return nodes_.empty() ? 0.0 : nodes_.front().subtree_impurity;
}

int DecisionTree::leaf_of(std::span<const double> x) const {
  std::size_t i = 0;
  for (;;) {
    const Node& n = nodes_[i];
    if (n.is_leaf()) return static_cast<int>(i);
    if (static_cast<std::size_t>(n.feature) >= x.size())
      throw DimensionError("tree split uses feature " + std::to_string(n.feature) +
                           " but input has " + std::to_string(x.size()) + " values");
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
}

int DecisionTree::predict_label(std::span<const double> x) const {
  return nodes_[static_cast<std::size_t>(leaf_of(x))].predicted_class;
}

DecisionTree DecisionTree::with_thresholds(std::span<const double> thresholds) const {
  if (thresholds.size() != nodes_.size())
    throw DimensionError("with_thresholds: need one threshold per node");
  DecisionTree out = *this;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!out.nodes_[i].is_leaf()) out.nodes_[i].threshold = thresholds[i];
  return out;
}

void DecisionTree::validate() const {
  if (nodes_.empty()) throw InvalidArgument("decision tree has no nodes");
  std::vector<int> seen(nodes_.size(), 0);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    if (seen[i]++) throw InvalidArgument("decision tree node " + std::to_string(i) + " reached twice");
    const Node& n = nodes_[i];
    if (n.class_counts.size() != k_)
      throw InvalidArgument("decision tree node " + std::to_string(i) + " has wrong class count length");
    if ((n.left == kNoChild) != (n.right == kNoChild))
      throw InvalidArgument("decision tree node " + std::to_string(i) + " has exactly one child");
    if (n.is_leaf()) continue;
    if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
        static_cast<std::size_t>(n.left) >= nodes_.size() ||
        static_cast<std::size_t>(n.right) >= nodes_.size())
      throw InvalidArgument("decision tree node " + std::to_string(i) + " has invalid children");
    if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= n_features_)
      throw InvalidArgument("decision tree node " + std::to_string(i) + " splits on invalid feature");
    if (n.subtree_impurity > n.weighted_impurity + 1e-12)
      throw InvalidArgument("decision tree node " + std::to_string(i) + " has R(T_t) > R(t)");
    stack.push_back(static_cast<std::size_t>(n.right));
    stack.push_back(static_cast<std::size_t>(n.left));
  }
  if (std::count(seen.begin(), seen.end(), 0) != 0)
    throw InvalidArgument("decision tree has unreachable nodes");
}

DecisionTree cart_train(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t k,
                        const CartParams& params) {
  if (labels.empty()) throw InvalidArgument("cart_train: no samples");
  if (static_cast<std::size_t>(features.cols()) != labels.size())
    throw DimensionError("cart_train: feature columns != label count");
  if (k < 1) throw InvalidArgument("cart_train: k must be >= 1");
  if (params.min_samples_leaf < 1) throw InvalidArgument("cart_train: min_samples_leaf must be >= 1");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw InvalidArgument("cart_train: label " + std::to_string(y) + " outside [0, k)");
  CartBuilder builder(features, labels, k, params);
  return DecisionTree(builder.build(), k, static_cast<std::size_t>(features.rows()), labels.size(),
                      params.criterion);
}

} // namespace ride::tree
