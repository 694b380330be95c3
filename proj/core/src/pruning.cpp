#include "ride/decision_tree.hpp"

#include "ride/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ride::tree {

namespace {

// alpha_eff values closer than this are the same weakest link.
double tie_tolerance(double alpha) { return 1e-12 + 1e-10 * std::abs(alpha); }

struct BranchStats {
  std::vector<double> impurity;
  std::vector<std::size_t> leaves;
  std::vector<bool> reachable;
  std::vector<bool> internal;
};

BranchStats branch_stats(const DecisionTree& tree, const std::vector<bool>& collapsed) {
  const auto& nodes = tree.nodes();
  const std::size_t n = nodes.size();
  BranchStats s{std::vector<double>(n), std::vector<std::size_t>(n), std::vector<bool>(n, false),
                std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) s.internal[i] = !nodes[i].is_leaf() && !collapsed[i];
  for (std::size_t i = n; i-- > 0;) {
    if (!s.internal[i]) {
      s.impurity[i] = nodes[i].weighted_impurity;
      s.leaves[i] = 1;
    } else {
      const auto l = static_cast<std::size_t>(nodes[i].left);
      const auto r = static_cast<std::size_t>(nodes[i].right);
      s.impurity[i] = s.impurity[l] + s.impurity[r];
      s.leaves[i] = s.leaves[l] + s.leaves[r];
    }
  }
  s.reachable[0] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!s.reachable[i] || !s.internal[i]) continue;
    s.reachable[static_cast<std::size_t>(nodes[i].left)] = true;
    s.reachable[static_cast<std::size_t>(nodes[i].right)] = true;
  }
  return s;
}

} // namespace

std::vector<double> effective_alphas(const DecisionTree& tree) {
  std::vector<double> out;
  out.reserve(tree.n_nodes());
  for (const Node& n : tree.nodes()) {
    if (n.is_leaf()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.push_back((n.weighted_impurity - n.subtree_impurity) /
                  static_cast<double>(n.subtree_leaves - 1));
  }
  return out;
}

DecisionTree collapse(const DecisionTree& tree, const std::vector<bool>& collapsed) {
  if (collapsed.size() != tree.n_nodes()) throw DimensionError("collapse: mask size != node count");
  std::vector<Node> out;
  out.reserve(tree.n_nodes());
  // Explicit preorder copy; children ids are patched once their subtree has been emitted.
  auto copy = [&](auto&& self, std::size_t i) -> int {
    const int id = static_cast<int>(out.size());
    out.push_back(tree.node(i));
    Node& n = out.back();
    if (n.is_leaf() || collapsed[i]) {
      n.feature = -1;
      n.threshold = 0.0;
      n.left = n.right = kNoChild;
      return id;
    }
    const int l = self(self, static_cast<std::size_t>(tree.node(i).left));
    const int r = self(self, static_cast<std::size_t>(tree.node(i).right));
    out[static_cast<std::size_t>(id)].left = l;
    out[static_cast<std::size_t>(id)].right = r;
    return id;
  };
  copy(copy, 0);
  return DecisionTree(std::move(out), tree.k_classes(), tree.n_features(), tree.total_samples(),
                      tree.criterion());
}

std::vector<double> PruningPath::alphas() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.alpha_eff);
  return out;
}

std::size_t PruningPath::step_for(double alpha) const {
  if (steps.empty()) throw InvalidArgument("empty pruning path");
  std::size_t chosen = 0;
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i].alpha_eff <= alpha + kAlphaTieTolerance) chosen = i;
  return chosen;
}

PruningPath pruning_path(const DecisionTree& tree) {
  PruningPath path;
  std::vector<bool> collapsed(tree.n_nodes(), false);
  path.snapshots.push_back(tree);
  path.steps.push_back({0.0, tree.n_nodes(), tree.n_leaves(), tree.terminal_impurity(), 0, collapsed});

  for (;;) {
    const BranchStats s = branch_stats(tree, collapsed);
    if (!s.internal[0]) break;

    std::vector<std::pair<std::size_t, double>> candidates;
    double min_alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tree.n_nodes(); ++i) {
      if (!s.reachable[i] || !s.internal[i]) continue;
      const double a = (tree.node(i).weighted_impurity - s.impurity[i]) /
                       static_cast<double>(s.leaves[i] - 1);
      candidates.emplace_back(i, a);
      min_alpha = std::min(min_alpha, a);
    }
    const double cutoff = min_alpha + tie_tolerance(min_alpha);
    for (const auto& [i, a] : candidates)
      if (a <= cutoff) collapsed[i] = true;

    DecisionTree snapshot = collapse(tree, collapsed);
    PruningStep step{min_alpha, snapshot.n_nodes(), snapshot.n_leaves(), snapshot.terminal_impurity(),
                     path.snapshots.size(), collapsed};
    const PruningStep& last = path.steps.back();
    if (path.steps.size() > 1 && min_alpha <= last.alpha_eff + tie_tolerance(last.alpha_eff)) {
      // Numerically tied with the previous weakest link: fold into that step.
      step.alpha_eff = last.alpha_eff;
      step.snapshot = last.snapshot;
      path.snapshots[last.snapshot] = std::move(snapshot);
      path.steps.back() = std::move(step);
    } else {
      path.snapshots.push_back(std::move(snapshot));
      path.steps.push_back(std::move(step));
    }
  }
  return path;
}

DecisionTree prune(const PruningPath& path, double alpha) {
  if (!(alpha >= 0.0)) throw InvalidArgument("prune: alpha must be >= 0");
  return path.snapshots.at(path.steps.at(path.step_for(alpha)).snapshot);
}

DecisionTree prune(const DecisionTree& tree, double alpha) {
  if (!(alpha >= 0.0)) throw InvalidArgument("prune: alpha must be >= 0");
  if (alpha == 0.0) return tree;
  return prune(pruning_path(tree), alpha);
}

} // namespace ride::tree
