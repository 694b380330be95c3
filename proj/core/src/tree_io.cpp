#include "ride/decision_tree.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <cstdio>

namespace ride::tree {

std::string to_json(const DecisionTree& tree) {
  detail::json nodes = detail::json::array();
  for (std::size_t i = 0; i < tree.n_nodes(); ++i) {
    const Node& n = tree.node(i);
    detail::json jn = {{"id", i},
                       {"class_counts", n.class_counts},
                       {"predicted_class", n.predicted_class},
                       {"n_samples", n.n_samples},
                       {"impurity", n.impurity}};
    if (!n.is_leaf()) {
      jn["feature"] = n.feature;
      jn["threshold"] = n.threshold;
      jn["left"] = n.left;
      jn["right"] = n.right;
    }
    nodes.push_back(std::move(jn));
  }
  detail::json j = {{"k_classes", tree.k_classes()},
                    {"n_features", tree.n_features()},
                    {"total_samples", tree.total_samples()},
                    {"criterion", to_string(tree.criterion())},
                    {"n_nodes", tree.n_nodes()},
                    {"nodes", std::move(nodes)}};
  return j.dump(1);
}

DecisionTree tree_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "tree json", [](const detail::json& j) {
    std::vector<Node> nodes;
    for (const auto& jn : j.at("nodes")) {
      if (jn.at("id").get<std::size_t>() != nodes.size())
        throw ParseError("tree json: node ids must be 0..n-1 in order");
      Node n;
      n.class_counts = jn.at("class_counts").get<std::vector<std::size_t>>();
      n.predicted_class = jn.at("predicted_class").get<int>();
      n.n_samples = jn.at("n_samples").get<std::size_t>();
      n.impurity = jn.at("impurity").get<double>();
      if (jn.contains("feature")) {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
      }
      nodes.push_back(std::move(n));
    }
    try {
      return DecisionTree(std::move(nodes), j.at("k_classes").get<std::size_t>(),
                          j.at("n_features").get<std::size_t>(),
                          j.at("total_samples").get<std::size_t>(),
                          criterion_from_string(j.at("criterion").get<std::string>()));
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("tree json: ") + e.what());
    }
  });
}

std::string to_rules_text(const DecisionTree& tree, std::span<const std::string> class_names) {
  std::string out;
  char buf[64];
  auto class_label = [&](int c) {
    return static_cast<std::size_t>(c) < class_names.size() ? class_names[static_cast<std::size_t>(c)]
                                                            : "class " + std::to_string(c);
  };
  auto counts = [](const Node& n) {
    std::string s = "[";
    for (std::size_t i = 0; i < n.class_counts.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(n.class_counts[i]);
    }
    return s + "]";
  };
  auto emit = [&](auto&& self, std::size_t i, std::size_t indent) -> void {
    const Node& n = tree.node(i);
    const std::string pad(2 * indent, ' ');
    if (n.is_leaf()) {
      out += pad + "predict " + class_label(n.predicted_class) + "  # samples=" +
             std::to_string(n.n_samples) + " counts=" + counts(n) + "\n";
      return;
    }
    std::snprintf(buf, sizeof buf, "%.17g", n.threshold);
    out += pad + "if x[" + std::to_string(n.feature) + "] <= " + buf + ":\n";
    self(self, static_cast<std::size_t>(n.left), indent + 1);
    out += pad + "else:  # x[" + std::to_string(n.feature) + "] > " + buf + "\n";
    self(self, static_cast<std::size_t>(n.right), indent + 1);
  };
  emit(emit, 0, 0);
  return out;
}

} // namespace ride::tree
