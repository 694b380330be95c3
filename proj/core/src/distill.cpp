#include "ride/distill.hpp"

#include "ride/error.hpp"

namespace ride::distill {

Eigen::MatrixXd feature_matrix(std::span<const rae::FlowEmbedding> embeddings) {
  if (embeddings.empty()) return {};
  const std::size_t d = embeddings.front().values.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(embeddings.size()));
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    const auto& v = embeddings[j].values;
    if (v.size() != d)
      throw DimensionError("embedding " + embeddings[j].flow_id + " has " + std::to_string(v.size()) +
                           " values, expected " + std::to_string(d));
    x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(d));
  }
  return x;
}

double TeacherDataset::teacher_accuracy() const {
  if (truth_labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth_labels.size(); ++i) hits += teacher_labels[i] == truth_labels[i];
  return static_cast<double>(hits) / static_cast<double>(truth_labels.size());
}

TeacherDataset generate_teacher_dataset(const clf::ClassifierModel& teacher,
                                        std::span<const rae::FlowEmbedding> embeddings) {
  if (embeddings.empty()) throw InvalidArgument("generate_teacher_dataset: no embeddings");
  TeacherDataset out;
  out.features = feature_matrix(embeddings);
  out.teacher_labels = clf::predict_labels(teacher, embeddings);
  out.truth_labels.reserve(embeddings.size());
  for (const auto& e : embeddings) out.truth_labels.push_back(e.label);
  out.k_classes = teacher.k_classes;
  return out;
}

tree::DecisionTree distill_tree(const TeacherDataset& data, const tree::CartParams& params) {
  return tree::cart_train(data.features, data.teacher_labels, data.k_classes, params);
}

double fidelity(const tree::DecisionTree& tree, const clf::ClassifierModel& teacher,
                std::span<const rae::FlowEmbedding> embeddings) {
  if (embeddings.empty()) return 0.0;
  std::size_t agree = 0;
  for (const auto& e : embeddings) agree += tree.predict_label(e.values) == teacher.predict_label(e.values);
  return static_cast<double>(agree) / static_cast<double>(embeddings.size());
}

} // namespace ride::distill
