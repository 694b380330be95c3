#pragma once

#include "ride/classifier.hpp"
#include "ride/decision_tree.hpp"
#include "ride/flow_embedder.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

/// Teacher-student conversion of the MLP into a decision tree.
namespace ride::distill {

/// n_b x n matrix with one embedding per column. Throws DimensionError on ragged input.
Eigen::MatrixXd feature_matrix(std::span<const rae::FlowEmbedding> embeddings);

struct TeacherDataset {
  Eigen::MatrixXd features;       ///< n_b x n
  std::vector<int> teacher_labels; ///< argmax of the teacher per column
  std::vector<int> truth_labels;   ///< ground truth, kept for fidelity-vs-accuracy reports
  std::size_t k_classes = 0;

  /// Fraction of samples where the teacher label equals the ground truth.
  double teacher_accuracy() const;
};

TeacherDataset generate_teacher_dataset(const clf::ClassifierModel& teacher,
                                        std::span<const rae::FlowEmbedding> embeddings);

/// CART fit on the teacher's labels.
tree::DecisionTree distill_tree(const TeacherDataset& data, const tree::CartParams& params = {});

/// Fraction of embeddings where the tree agrees with the teacher's argmax.
double fidelity(const tree::DecisionTree& tree, const clf::ClassifierModel& teacher,
                std::span<const rae::FlowEmbedding> embeddings);

} // namespace ride::distill
