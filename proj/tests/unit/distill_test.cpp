#include "fixtures.hpp"
#include "ride/distill.hpp"
#include "ride/error.hpp"

#include <gtest/gtest.h>

namespace {

using namespace ride;
using rae::FlowEmbedding;

std::vector<FlowEmbedding> embeddings_of(const fixture::Dataset& d) {
  std::vector<FlowEmbedding> out;
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) {
    FlowEmbedding e;
    e.values.assign(d.x.col(j).data(), d.x.col(j).data() + d.x.rows());
    e.flow_id = "f" + std::to_string(j);
    e.label = d.y[static_cast<std::size_t>(j)];
    out.push_back(std::move(e));
  }
  return out;
}

clf::ClassifierModel trained_teacher(std::span<const FlowEmbedding> data, std::size_t k) {
  nn::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 1e-2;
  cfg.seed = 2;
  return clf::train_classifier(data, k, cfg, {.hidden = 16});
}

TEST(TeacherDataset, ZeroTeacherIsConstant) {
  const auto data = embeddings_of(fixture::gaussian_blobs(1, 20, 3, 2, 3.0));
  const auto ds = distill::generate_teacher_dataset(clf::zero_classifier(3, 2, 4), data);
  ASSERT_EQ(ds.teacher_labels.size(), data.size());
  for (int y : ds.teacher_labels) EXPECT_EQ(y, 0);
}

TEST(TeacherDataset, PreservesOrderAndTruth) {
  const auto data = embeddings_of(fixture::gaussian_blobs(2, 30, 3, 3, 2.0));
  const auto teacher = trained_teacher(data, 3);
  const auto ds = distill::generate_teacher_dataset(teacher, data);
  ASSERT_EQ(ds.features.cols(), static_cast<Eigen::Index>(data.size()));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(ds.truth_labels[i], data[i].label);
    EXPECT_EQ(ds.teacher_labels[i], teacher.predict_label(data[i].values));
    for (std::size_t f = 0; f < 3; ++f)
      EXPECT_EQ(ds.features(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i)), data[i].values[f]);
    agree += ds.teacher_labels[i] == data[i].label;
  }
  EXPECT_DOUBLE_EQ(ds.teacher_accuracy(), static_cast<double>(agree) / static_cast<double>(data.size()));
  EXPECT_DOUBLE_EQ(ds.teacher_accuracy(), clf::evaluate(teacher, data, 3).accuracy);
}

TEST(Distill, UnlimitedTreeReproducesTeacherOnItsTrainingSet) {
  const auto data = embeddings_of(fixture::gaussian_blobs(3, 100, 4, 2, 2.0));
  const auto teacher = trained_teacher(data, 2);
  const auto tree = distill::distill_tree(distill::generate_teacher_dataset(teacher, data));
  EXPECT_EQ(distill::fidelity(tree, teacher, data), 1.0);
}

TEST(Fidelity, ConstantTreeMatchesTeacherMajorityRate) {
  const auto data = embeddings_of(fixture::gaussian_blobs(4, 50, 2, 2, 6.0));
  const auto teacher = trained_teacher(data, 2);
  const auto ds = distill::generate_teacher_dataset(teacher, data);
  const auto leaf = tree::prune(distill::distill_tree(ds), 1e9);
  ASSERT_EQ(leaf.n_nodes(), 1u);
  std::size_t majority = 0;
  for (int y : ds.teacher_labels) majority += y == leaf.node(0).predicted_class;
  EXPECT_DOUBLE_EQ(distill::fidelity(leaf, teacher, data),
                   static_cast<double>(majority) / static_cast<double>(data.size()));
  EXPECT_NEAR(distill::fidelity(leaf, teacher, data), 0.5, 0.05);
}

TEST(FeatureMatrix, RaggedInputIsAnError) {
  std::vector<FlowEmbedding> data(2);
  data[0].values = {1, 2};
  data[1].values = {1};
  EXPECT_THROW(distill::feature_matrix(data), DimensionError);
}

} // namespace
