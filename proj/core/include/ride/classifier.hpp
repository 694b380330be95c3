#pragma once

#include "ride/flow_embedder.hpp"
#include "ride/nn.hpp"

#include <chrono>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ride::clf {

inline constexpr std::size_t kDefaultHidden = 100;

/// Anything that maps a feature vector to a class id plugs into evaluate().
template <typename P>
concept LabelPredictor = requires(const P& p, std::span<const double> x) {
  { p.predict_label(x) } -> std::convertible_to<int>;
};

/// Teacher MLP: N_b -> hidden (relu) -> K (softmax).
struct ClassifierModel {
  nn::DenseNet net;
  std::size_t k_classes = 0;
  std::vector<std::string> class_names;

  std::vector<double> predict_proba(std::span<const double> x) const;
  /// argmax of predict_proba; ties resolve to the lowest class id.
  int predict_label(std::span<const double> x) const;
};

struct ClassifierOptions {
  std::size_t hidden = kDefaultHidden;
};

/// Throws InvalidArgument for an empty batch, labels outside [0, k), or a single class.
ClassifierModel train_classifier(std::span<const rae::FlowEmbedding> embeddings, std::size_t k,
                                 const nn::TrainConfig& cfg, const ClassifierOptions& options = {},
                                 std::vector<std::string> class_names = {});

/// Same architecture as train_classifier with every parameter at zero.
ClassifierModel zero_classifier(std::size_t n_b, std::size_t k,
                                std::size_t hidden = kDefaultHidden);

/// Batched predictions in input order.
std::vector<int> predict_labels(const ClassifierModel& model,
                                std::span<const rae::FlowEmbedding> embeddings);
Eigen::MatrixXd predict_proba_batch(const ClassifierModel& model,
                                    std::span<const rae::FlowEmbedding> embeddings);

struct MetricsReport {
  std::size_t k = 0;
  double accuracy = 0.0;
  /// Binary: F1 of class 1 (attack). Multi-class: macro average over classes that occur in
  /// the truth or the predictions.
  double f1 = 0.0;
  std::vector<std::vector<std::size_t>> confusion; ///< [truth][predicted]
  double inference_time_s = 0.0;                   ///< wall clock for the evaluated batch
  std::size_t n_samples = 0;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row(const std::string& model_name) const;
};

MetricsReport metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                       std::size_t k);

template <LabelPredictor P>
MetricsReport evaluate(const P& predictor, std::span<const rae::FlowEmbedding> samples, std::size_t k) {
  std::vector<int> truth;
  std::vector<int> predicted(samples.size());
  truth.reserve(samples.size());
  for (const auto& s : samples) truth.push_back(s.label);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < samples.size(); ++i)
    predicted[i] = static_cast<int>(predictor.predict_label(samples[i].values));
  const auto stop = std::chrono::steady_clock::now();
  MetricsReport report = metrics_from_predictions(truth, predicted, k);
  report.inference_time_s = std::chrono::duration<double>(stop - start).count();
  return report;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded per-class shuffle; round(test_fraction * n_c) of each class goes to test.
/// Both index lists are sorted ascending.
SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

std::string to_json(const ClassifierModel& model);
ClassifierModel classifier_from_json(std::string_view text);

} // namespace ride::clf
