#include "ride/classifier.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

namespace ride::clf {

namespace {

Eigen::MatrixXd embedding_matrix(std::span<const rae::FlowEmbedding> embeddings, std::size_t dim) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(embeddings.size()));
  for (std::size_t j = 0; j < embeddings.size(); ++j) {
    if (embeddings[j].values.size() != dim)
      throw DimensionError("embedding " + embeddings[j].flow_id + " has " +
                           std::to_string(embeddings[j].values.size()) + " values, expected " +
                           std::to_string(dim));
    x.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(embeddings[j].values.data(), static_cast<Eigen::Index>(dim));
  }
  return x;
}

nn::DenseNet classifier_net(std::size_t n_b, std::size_t hidden, std::size_t k, bool zero,
                            double scale, std::uint64_t seed) {
  const std::size_t dims[] = {n_b, hidden, k};
  const nn::Activation acts[] = {nn::Activation::relu, nn::Activation::softmax};
  return zero ? nn::DenseNet::zeros(dims, acts) : nn::DenseNet::random(dims, acts, scale, seed);
}

std::vector<std::string> default_names(std::size_t k, std::vector<std::string> names) {
  if (names.size() == k) return names;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(k == 2 ? (i == 0 ? "benign" : "attack")
                                                             : "class_" + std::to_string(i));
  return out;
}

int argmax(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < p.size(); ++i)
    if (p(i) > p(best)) best = i;
  return static_cast<int>(best);
}

double f1_of(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

} // namespace

std::vector<double> ClassifierModel::predict_proba(std::span<const double> x) const {
  if (x.size() != net.input_dim())
    throw DimensionError("classifier expects " + std::to_string(net.input_dim()) + " features, got " +
                         std::to_string(x.size()));
  const Eigen::VectorXd p = nn::forward(net, Eigen::Map<const Eigen::VectorXd>(
                                                 x.data(), static_cast<Eigen::Index>(x.size())));
  return {p.data(), p.data() + p.size()};
}

int ClassifierModel::predict_label(std::span<const double> x) const {
  const std::vector<double> p = predict_proba(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

ClassifierModel train_classifier(std::span<const rae::FlowEmbedding> embeddings, std::size_t k,
                                 const nn::TrainConfig& cfg, const ClassifierOptions& options,
                                 std::vector<std::string> class_names) {
  if (embeddings.empty()) throw InvalidArgument("train_classifier: empty batch");
  if (k < 2) throw InvalidArgument("train_classifier: need k >= 2");
  std::set<int> present;
  std::vector<int> labels;
  for (const auto& e : embeddings) {
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= k)
      throw InvalidArgument("train_classifier: label " + std::to_string(e.label) + " outside [0, " +
                            std::to_string(k) + ")");
    present.insert(e.label);
    labels.push_back(e.label);
  }
  if (present.size() < 2) throw InvalidArgument("train_classifier: training data has a single class");

  const std::size_t n_b = embeddings.front().values.size();
  const Eigen::MatrixXd x = embedding_matrix(embeddings, n_b);
  nn::TrainResult trained =
      nn::train(classifier_net(n_b, options.hidden, k, false, cfg.weight_init_scale, cfg.seed), x,
                nn::one_hot(labels, k), nn::Loss::cross_entropy, cfg);
  ClassifierModel model;
  model.net = std::move(trained.net);
  model.k_classes = k;
  model.class_names = default_names(k, std::move(class_names));
  return model;
}

ClassifierModel zero_classifier(std::size_t n_b, std::size_t k, std::size_t hidden) {
  ClassifierModel model;
  model.net = classifier_net(n_b, hidden, k, true, 1.0, 0);
  model.k_classes = k;
  model.class_names = default_names(k, {});
  return model;
}

Eigen::MatrixXd predict_proba_batch(const ClassifierModel& model,
                                    std::span<const rae::FlowEmbedding> embeddings) {
  if (embeddings.empty()) return Eigen::MatrixXd(static_cast<Eigen::Index>(model.k_classes), 0);
  return nn::forward_batch(model.net, embedding_matrix(embeddings, model.net.input_dim()));
}

std::vector<int> predict_labels(const ClassifierModel& model,
                                std::span<const rae::FlowEmbedding> embeddings) {
  const Eigen::MatrixXd p = predict_proba_batch(model, embeddings);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p.cols()));
  for (Eigen::Index c = 0; c < p.cols(); ++c) out.push_back(argmax(p.col(c)));
  return out;
}

MetricsReport metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                       std::size_t k) {
  if (truth.size() != predicted.size()) throw DimensionError("metrics: truth/prediction size mismatch");
  if (truth.empty()) throw InvalidArgument("metrics: empty evaluation set");
  MetricsReport r;
  r.k = k;
  r.n_samples = truth.size();
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= k ||
        static_cast<std::size_t>(predicted[i]) >= k)
      throw InvalidArgument("metrics: class id outside [0, " + std::to_string(k) + ")");
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  auto class_f1 = [&](std::size_t c) {
    std::size_t tp = r.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += r.confusion[o][c];
      fn += r.confusion[c][o];
    }
    return f1_of(tp, fp, fn);
  };
  if (k == 2) {
    r.f1 = class_f1(1);
  } else {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t support = 0, predicted_c = 0;
      for (std::size_t o = 0; o < k; ++o) {
        support += r.confusion[c][o];
        predicted_c += r.confusion[o][c];
      }
      if (support == 0 && predicted_c == 0) continue;
      sum += class_f1(c);
      ++used;
    }
    r.f1 = used == 0 ? 1.0 : sum / static_cast<double>(used);
  }
  return r;
}

std::string MetricsReport::to_json() const {
  detail::json j = {{"k", k},
                    {"n_samples", n_samples},
                    {"accuracy", accuracy},
                    {"f1", f1},
                    {"confusion", confusion},
                    {"inference_time_s", inference_time_s}};
  return j.dump();
}

std::string MetricsReport::csv_header() { return "model,n_samples,accuracy,f1,inference_time_s"; }

std::string MetricsReport::csv_row(const std::string& model_name) const {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,%.17g", n_samples, accuracy, f1, inference_time_s);
  return model_name + buf;
}

SplitIndices stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw InvalidArgument("stratified_split: test_fraction must lie in [0, 1]");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  SplitIndices split;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(idx.size())));
    split.test.insert(split.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::string to_json(const ClassifierModel& model) {
  detail::json j = {{"k_classes", model.k_classes},
                    {"class_names", model.class_names},
                    {"net", detail::net_to_json(model.net)}};
  return j.dump();
}

ClassifierModel classifier_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "classifier json", [](const detail::json& j) {
    ClassifierModel m;
    m.k_classes = j.at("k_classes").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.net = detail::net_from_json(j.at("net"));
    if (m.net.output_dim() != m.k_classes ||
        m.net.layers().back().activation != nn::Activation::softmax)
      throw ParseError("classifier json: output layer must be softmax over k_classes");
    return m;
  });
}

} // namespace ride::clf
