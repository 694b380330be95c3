#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Dense feed-forward networks with hand-written backpropagation.
///
/// Batches are column-major: an `in x n` matrix holds n samples, one per column.
/// All arithmetic is double precision so results can be compared against
/// finite-difference and closed-form oracles.
namespace ride::nn {

enum class Activation { relu, sigmoid, tanh, identity, softmax };

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view name);

struct Layer {
  Eigen::MatrixXd weights; ///< out x in
  Eigen::VectorXd bias;    ///< out
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }
};

class DenseNet {
public:
  DenseNet() = default;
  /// Throws DimensionError / InvalidArgument when the layers violate the net invariants.
  explicit DenseNet(std::vector<Layer> layers);

  /// Uniform init in [-s, s], s = init_scale / sqrt(fan_in); zero biases.
  static DenseNet random(std::span<const std::size_t> dims, std::span<const Activation> activations,
                         double init_scale, std::uint64_t seed);
  static DenseNet zeros(std::span<const std::size_t> dims, std::span<const Activation> activations);

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  std::size_t depth() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access for hand-set weights in tests and tools; call validate() afterwards.
  Layer& layer(std::size_t i) { return layers_.at(i); }

  /// Checks chaining, softmax placement, and finiteness.
  void validate() const;

  /// Concatenates two nets (this then `next`) into one stack.
  DenseNet then(const DenseNet& next) const;
  /// Splits layers [0, at) and [at, depth).
  std::pair<DenseNet, DenseNet> split(std::size_t at) const;

  friend bool operator==(const DenseNet& a, const DenseNet& b);

private:
  std::vector<Layer> layers_;
};

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x);
Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs);

enum class Loss { mse, cross_entropy };

/// Mean over samples (columns) of the squared L2 distance.
double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean negative log-likelihood of the true class; probabilities are clamped below at 1e-12.
double loss_cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels);

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t k);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void scale(double factor);
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Loss value for a batch. For cross-entropy `targets` is one-hot (K x n).
double evaluate_loss(const DenseNet& net, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, Loss loss);

LossAndGradients backprop(const DenseNet& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, Loss loss);

enum class OptimizerKind { sgd, adam };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double weight_init_scale = 1.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamParams adam;

  /// Throws InvalidArgument.
  void validate() const;
};

struct TrainResult {
  DenseNet net;
  /// One entry per epoch: sample-weighted mean of the minibatch losses seen during the epoch,
  /// each measured before its update.
  std::vector<double> loss_history;
};

/// Minibatch training. Deterministic for a fixed seed: the shuffle stream is derived from
/// cfg.seed. Throws TrainingDiverged when a minibatch loss is not finite.
TrainResult train(DenseNet net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  Loss loss, const TrainConfig& cfg);

inline constexpr double kGradientCheckStep = 1e-5;

/// Max over parameters of |g_a - g_n| / max(1e-8, |g_a| + |g_n|), with g_n from central
/// differences.
double gradient_check(const DenseNet& net, Loss loss, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, const Gradients& analytic,
                      double step = kGradientCheckStep);
double gradient_check(const DenseNet& net, Loss loss, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, double step = kGradientCheckStep);

/// Layer dims, activation tags, row-major weights, and biases.
std::string to_json(const DenseNet& net);
DenseNet net_from_json(std::string_view text);

} // namespace ride::nn
