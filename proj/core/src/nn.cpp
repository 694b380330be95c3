#include "ride/nn.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ride::nn {

namespace {

constexpr std::uint64_t kShuffleStreamSalt = 0x9E3779B97F4A7C15ull;

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
  case Activation::relu:
    z = z.cwiseMax(0.0);
    break;
  case Activation::sigmoid:
    z = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    break;
  case Activation::tanh:
    z = z.array().tanh().matrix();
    break;
  case Activation::identity:
    break;
  case Activation::softmax:
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      auto col = z.col(c);
      const double m = col.maxCoeff();
      col = (col.array() - m).exp().matrix();
      col /= col.sum();
    }
    break;
  }
}

// dL/dZ given dL/dA and the activation output A.
Eigen::MatrixXd activation_backward(const Eigen::MatrixXd& d_out, const Eigen::MatrixXd& out,
                                    Activation act) {
  switch (act) {
  case Activation::relu:
    return d_out.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
  case Activation::sigmoid:
    return d_out.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
  case Activation::tanh:
    return d_out.cwiseProduct((1.0 - out.array().square()).matrix());
  case Activation::identity:
    return d_out;
  case Activation::softmax: {
    Eigen::MatrixXd dz(d_out.rows(), d_out.cols());
    for (Eigen::Index c = 0; c < d_out.cols(); ++c) {
      const double dot = d_out.col(c).dot(out.col(c));
      dz.col(c) = out.col(c).cwiseProduct((d_out.col(c).array() - dot).matrix());
    }
    return dz;
  }
  }
  return d_out;
}

// Forward pass retaining every layer's output; acts[0] is the input.
std::vector<Eigen::MatrixXd> forward_all(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != net.input_dim())
    throw DimensionError("forward: input has " + std::to_string(inputs.rows()) +
                         " rows, layer 0 expects " + std::to_string(net.input_dim()));
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.depth() + 1);
  acts.push_back(inputs);
  for (const Layer& layer : net.layers()) {
    Eigen::MatrixXd z = layer.weights * acts.back();
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_targets(const DenseNet& net, const Eigen::MatrixXd& inputs,
                   const Eigen::MatrixXd& targets) {
  if (inputs.cols() == 0) throw InvalidArgument("empty batch");
  if (targets.cols() != inputs.cols() ||
      static_cast<std::size_t>(targets.rows()) != net.output_dim())
    throw DimensionError("targets are " + std::to_string(targets.rows()) + "x" +
                         std::to_string(targets.cols()) + ", expected " +
                         std::to_string(net.output_dim()) + "x" + std::to_string(inputs.cols()));
}

double cross_entropy_onehot(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& onehot) {
  const Eigen::MatrixXd logp = probs.cwiseMax(kProbabilityFloor).array().log().matrix();
  return -(onehot.cwiseProduct(logp)).sum() / static_cast<double>(probs.cols());
}

double batch_loss(const Eigen::MatrixXd& out, const Eigen::MatrixXd& targets, Loss loss) {
  return loss == Loss::mse ? loss_mse(out, targets) : cross_entropy_onehot(out, targets);
}

// Treats the net's parameters as one flat vector for finite differencing.
double& parameter_at(DenseNet& net, std::size_t layer, bool bias, Eigen::Index r, Eigen::Index c) {
  Layer& l = net.layer(layer);
  return bias ? l.bias(r) : l.weights(r, c);
}

} // namespace

std::string_view to_string(Activation a) noexcept {
  switch (a) {
  case Activation::relu:
    return "relu";
  case Activation::sigmoid:
    return "sigmoid";
  case Activation::tanh:
    return "tanh";
  case Activation::identity:
    return "identity";
  case Activation::softmax:
    return "softmax";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  for (Activation a : {Activation::relu, Activation::sigmoid, Activation::tanh,
                       Activation::identity, Activation::softmax}) {
    if (to_string(a) == name) return a;
  }
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

DenseNet DenseNet::zeros(std::span<const std::size_t> dims, std::span<const Activation> activations) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1)
    throw InvalidArgument("DenseNet: need n+1 dims for n activations");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims[i + 1]),
                                      static_cast<Eigen::Index>(dims[i]));
    l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims[i + 1]));
    l.activation = activations[i];
    layers.push_back(std::move(l));
  }
  return DenseNet(std::move(layers));
}

DenseNet DenseNet::random(std::span<const std::size_t> dims, std::span<const Activation> activations,
                          double init_scale, std::uint64_t seed) {
  DenseNet net = zeros(dims, activations);
  std::mt19937_64 rng(seed);
  for (Layer& l : net.layers_) {
    const double s = init_scale / std::sqrt(static_cast<double>(l.in_dim()));
    std::uniform_real_distribution<double> dist(-s, s);
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = dist(rng);
  }
  return net;
}

std::size_t DenseNet::input_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.front().in_dim();
}

std::size_t DenseNet::output_dim() const noexcept {
  return layers_.empty() ? 0 : layers_.back().out_dim();
}

std::size_t DenseNet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

void DenseNet::validate() const {
  if (layers_.empty()) throw InvalidArgument("DenseNet: no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0)
      throw DimensionError("layer " + std::to_string(i) + ": empty weight matrix");
    if (l.bias.size() != l.weights.rows())
      throw DimensionError("layer " + std::to_string(i) + ": bias length " +
                           std::to_string(l.bias.size()) + " != out dim " +
                           std::to_string(l.weights.rows()));
    if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
      throw DimensionError("layer " + std::to_string(i) + ": in dim " + std::to_string(l.in_dim()) +
                           " != previous out dim " + std::to_string(layers_[i - 1].out_dim()));
    if (l.activation == Activation::softmax && i + 1 != layers_.size())
      throw InvalidArgument("layer " + std::to_string(i) + ": softmax only allowed as final activation");
    if (!l.weights.allFinite() || !l.bias.allFinite())
      throw InvalidArgument("layer " + std::to_string(i) + ": non-finite parameters");
  }
}

DenseNet DenseNet::then(const DenseNet& next) const {
  std::vector<Layer> layers = layers_;
  layers.insert(layers.end(), next.layers_.begin(), next.layers_.end());
  return DenseNet(std::move(layers));
}

std::pair<DenseNet, DenseNet> DenseNet::split(std::size_t at) const {
  if (at == 0 || at >= layers_.size()) throw InvalidArgument("DenseNet::split: bad split point");
  const auto mid = layers_.begin() + static_cast<std::ptrdiff_t>(at);
  return {DenseNet(std::vector<Layer>(layers_.begin(), mid)),
          DenseNet(std::vector<Layer>(mid, layers_.end()))};
}

bool operator==(const DenseNet& a, const DenseNet& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const Layer& x = a.layers_[i];
    const Layer& y = b.layers_[i];
    if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.bias != y.bias)
      return false;
  }
  return true;
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x) {
  Eigen::MatrixXd out = forward_batch(net, x);
  return out.col(0);
}

Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != net.input_dim())
    throw DimensionError("forward: input has " + std::to_string(inputs.rows()) +
                         " rows, layer 0 expects " + std::to_string(net.input_dim()));
  Eigen::MatrixXd a = inputs;
  for (const Layer& layer : net.layers()) {
    Eigen::MatrixXd z = layer.weights * a;
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    a = std::move(z);
  }
  return a;
}

double loss_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.cols() == 0) throw InvalidArgument("loss_mse: empty batch");
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionError("loss_mse: shape mismatch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.cols());
}

Eigen::MatrixXd one_hot(std::span<const int> labels, std::size_t k) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                            static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw InvalidArgument("label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(k) + ")");
    y(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return y;
}

double loss_cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  if (probs.cols() == 0) throw InvalidArgument("loss_cross_entropy: empty batch");
  if (static_cast<std::size_t>(probs.cols()) != labels.size())
    throw DimensionError("loss_cross_entropy: batch size mismatch");
  return cross_entropy_onehot(probs, one_hot(labels, static_cast<std::size_t>(probs.rows())));
}

void Gradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

double evaluate_loss(const DenseNet& net, const Eigen::MatrixXd& inputs,
                     const Eigen::MatrixXd& targets, Loss loss) {
  check_targets(net, inputs, targets);
  return batch_loss(forward_batch(net, inputs), targets, loss);
}

LossAndGradients backprop(const DenseNet& net, const Eigen::MatrixXd& inputs,
                          const Eigen::MatrixXd& targets, Loss loss) {
  check_targets(net, inputs, targets);
  const std::vector<Eigen::MatrixXd> acts = forward_all(net, inputs);
  const Eigen::MatrixXd& out = acts.back();
  const double n = static_cast<double>(inputs.cols());
  const std::size_t depth = net.depth();

  LossAndGradients res;
  res.loss = batch_loss(out, targets, loss);
  res.grads.weights.resize(depth);
  res.grads.biases.resize(depth);

  const Activation last = net.layers().back().activation;
  Eigen::MatrixXd delta;
  if (loss == Loss::cross_entropy && last == Activation::softmax) {
    // Clamping only matters when a probability underflows; the fused form is exact otherwise.
    delta = (out - targets) / n;
  } else if (loss == Loss::cross_entropy) {
    const Eigen::MatrixXd d_out =
        -targets.cwiseQuotient(out.cwiseMax(kProbabilityFloor)) / n;
    delta = activation_backward(d_out, out, last);
  } else {
    delta = activation_backward(2.0 * (out - targets) / n, out, last);
  }

  for (std::size_t l = depth; l-- > 0;) {
    res.grads.weights[l] = delta * acts[l].transpose();
    res.grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      const Eigen::MatrixXd d_prev = net.layer(l).weights.transpose() * delta;
      delta = activation_backward(d_prev, acts[l], net.layer(l - 1).activation);
    }
  }
  return res;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("learning_rate must be finite and non-negative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(weight_init_scale > 0.0)) throw InvalidArgument("weight_init_scale must be positive");
  if (optimizer == OptimizerKind::adam &&
      (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0 ||
       adam.epsilon <= 0.0))
    throw InvalidArgument("adam parameters out of range");
}

TrainResult train(DenseNet net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                  Loss loss, const TrainConfig& cfg) {
  cfg.validate();
  check_targets(net, inputs, targets);

  const std::size_t n = static_cast<std::size_t>(inputs.cols());
  const std::size_t depth = net.depth();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleStreamSalt);

  Gradients m1, m2;
  for (const Layer& l : net.layers()) {
    m1.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    m1.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  m2 = m1;
  std::uint64_t step = 0;

  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_idx = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_idx) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Eigen::MatrixXd xb = inputs(Eigen::all, idx);
      const Eigen::MatrixXd yb = targets(Eigen::all, idx);
      LossAndGradients lg = backprop(net, xb, yb, loss);
      if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch, batch_idx);
      epoch_loss += lg.loss * static_cast<double>(stop - start);

      ++step;
      for (std::size_t l = 0; l < depth; ++l) {
        Layer& layer = net.layer(l);
        if (cfg.optimizer == OptimizerKind::sgd) {
          layer.weights -= cfg.learning_rate * lg.grads.weights[l];
          layer.bias -= cfg.learning_rate * lg.grads.biases[l];
          continue;
        }
        const AdamParams& a = cfg.adam;
        const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(step));
        m1.weights[l] = a.beta1 * m1.weights[l] + (1.0 - a.beta1) * lg.grads.weights[l];
        m2.weights[l] = a.beta2 * m2.weights[l] +
                        (1.0 - a.beta2) * lg.grads.weights[l].cwiseProduct(lg.grads.weights[l]);
        m1.biases[l] = a.beta1 * m1.biases[l] + (1.0 - a.beta1) * lg.grads.biases[l];
        m2.biases[l] = a.beta2 * m2.biases[l] +
                       (1.0 - a.beta2) * lg.grads.biases[l].cwiseProduct(lg.grads.biases[l]);
        if (cfg.learning_rate == 0.0) continue;
        layer.weights.array() -= cfg.learning_rate * (m1.weights[l].array() / c1) /
                                 ((m2.weights[l].array() / c2).sqrt() + a.epsilon);
        layer.bias.array() -= cfg.learning_rate * (m1.biases[l].array() / c1) /
                              ((m2.biases[l].array() / c2).sqrt() + a.epsilon);
      }
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  result.net = std::move(net);
  return result;
}

double gradient_check(const DenseNet& net, Loss loss, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, const Gradients& analytic, double step) {
  DenseNet probe = net;
  double worst = 0.0;
  auto check = [&](std::size_t l, bool bias, Eigen::Index r, Eigen::Index c, double g_a) {
    double& p = parameter_at(probe, l, bias, r, c);
    const double saved = p;
    p = saved + step;
    const double up = evaluate_loss(probe, inputs, targets, loss);
    p = saved - step;
    const double down = evaluate_loss(probe, inputs, targets, loss);
    p = saved;
    const double g_n = (up - down) / (2.0 * step);
    const double rel = std::abs(g_a - g_n) / std::max(1e-8, std::abs(g_a) + std::abs(g_n));
    worst = std::max(worst, rel);
  };
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
        check(l, false, r, c, analytic.weights.at(l)(r, c));
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
      check(l, true, r, 0, analytic.biases.at(l)(r));
  }
  return worst;
}

double gradient_check(const DenseNet& net, Loss loss, const Eigen::MatrixXd& inputs,
                      const Eigen::MatrixXd& targets, double step) {
  return gradient_check(net, loss, inputs, targets, backprop(net, inputs, targets, loss).grads, step);
}

std::string to_json(const DenseNet& net) { return detail::net_to_json(net).dump(); }

DenseNet net_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "model json",
                                     [](const detail::json& j) { return detail::net_from_json(j); });
}

} // namespace ride::nn

namespace ride::detail {

json net_to_json(const nn::DenseNet& net) {
  json layers = json::array();
  for (const nn::Layer& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", nn::to_string(l.activation)},
                      {"weights", std::move(w)},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"input_dim", net.input_dim()}, {"output_dim", net.output_dim()}, {"layers", layers}};
}

nn::DenseNet net_from_json(const json& j) {
  std::vector<nn::Layer> layers;
  for (const json& jl : j.at("layers")) {
    const auto in = jl.at("in").get<Eigen::Index>();
    const auto out = jl.at("out").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
      throw ParseError("model json: layer array sizes do not match dims");
    nn::Layer l;
    l.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    l.activation = nn::activation_from_string(jl.at("activation").get<std::string>());
    layers.push_back(std::move(l));
  }
  return nn::DenseNet(std::move(layers));
}

} // namespace ride::detail
