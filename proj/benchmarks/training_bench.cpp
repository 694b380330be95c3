#include "ride/decision_tree.hpp"
#include "ride/nn.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace ride;

Eigen::MatrixXd uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

void BM_AutoencoderBackprop(benchmark::State& state) {
  const std::size_t n_p = static_cast<std::size_t>(state.range(0));
  const std::vector<std::size_t> dims = {n_p, 256, 100, 256, n_p};
  const std::vector<nn::Activation> acts = {nn::Activation::relu, nn::Activation::sigmoid, nn::Activation::relu,
                                            nn::Activation::sigmoid};
  const auto net = nn::DenseNet::random(dims, acts, 1.0, 1);
  const Eigen::MatrixXd x = uniform(n_p, 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::backprop(net, x, x, nn::Loss::mse).loss);
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_AutoencoderBackprop)->Arg(256)->Arg(1500);

void BM_ForwardBatch(benchmark::State& state) {
  const std::vector<std::size_t> dims = {100, 100, 2};
  const std::vector<nn::Activation> acts = {nn::Activation::relu, nn::Activation::softmax};
  const auto net = nn::DenseNet::random(dims, acts, 1.0, 3);
  const Eigen::MatrixXd x = uniform(100, static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward_batch(net, x).data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBatch)->Arg(1)->Arg(600);

void BM_CartTrain(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Eigen::MatrixXd x = uniform(100, n, 5);
  std::vector<int> y;
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.push_back(x(0, j) * x(1, j) > 0.25 ? 1 : 0);
  for (auto _ : state) benchmark::DoNotOptimize(tree::cart_train(x, y, 2).n_nodes());
}
BENCHMARK(BM_CartTrain)->Arg(500)->Arg(2400);

void BM_PruningPath(benchmark::State& state) {
  const Eigen::MatrixXd x = uniform(10, 2000, 6);
  std::vector<int> y;
  std::mt19937_64 rng(7);
  for (Eigen::Index j = 0; j < x.cols(); ++j) y.push_back((x(0, j) > 0.5) ^ (rng() % 10 == 0) ? 1 : 0);
  const auto t = tree::cart_train(x, y, 2);
  for (auto _ : state) benchmark::DoNotOptimize(tree::pruning_path(t).steps.size());
}
BENCHMARK(BM_PruningPath);

} // namespace
