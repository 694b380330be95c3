#pragma once

#include "ride/nn.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// Recursive autoencoder that folds a flow's packet embeddings into one vector.
namespace ride::rae {

inline constexpr std::size_t kDefaultPairCap = 20'000;

struct RaePair {
  std::vector<double> left;
  std::vector<double> right;
};

/// composer: 2*n_b -> n_b (tanh); reconstructor: n_b -> 2*n_b (tanh).
/// The reconstructor decodes from the composed vector, not from the concatenated inputs.
struct RaeBundle {
  nn::DenseNet composer;
  nn::DenseNet reconstructor;
  std::size_t n_b = 0;
  double final_recon_error = 0.0;
  std::vector<double> loss_history;
};

struct FlowEmbedding {
  std::vector<double> values;
  std::string flow_id;
  std::size_t n_packets_folded = 0;
  int label = -1;
};

/// A flow's packet embeddings in timestamp order.
struct PacketSequence {
  std::string flow_id;
  int label = -1;
  std::vector<std::vector<double>> embeddings;
};

enum class FoldOrder {
  sequential,       ///< acc = z1; acc = combine(acc, z_i) for i = 2..N
  greedy_min_error, ///< repeatedly merge the adjacent pair with the smallest reconstruction error
};

struct FoldStats {
  std::size_t combine_calls = 0;
};

RaeBundle zero_rae(std::size_t n_b);
RaeBundle random_rae(std::size_t n_b, double init_scale, std::uint64_t seed);

std::vector<double> combine_pair(const RaeBundle& rae, std::span<const double> z1,
                                 std::span<const double> z2);

/// ||[z1;z2] - reconstruct(combine(z1, z2))||^2
double reconstruction_error_pair(const RaeBundle& rae, std::span<const double> z1,
                                 std::span<const double> z2);

/// Samples adjacent in-flow pairs uniformly without replacement, up to `cap`.
/// Pairs come out in (flow, position) order. Throws InvalidArgument when no flow has two packets.
std::vector<RaePair> sample_training_pairs(std::span<const PacketSequence> flows, std::size_t cap,
                                           std::uint64_t seed);

/// Trains composer + reconstructor jointly on the pair reconstruction objective.
RaeBundle train_rae(std::span<const RaePair> pairs, const nn::TrainConfig& cfg);

/// Mean pair reconstruction error over a batch.
double mean_reconstruction_error(const RaeBundle& rae, std::span<const RaePair> pairs);

/// Folds N >= 1 packet embeddings with exactly N - 1 combine_pair calls.
FlowEmbedding embed_flow(const RaeBundle& rae, std::span<const std::vector<double>> packet_embeddings,
                         std::string flow_id, int label, FoldOrder order = FoldOrder::sequential,
                         FoldStats* stats = nullptr);

std::string to_json(const RaeBundle& rae);
RaeBundle rae_from_json(std::string_view text);

/// CSV with header flow_id,label,v_1..v_{N_b}; values use 17 significant digits.
/// n_packets_folded is not part of the format and reads back as 0.
std::string write_embeddings_csv(std::span<const FlowEmbedding> embeddings);
std::vector<FlowEmbedding> read_embeddings_csv(std::string_view text);

} // namespace ride::rae
