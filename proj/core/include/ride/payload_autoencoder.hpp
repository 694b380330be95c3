#pragma once

#include "ride/nn.hpp"
#include "ride/packet_ingest.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ride::ae {

inline constexpr std::size_t kDefaultBottleneck = 100;
inline constexpr std::size_t kDefaultHidden = 512;
inline constexpr std::size_t kDefaultTrainingCap = 50'000;

/// Bytes enter every network scaled to [0, 1].
inline constexpr double kByteScale = 255.0;

struct CompressedEmbedding {
  std::vector<double> values;
  std::string flow_id;
  std::size_t packet_index = 0;
};

/// Encoder N_p -> h -> N_b and mirrored decoder N_b -> h -> N_p.
/// Hidden layers use relu, the bottleneck and the reconstruction use sigmoid.
struct AutoencoderBundle {
  nn::DenseNet encoder;
  nn::DenseNet decoder;
  std::size_t n_p = 0;
  std::size_t n_b = 0;
  std::size_t h = 0;
  double final_train_mse = 0.0;
  std::uint64_t seed = 0;
};

struct AutoencoderOptions {
  std::size_t n_b = kDefaultBottleneck;
  std::size_t h = kDefaultHidden;
  /// Above this many payloads, train on a seeded uniform subsample.
  std::size_t training_cap = kDefaultTrainingCap;
};

/// Scales payload bytes into an n_p x n matrix of [0, 1] values.
Eigen::MatrixXd payload_matrix(std::span<const ingest::PayloadVector> payloads);

/// Throws InvalidArgument for an empty batch or n_b >= n_p.
AutoencoderBundle train_autoencoder(std::span<const ingest::PayloadVector> payloads,
                                    const AutoencoderOptions& options, const nn::TrainConfig& cfg);

/// Builds a bundle with every weight at zero; useful as an untrained baseline.
AutoencoderBundle zero_autoencoder(std::size_t n_p, std::size_t n_b, std::size_t h);

std::vector<double> encode(const AutoencoderBundle& bundle, const ingest::PayloadVector& payload);

/// Encodes a batch; output order follows input order.
std::vector<std::vector<double>> encode_batch(const AutoencoderBundle& bundle,
                                              std::span<const ingest::PayloadVector> payloads);

/// Mean squared L2 distance between the scaled payload and decode(encode(payload)).
double reconstruction_error(const AutoencoderBundle& bundle,
                            std::span<const ingest::PayloadVector> payloads);

std::string to_json(const AutoencoderBundle& bundle);
AutoencoderBundle autoencoder_from_json(std::string_view text);

} // namespace ride::ae
