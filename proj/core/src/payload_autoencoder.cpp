#include "ride/payload_autoencoder.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

namespace ride::ae {

namespace {

constexpr std::uint64_t kSubsampleSalt = 0xA5A5'5A5A'C3C3'3C3Cull;

void check_payload_dims(const AutoencoderBundle& bundle, const ingest::PayloadVector& p) {
  if (p.size() != bundle.n_p)
    throw DimensionError("payload has " + std::to_string(p.size()) + " bytes, autoencoder expects " +
                         std::to_string(bundle.n_p));
}

} // namespace

Eigen::MatrixXd payload_matrix(std::span<const ingest::PayloadVector> payloads) {
  if (payloads.empty()) return {};
  const std::size_t n_p = payloads.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n_p), static_cast<Eigen::Index>(payloads.size()));
  for (std::size_t j = 0; j < payloads.size(); ++j) {
    if (payloads[j].size() != n_p) throw DimensionError("payload batch has mixed lengths");
    for (std::size_t i = 0; i < n_p; ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(payloads[j].values[i]) / kByteScale;
  }
  return x;
}

AutoencoderBundle train_autoencoder(std::span<const ingest::PayloadVector> payloads,
                                    const AutoencoderOptions& options, const nn::TrainConfig& cfg) {
  if (payloads.empty()) throw InvalidArgument("train_autoencoder: empty payload batch");
  const std::size_t n_p = payloads.front().size();
  if (options.n_b < 1 || options.n_b >= n_p)
    throw InvalidArgument("train_autoencoder: need 1 <= n_b < n_p (n_b=" +
                          std::to_string(options.n_b) + ", n_p=" + std::to_string(n_p) + ")");
  if (options.h < 1) throw InvalidArgument("train_autoencoder: h must be >= 1");
  if (options.h < options.n_b)
    std::clog << "warning: autoencoder hidden width " << options.h << " is below bottleneck "
              << options.n_b << "\n";

  std::vector<ingest::PayloadVector> subsample;
  std::span<const ingest::PayloadVector> train_set = payloads;
  if (options.training_cap > 0 && payloads.size() > options.training_cap) {
    std::vector<std::size_t> idx(payloads.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed ^ kSubsampleSalt);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(options.training_cap);
    std::sort(idx.begin(), idx.end());
    subsample.reserve(idx.size());
    for (std::size_t i : idx) subsample.push_back(payloads[i]);
    train_set = subsample;
  }

  using nn::Activation;
  const std::size_t dims[] = {n_p, options.h, options.n_b, options.h, n_p};
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::relu,
                             Activation::sigmoid};
  nn::DenseNet stack = nn::DenseNet::random(dims, acts, cfg.weight_init_scale, cfg.seed);

  const Eigen::MatrixXd x = payload_matrix(train_set);
  nn::TrainResult trained = nn::train(std::move(stack), x, x, nn::Loss::mse, cfg);

  AutoencoderBundle bundle;
  std::tie(bundle.encoder, bundle.decoder) = trained.net.split(2);
  bundle.n_p = n_p;
  bundle.n_b = options.n_b;
  bundle.h = options.h;
  bundle.seed = cfg.seed;
  bundle.final_train_mse = nn::loss_mse(nn::forward_batch(trained.net, x), x);
  return bundle;
}

AutoencoderBundle zero_autoencoder(std::size_t n_p, std::size_t n_b, std::size_t h) {
  using nn::Activation;
  const std::size_t enc_dims[] = {n_p, h, n_b};
  const std::size_t dec_dims[] = {n_b, h, n_p};
  const Activation enc_acts[] = {Activation::relu, Activation::sigmoid};
  const Activation dec_acts[] = {Activation::relu, Activation::sigmoid};
  AutoencoderBundle b;
  b.encoder = nn::DenseNet::zeros(enc_dims, enc_acts);
  b.decoder = nn::DenseNet::zeros(dec_dims, dec_acts);
  b.n_p = n_p;
  b.n_b = n_b;
  b.h = h;
  return b;
}

std::vector<double> encode(const AutoencoderBundle& bundle, const ingest::PayloadVector& payload) {
  check_payload_dims(bundle, payload);
  const Eigen::MatrixXd z =
      nn::forward_batch(bundle.encoder, payload_matrix(std::span(&payload, 1)));
  return {z.data(), z.data() + z.size()};
}

std::vector<std::vector<double>> encode_batch(const AutoencoderBundle& bundle,
                                              std::span<const ingest::PayloadVector> payloads) {
  std::vector<std::vector<double>> out;
  if (payloads.empty()) return out;
  for (const auto& p : payloads) check_payload_dims(bundle, p);
  const Eigen::MatrixXd z = nn::forward_batch(bundle.encoder, payload_matrix(payloads));
  out.reserve(payloads.size());
  for (Eigen::Index c = 0; c < z.cols(); ++c)
    out.emplace_back(z.col(c).data(), z.col(c).data() + z.rows());
  return out;
}

double reconstruction_error(const AutoencoderBundle& bundle,
                            std::span<const ingest::PayloadVector> payloads) {
  if (payloads.empty()) throw InvalidArgument("reconstruction_error: empty batch");
  for (const auto& p : payloads) check_payload_dims(bundle, p);
  const Eigen::MatrixXd x = payload_matrix(payloads);
  const Eigen::MatrixXd recon = nn::forward_batch(bundle.encoder.then(bundle.decoder), x);
  return nn::loss_mse(recon, x);
}

std::string to_json(const AutoencoderBundle& bundle) {
  detail::json j = {{"meta",
                     {{"n_p", bundle.n_p},
                      {"n_b", bundle.n_b},
                      {"h", bundle.h},
                      {"final_train_mse", bundle.final_train_mse},
                      {"seed", bundle.seed}}},
                    {"encoder", detail::net_to_json(bundle.encoder)},
                    {"decoder", detail::net_to_json(bundle.decoder)}};
  return j.dump();
}

AutoencoderBundle autoencoder_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "autoencoder json", [](const detail::json& j) {
    AutoencoderBundle b;
    const auto& meta = j.at("meta");
    b.n_p = meta.at("n_p").get<std::size_t>();
    b.n_b = meta.at("n_b").get<std::size_t>();
    b.h = meta.at("h").get<std::size_t>();
    b.final_train_mse = meta.at("final_train_mse").get<double>();
    b.seed = meta.at("seed").get<std::uint64_t>();
    b.encoder = detail::net_from_json(j.at("encoder"));
    b.decoder = detail::net_from_json(j.at("decoder"));
    if (b.encoder.input_dim() != b.n_p || b.encoder.output_dim() != b.n_b ||
        b.decoder.input_dim() != b.n_b || b.decoder.output_dim() != b.n_p)
      throw ParseError("autoencoder json: network dims disagree with metadata");
    return b;
  });
}

} // namespace ride::ae
