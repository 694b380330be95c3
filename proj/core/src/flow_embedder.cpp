#include "ride/flow_embedder.hpp"

#include "ride/error.hpp"

#include "json_detail.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace ride::rae {

namespace {

Eigen::VectorXd concat(std::span<const double> z1, std::span<const double> z2) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(z1.size() + z2.size()));
  std::copy(z1.begin(), z1.end(), x.data());
  std::copy(z2.begin(), z2.end(), x.data() + z1.size());
  return x;
}

void check_pair(const RaeBundle& rae, std::span<const double> z1, std::span<const double> z2) {
  if (z1.size() != rae.n_b || z2.size() != rae.n_b)
    throw DimensionError("rae pair has lengths " + std::to_string(z1.size()) + " and " +
                         std::to_string(z2.size()) + ", expected " + std::to_string(rae.n_b));
}

nn::DenseNet make_stack(std::size_t n_b, bool zero, double init_scale, std::uint64_t seed) {
  const std::size_t dims[] = {2 * n_b, n_b, 2 * n_b};
  const nn::Activation acts[] = {nn::Activation::tanh, nn::Activation::tanh};
  return zero ? nn::DenseNet::zeros(dims, acts) : nn::DenseNet::random(dims, acts, init_scale, seed);
}

RaeBundle from_stack(const nn::DenseNet& stack) {
  RaeBundle rae;
  std::tie(rae.composer, rae.reconstructor) = stack.split(1);
  rae.n_b = rae.composer.output_dim();
  return rae;
}

Eigen::MatrixXd pair_matrix(std::span<const RaePair> pairs, std::size_t n_b) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(2 * n_b), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    if (pairs[j].left.size() != n_b || pairs[j].right.size() != n_b)
      throw DimensionError("rae pair " + std::to_string(j) + " has inconsistent lengths");
    x.col(static_cast<Eigen::Index>(j)) = concat(pairs[j].left, pairs[j].right);
  }
  return x;
}

} // namespace

RaeBundle zero_rae(std::size_t n_b) { return from_stack(make_stack(n_b, true, 1.0, 0)); }

RaeBundle random_rae(std::size_t n_b, double init_scale, std::uint64_t seed) {
  return from_stack(make_stack(n_b, false, init_scale, seed));
}

std::vector<double> combine_pair(const RaeBundle& rae, std::span<const double> z1,
                                 std::span<const double> z2) {
  check_pair(rae, z1, z2);
  const Eigen::VectorXd out = nn::forward(rae.composer, concat(z1, z2));
  return {out.data(), out.data() + out.size()};
}

double reconstruction_error_pair(const RaeBundle& rae, std::span<const double> z1,
                                 std::span<const double> z2) {
  check_pair(rae, z1, z2);
  const Eigen::VectorXd x = concat(z1, z2);
  const Eigen::VectorXd recon = nn::forward(rae.reconstructor, nn::forward(rae.composer, x));
  return (x - recon).squaredNorm();
}

std::vector<RaePair> sample_training_pairs(std::span<const PacketSequence> flows, std::size_t cap,
                                           std::uint64_t seed) {
  if (flows.empty()) throw InvalidArgument("sample_training_pairs: no flows");
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t f = 0; f < flows.size(); ++f)
    for (std::size_t i = 0; i + 1 < flows[f].embeddings.size(); ++i) candidates.emplace_back(f, i);
  if (candidates.empty())
    throw InvalidArgument("sample_training_pairs: no flow has at least two packets");

  if (candidates.size() > cap) {
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `cap` slots become a uniform sample without replacement.
    for (std::size_t i = 0; i < cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
    }
    candidates.resize(cap);
    std::sort(candidates.begin(), candidates.end());
  }

  std::vector<RaePair> pairs;
  pairs.reserve(candidates.size());
  for (const auto& [f, i] : candidates)
    pairs.push_back({flows[f].embeddings[i], flows[f].embeddings[i + 1]});
  return pairs;
}

double mean_reconstruction_error(const RaeBundle& rae, std::span<const RaePair> pairs) {
  if (pairs.empty()) throw InvalidArgument("mean_reconstruction_error: empty batch");
  const Eigen::MatrixXd x = pair_matrix(pairs, rae.n_b);
  return nn::loss_mse(nn::forward_batch(rae.reconstructor, nn::forward_batch(rae.composer, x)), x);
}

RaeBundle train_rae(std::span<const RaePair> pairs, const nn::TrainConfig& cfg) {
  if (pairs.empty()) throw InvalidArgument("train_rae: no training pairs");
  const std::size_t n_b = pairs.front().left.size();
  if (n_b == 0) throw InvalidArgument("train_rae: empty embeddings");
  const Eigen::MatrixXd x = pair_matrix(pairs, n_b);
  nn::TrainResult trained = nn::train(make_stack(n_b, false, cfg.weight_init_scale, cfg.seed), x, x,
                                      nn::Loss::mse, cfg);
  RaeBundle rae = from_stack(trained.net);
  rae.loss_history = std::move(trained.loss_history);
  rae.final_recon_error = nn::loss_mse(nn::forward_batch(trained.net, x), x);
  return rae;
}

FlowEmbedding embed_flow(const RaeBundle& rae, std::span<const std::vector<double>> packet_embeddings,
                         std::string flow_id, int label, FoldOrder order, FoldStats* stats) {
  if (packet_embeddings.empty()) throw InvalidArgument("embed_flow: flow " + flow_id + " has no packets");
  for (const auto& z : packet_embeddings)
    if (z.size() != rae.n_b)
      throw DimensionError("embed_flow: packet embedding has " + std::to_string(z.size()) +
                           " values, expected " + std::to_string(rae.n_b));

  auto combine = [&](const std::vector<double>& a, const std::vector<double>& b) {
    if (stats) ++stats->combine_calls;
    return combine_pair(rae, a, b);
  };

  FlowEmbedding out;
  out.flow_id = std::move(flow_id);
  out.label = label;
  out.n_packets_folded = packet_embeddings.size();

  if (order == FoldOrder::sequential) {
    std::vector<double> acc = packet_embeddings.front();
    for (std::size_t i = 1; i < packet_embeddings.size(); ++i) acc = combine(acc, packet_embeddings[i]);
    out.values = std::move(acc);
    return out;
  }

  std::vector<std::vector<double>> nodes(packet_embeddings.begin(), packet_embeddings.end());
  while (nodes.size() > 1) {
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      const double err = reconstruction_error_pair(rae, nodes[i], nodes[i + 1]);
      if (err < best_err) {
        best_err = err;
        best = i;
      }
    }
    nodes[best] = combine(nodes[best], nodes[best + 1]);
    nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
  out.values = std::move(nodes.front());
  return out;
}

std::string to_json(const RaeBundle& rae) {
  detail::json j = {{"meta", {{"n_b", rae.n_b}, {"final_recon_error", rae.final_recon_error}}},
                    {"loss_history", rae.loss_history},
                    {"composer", detail::net_to_json(rae.composer)},
                    {"reconstructor", detail::net_to_json(rae.reconstructor)}};
  return j.dump();
}

RaeBundle rae_from_json(std::string_view text) {
  return detail::parse_json_or_throw(text, "rae json", [](const detail::json& j) {
    RaeBundle rae;
    rae.n_b = j.at("meta").at("n_b").get<std::size_t>();
    rae.final_recon_error = j.at("meta").at("final_recon_error").get<double>();
    rae.loss_history = j.value("loss_history", std::vector<double>{});
    rae.composer = detail::net_from_json(j.at("composer"));
    rae.reconstructor = detail::net_from_json(j.at("reconstructor"));
    if (rae.composer.input_dim() != 2 * rae.n_b || rae.composer.output_dim() != rae.n_b ||
        rae.reconstructor.input_dim() != rae.n_b || rae.reconstructor.output_dim() != 2 * rae.n_b)
      throw ParseError("rae json: network dims disagree with n_b");
    return rae;
  });
}

std::string write_embeddings_csv(std::span<const FlowEmbedding> embeddings) {
  std::string out = "flow_id,label";
  const std::size_t n_b = embeddings.empty() ? 0 : embeddings.front().values.size();
  for (std::size_t i = 1; i <= n_b; ++i) out += ",v_" + std::to_string(i);
  out += '\n';
  char buf[32];
  for (const FlowEmbedding& e : embeddings) {
    if (e.values.size() != n_b) throw DimensionError("write_embeddings_csv: mixed embedding lengths");
    out += e.flow_id;
    out += ',';
    out += std::to_string(e.label);
    for (double v : e.values) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<FlowEmbedding> read_embeddings_csv(std::string_view text) {
  std::vector<FlowEmbedding> out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("flow_id,label", 0) != 0)
    throw ParseError("embeddings csv: missing header");
  const auto n_cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != n_cols)
      throw ParseError("embeddings csv line " + std::to_string(line_no) + ": wrong column count");
    FlowEmbedding e;
    e.flow_id = fields[0];
    try {
      e.label = std::stoi(fields[1]);
      for (std::size_t i = 2; i < fields.size(); ++i) e.values.push_back(std::stod(fields[i]));
    } catch (const std::exception&) {
      throw ParseError("embeddings csv line " + std::to_string(line_no) + ": bad number");
    }
    out.push_back(std::move(e));
  }
  return out;
}

} // namespace ride::rae
