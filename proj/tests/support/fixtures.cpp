#include "fixtures.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ride::fixture {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::mt19937_64 rng(std::random_device{}());
  for (int attempt = 0; attempt < 100; ++attempt) {
    fs::path candidate = fs::temp_directory_path() / ("ride-test-" + std::to_string(rng()));
    if (fs::create_directory(candidate)) {
      path_ = std::move(candidate);
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k, int grid) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cell(0, std::max(grid, 1) - 1);
  Dataset out;
  out.k = k;
  out.x.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < out.x.cols(); ++j)
    for (Eigen::Index i = 0; i < out.x.rows(); ++i)
      out.x(i, j) = grid > 0 ? static_cast<double>(cell(rng)) : unit(rng);

  Eigen::VectorXd w(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = unit(rng) - 0.5;
  const double scale = grid > 0 ? static_cast<double>(grid) : 1.0;
  for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
    const double s = w.dot(out.x.col(j)) / scale;
    int label = static_cast<int>(std::floor((s + 0.5 * static_cast<double>(d)) * static_cast<double>(k) /
                                            static_cast<double>(d)));
    label = std::clamp(label, 0, static_cast<int>(k) - 1);
    if (unit(rng) < 0.15) label = static_cast<int>(rng() % k);
    out.y.push_back(label);
  }
  return out;
}

Dataset gaussian_blobs(std::uint64_t seed, std::size_t per_class, std::size_t d, std::size_t k,
                       double separation, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  Dataset out;
  out.k = k;
  out.x.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(per_class * k));
  Eigen::Index col = 0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++col) {
      for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
        const bool on_axis = static_cast<std::size_t>(i) == c % d;
        out.x(i, col) = (on_axis ? separation * static_cast<double>(c / d + 1) : 0.0) + noise(rng);
      }
      out.y.push_back(static_cast<int>(c));
    }
  }
  return out;
}

SmallTree small_random_tree(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::size_t n = 20 + rng() % 181;
    const std::size_t d = 1 + rng() % 5;
    const std::size_t k = 2 + rng() % 2;
    const int grid = rng() % 3 == 0 ? 6 : 0;
    tree::CartParams params;
    if (rng() % 2 == 0) params.max_depth = 3;
    params.min_samples_leaf = 1 + rng() % 8;
    if (rng() % 4 == 0) params.criterion = tree::Criterion::entropy;
    Dataset data = random_dataset(rng(), n, d, k, grid);
    tree::DecisionTree t = tree::cart_train(data.x, data.y, k, params);
    if (t.n_nodes() >= 3 && t.n_nodes() <= 15) return {std::move(data), std::move(t)};
  }
  throw std::runtime_error("small_random_tree: no tree in range");
}

// ---------------------------------------------------------------------------

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v, bool big_endian) {
  for (int i = 0; i < 4; ++i) {
    const int shift = big_endian ? 8 * (3 - i) : 8 * i;
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put16e(std::vector<std::uint8_t>& out, std::uint16_t v, bool big_endian) {
  if (big_endian) {
    put16(out, v);
  } else {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
}

void ethernet_header(std::vector<std::uint8_t>& out, std::uint16_t ethertype) {
  const std::uint8_t dst[6] = {0x02, 0, 0, 0, 0, 0x01};
  const std::uint8_t src[6] = {0x02, 0, 0, 0, 0, 0x02};
  out.insert(out.end(), dst, dst + 6);
  out.insert(out.end(), src, src + 6);
  put16(out, ethertype);
}

} // namespace

std::vector<std::uint8_t> ethernet_frame(const FrameSpec& spec) {
  std::vector<std::uint8_t> l4;
  put16(l4, spec.sport);
  put16(l4, spec.dport);
  if (spec.protocol == 6) {
    put16(l4, 0); // seq
    put16(l4, 1);
    put16(l4, 0); // ack
    put16(l4, 0);
    l4.push_back(5 << 4); // data offset: 5 words
    l4.push_back(0x18);   // PSH|ACK
    put16(l4, 65535);
    put16(l4, 0); // checksum left blank
    put16(l4, 0);
  } else {
    put16(l4, static_cast<std::uint16_t>(8 + spec.payload.size()));
    put16(l4, 0);
  }
  l4.insert(l4.end(), spec.payload.begin(), spec.payload.end());

  std::vector<std::uint8_t> out;
  if (!spec.src.v6) {
    ethernet_header(out, 0x0800);
    out.push_back(0x45);
    out.push_back(0);
    put16(out, static_cast<std::uint16_t>(20 + l4.size()));
    put16(out, 0);
    put16(out, 0x4000);
    out.push_back(64);
    out.push_back(spec.protocol);
    put16(out, 0);
    out.insert(out.end(), spec.src.bytes.begin(), spec.src.bytes.begin() + 4);
    out.insert(out.end(), spec.dst.bytes.begin(), spec.dst.bytes.begin() + 4);
  } else {
    ethernet_header(out, 0x86DD);
    out.push_back(0x60);
    out.push_back(0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(l4.size()));
    out.push_back(spec.protocol);
    out.push_back(64);
    out.insert(out.end(), spec.src.bytes.begin(), spec.src.bytes.end());
    out.insert(out.end(), spec.dst.bytes.begin(), spec.dst.bytes.end());
  }
  out.insert(out.end(), l4.begin(), l4.end());
  return out;
}

std::vector<std::uint8_t> arp_frame() {
  std::vector<std::uint8_t> out;
  ethernet_header(out, 0x0806);
  const std::uint8_t body[28] = {0, 1, 8, 0, 6, 4, 0, 1, 2, 0, 0, 0, 0, 2, 10, 0,
                                 0, 2, 0, 0, 0, 0, 0, 0, 10, 0, 0, 1};
  out.insert(out.end(), body, body + 28);
  return out;
}

std::vector<std::uint8_t> write_pcap(const std::vector<PcapRecord>& records, const PcapOptions& options) {
  const bool be = options.big_endian;
  std::vector<std::uint8_t> out;
  put32(out, options.nanosecond ? 0xA1B23C4Du : 0xA1B2C3D4u, be);
  put16e(out, 2, be);
  put16e(out, 4, be);
  put32(out, 0, be);
  put32(out, 0, be);
  put32(out, 65535, be);
  put32(out, options.link_type, be);
  for (const auto& r : records) {
    const auto sec = static_cast<std::uint32_t>(r.timestamp);
    const double frac = r.timestamp - static_cast<double>(sec);
    const auto sub = static_cast<std::uint32_t>(std::llround(frac * (options.nanosecond ? 1e9 : 1e6)));
    put32(out, sec, be);
    put32(out, sub, be);
    put32(out, static_cast<std::uint32_t>(r.frame.size()), be);
    put32(out, static_cast<std::uint32_t>(r.frame.size()), be);
    out.insert(out.end(), r.frame.begin(), r.frame.end());
  }
  return out;
}

std::string tiny_config_json(const fs::path& out_dir, std::uint64_t seed) {
  const nlohmann::json cfg = {
      {"seed", seed},
      {"out_dir", out_dir.string()},
      {"synth", {{"n_flows", 60}, {"min_packets", 2}, {"max_packets", 4}}},
      {"ingest", {{"n_p", 96}}},
      {"autoencoder", {{"n_b", 8}, {"hidden", 16}, {"train", {{"epochs", 3}}}}},
      {"rae", {{"train", {{"epochs", 3}}}}},
      {"classifier", {{"hidden", 16}, {"train", {{"epochs", 20}}}}},
      {"eval", {{"timing_repeats", 2}}},
  };
  return cfg.dump(2);
}

} // namespace ride::fixture
