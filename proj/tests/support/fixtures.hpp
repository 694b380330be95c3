#pragma once

#include "ride/decision_tree.hpp"
#include "ride/packet_ingest.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ride::fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

struct Dataset {
  Eigen::MatrixXd x; ///< features x samples
  std::vector<int> y;
  std::size_t k = 2;
};

/// Uniform features in [0, 1) with labels drawn from a random linear rule plus label noise.
/// With grid > 0 features take integer values in [0, grid) so ties are common.
Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t k, int grid = 0);

/// k isotropic Gaussian blobs with centers `separation` apart along successive axes.
Dataset gaussian_blobs(std::uint64_t seed, std::size_t per_class, std::size_t d, std::size_t k,
                       double separation, double spread = 1.0);

/// A CART tree with 3..15 nodes grown on a random dataset of at most 200 samples and
/// 5 features. Different seeds give differently shaped trees, balanced and not.
struct SmallTree {
  Dataset data;
  tree::DecisionTree tree;
};
SmallTree small_random_tree(std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hand-built captures

struct FrameSpec {
  ingest::IpAddress src;
  ingest::IpAddress dst;
  std::uint16_t sport = 0;
  std::uint16_t dport = 0;
  std::uint8_t protocol = 6; ///< 6 = TCP, 17 = UDP
  std::vector<std::uint8_t> payload;
};

/// Ethernet frame carrying IPv4 or IPv6 (chosen by the address family) and TCP or UDP.
std::vector<std::uint8_t> ethernet_frame(const FrameSpec& spec);
/// Ethernet frame carrying an ARP request.
std::vector<std::uint8_t> arp_frame();

struct PcapRecord {
  double timestamp = 0.0;
  std::vector<std::uint8_t> frame;
};

struct PcapOptions {
  bool big_endian = false;
  bool nanosecond = false;
  std::uint32_t link_type = 1;
};

std::vector<std::uint8_t> write_pcap(const std::vector<PcapRecord>& records, const PcapOptions& options = {});

// ---------------------------------------------------------------------------
// Pipeline

/// Small, fast pipeline configuration (tiny fixture, short training) as JSON text.
std::string tiny_config_json(const std::filesystem::path& out_dir, std::uint64_t seed = 1);

} // namespace ride::fixture
