#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

/// Deterministic labeled traffic for tests and desk-scale experiments.
namespace ride::synth {

enum class MotifMode {
  none,
  per_packet, ///< each packet that carries a motif picks one at random
  per_flow,   ///< one motif is drawn per flow and reused by every packet
  alternate,  ///< packets cycle through all motifs from a random starting point
};

std::string_view to_string(MotifMode m) noexcept;
MotifMode motif_mode_from_string(std::string_view name);

struct ClassProfile {
  std::string name;
  /// Probability that a packet's filler bytes are text-like (letters, digits, spaces);
  /// otherwise they are uniform random bytes.
  double text_fraction = 1.0;
  std::size_t min_len = 200;
  std::size_t max_len = 1200;
  std::vector<std::vector<std::uint8_t>> motifs;
  MotifMode motif_mode = MotifMode::none;
  double motif_prob = 1.0;      ///< chance a packet carries a motif (per_packet mode)
  std::size_t max_offset = 64;  ///< motif start is uniform in [0, max_offset]
  double noise_rate = 0.0;      ///< each motif byte is replaced by a random byte with this chance
};

struct TrafficSpec {
  std::size_t n_flows = 400;
  std::size_t min_packets = 2;
  std::size_t max_packets = 8;
  std::vector<ClassProfile> classes;
  std::vector<double> class_mix;
  double udp_fraction = 0.2;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument.
  void validate() const;
};

struct GeneratedTraffic {
  std::vector<std::uint8_t> pcap; ///< classic pcap, microsecond timestamps, little-endian
  std::string truth_csv;          ///< src_ip,dst_ip,src_port,dst_port,protocol,label
  std::vector<std::size_t> class_of_flow;
  std::size_t n_packets = 0;
};

/// Largest-remainder split of n into parts proportional to `mix`; leftover units go to the
/// largest fractional parts, lower index first on ties.
std::vector<std::size_t> allocate(std::size_t n, const std::vector<double>& mix);

GeneratedTraffic generate(const TrafficSpec& spec);

/// 400 flows of 2-8 packets, 70% benign text traffic and 30% attack traffic carrying noisy
/// binary motifs.
TrafficSpec default_fixture(std::uint64_t seed = 1);

/// Every packet carries one of two large motifs. Benign flows repeat a single motif; attack
/// flows alternate between both, so a lone packet says nothing about its class.
TrafficSpec motif_combination_fixture(std::uint64_t seed = 1);

} // namespace ride::synth
