#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ride::ingest {

inline constexpr std::size_t kDefaultPayloadBytes = 1500;

enum class L4Kind : std::uint8_t { tcp, udp, other };

/// Transport protocol as seen in the IP header. `code` is the IANA protocol number.
struct Protocol {
  L4Kind kind = L4Kind::other;
  std::uint8_t code = 0;

  static Protocol from_code(std::uint8_t code) noexcept;
  std::string name() const;

  friend bool operator==(const Protocol&, const Protocol&) = default;
  friend auto operator<=>(const Protocol&, const Protocol&) = default;
};

/// IPv4 or IPv6 address. IPv4 occupies the first four bytes.
struct IpAddress {
  std::array<std::uint8_t, 16> bytes{};
  bool v6 = false;

  static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) noexcept;
  /// Accepts dotted-quad or RFC 4291 text. Throws ParseError.
  static IpAddress parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const IpAddress&, const IpAddress&) = default;
  friend auto operator<=>(const IpAddress&, const IpAddress&) = default;
};

struct RawPacket {
  double timestamp = 0.0;
  IpAddress src_addr;
  IpAddress dst_addr;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol;
  std::vector<std::uint8_t> payload;
};

/// Fixed-length byte view of one payload. Entries at index >= original_len are zero.
struct PayloadVector {
  std::vector<std::uint8_t> values;
  std::size_t original_len = 0;

  std::size_t size() const noexcept { return values.size(); }
};

/// Direction-free 5-tuple: endpoint `a` is the lexicographically smaller (addr, port).
struct FlowKey {
  IpAddress addr_a;
  std::uint16_t port_a = 0;
  IpAddress addr_b;
  std::uint16_t port_b = 0;
  std::uint8_t protocol = 0;

  static FlowKey canonical(const IpAddress& src, std::uint16_t sport, const IpAddress& dst,
                           std::uint16_t dport, std::uint8_t protocol) noexcept;
  static FlowKey of(const RawPacket& packet) noexcept;

  /// e.g. "10.0.0.1:1234-10.0.0.2:80/tcp"; IPv6 addresses are bracketed.
  std::string to_string() const;

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

inline constexpr int kUnlabeled = -1;

struct FlowRecord {
  FlowKey key;
  std::string flow_id;
  std::vector<RawPacket> packets;
  int label = kUnlabeled;
};

struct PcapParseResult {
  std::vector<RawPacket> packets;
  std::size_t skipped = 0;   ///< frames that were not IPv4/IPv6 carrying TCP or UDP
  std::size_t truncated = 0; ///< 1 when the capture ended mid-record
};

/// Parses a classic libpcap capture (either byte order, usec or nsec timestamps).
/// Throws ParseError for a malformed global header, pcapng input, or an unsupported link type.
PcapParseResult parse_pcap(std::span<const std::uint8_t> capture);

PayloadVector extract_payload_vector(const RawPacket& packet,
                                     std::size_t n_p = kDefaultPayloadBytes);

/// Partitions packets by canonical 5-tuple. Flows come out in first-seen order and each
/// flow's packets are ordered by (timestamp, capture order).
std::vector<FlowRecord> group_flows(std::span<const RawPacket> packets);

// ---------------------------------------------------------------------------
// Ground truth

struct TruthRow {
  FlowKey key;
  std::string label;
};

/// Reads a truth CSV with a header row containing at least
/// src_ip, dst_ip, src_port, dst_port, protocol, label. Extra columns are ignored.
/// `protocol` may be a name (tcp/udp) or an IANA number.
std::vector<TruthRow> parse_truth_csv(std::string_view text);

enum class LabelMode { binary, multiclass };

/// Maps label strings to dense class ids. Benign labels ("benign", "normal", "0";
/// case-insensitive) always map to class 0.
class ClassMap {
public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names) : names_(std::move(names)) {}

  static ClassMap build(std::span<const TruthRow> truth, LabelMode mode);
  static bool is_benign(std::string_view label);

  int id_of(std::string_view label) const;
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

private:
  std::vector<std::string> names_;
  LabelMode mode_ = LabelMode::multiclass;
};

struct LabelResult {
  std::vector<FlowRecord> flows;
  std::size_t dropped = 0;
  ClassMap classes;
};

/// Attaches truth labels by canonical key. Unmatched flows are dropped and counted.
/// Throws InvalidArgument when two truth rows give different labels to one key.
LabelResult label_flows(std::vector<FlowRecord> flows, std::span<const TruthRow> truth,
                        LabelMode mode = LabelMode::binary);

} // namespace ride::ingest
