#include "ride/packet_ingest.hpp"

#include "ride/error.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

namespace ride::ingest {

namespace {

constexpr std::uint8_t kTcp = 6;
constexpr std::uint8_t kUdp = 17;

constexpr std::uint32_t kMagicUsec = 0xA1B2C3D4u;
constexpr std::uint32_t kMagicNsec = 0xA1B23C4Du;
constexpr std::uint32_t kMagicPcapng = 0x0A0D0D0Au;

enum class LinkType : std::uint32_t {
  null_loopback = 0,
  ethernet = 1,
  raw = 101,
  linux_sll = 113,
  ipv4 = 228,
  ipv6 = 229,
};

std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t swap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

struct HeaderFormat {
  bool swapped = false;
  bool nanos = false;
  LinkType link = LinkType::ethernet;

  std::uint32_t read32(const std::uint8_t* p) const {
    const std::uint32_t v = le32(p);
    return swapped ? swap32(v) : v;
  }
};

HeaderFormat read_global_header(std::span<const std::uint8_t> capture) {
  if (capture.size() < 24) throw ParseError("pcap: global header shorter than 24 bytes");
  const std::uint32_t magic = le32(capture.data());
  HeaderFormat fmt;
  if (magic == kMagicUsec || magic == kMagicNsec) {
    fmt.nanos = magic == kMagicNsec;
  } else if (swap32(magic) == kMagicUsec || swap32(magic) == kMagicNsec) {
    fmt.swapped = true;
    fmt.nanos = swap32(magic) == kMagicNsec;
  } else if (magic == kMagicPcapng) {
    throw ParseError("pcap: pcapng captures are not supported; convert to classic pcap");
  } else {
    std::ostringstream msg;
    msg << "pcap: bad magic number 0x" << std::hex << magic;
    throw ParseError(msg.str());
  }
  const std::uint32_t link = fmt.read32(capture.data() + 20) & 0x0FFFFFFFu;
  switch (static_cast<LinkType>(link)) {
  case LinkType::null_loopback:
  case LinkType::ethernet:
  case LinkType::raw:
  case LinkType::linux_sll:
  case LinkType::ipv4:
  case LinkType::ipv6:
    fmt.link = static_cast<LinkType>(link);
    break;
  default:
    throw ParseError("pcap: unsupported link type " + std::to_string(link));
  }
  return fmt;
}

// Returns the offset of the IP header inside the frame, or nullopt for non-IP frames.
std::optional<std::size_t> network_offset(std::span<const std::uint8_t> frame, LinkType link) {
  switch (link) {
  case LinkType::raw:
  case LinkType::ipv4:
  case LinkType::ipv6:
    return 0;
  case LinkType::null_loopback:
    if (frame.size() < 4) return std::nullopt;
    return 4;
  case LinkType::linux_sll: {
    if (frame.size() < 16) return std::nullopt;
    const std::uint16_t proto = be16(frame.data() + 14);
    if (proto != 0x0800 && proto != 0x86DD) return std::nullopt;
    return 16;
  }
  case LinkType::ethernet: {
    std::size_t off = 12;
    if (frame.size() < off + 2) return std::nullopt;
    std::uint16_t ethertype = be16(frame.data() + off);
    while (ethertype == 0x8100 || ethertype == 0x88A8) {
      off += 4;
      if (frame.size() < off + 2) return std::nullopt;
      ethertype = be16(frame.data() + off);
    }
    if (ethertype != 0x0800 && ethertype != 0x86DD) return std::nullopt;
    return off + 2;
  }
  }
  return std::nullopt;
}

// Decodes an IP datagram carrying TCP or UDP. Returns nullopt for anything else.
std::optional<RawPacket> decode_ip(std::span<const std::uint8_t> ip) {
  if (ip.empty()) return std::nullopt;
  RawPacket pkt;
  std::size_t l4_off = 0;
  std::size_t l3_end = ip.size();
  std::uint8_t proto = 0;

  const unsigned version = ip[0] >> 4;
  if (version == 4) {
    if (ip.size() < 20) return std::nullopt;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0F) * 4;
    const std::size_t total = be16(ip.data() + 2);
    if (ihl < 20 || ip.size() < ihl || total < ihl) return std::nullopt;
    const std::uint16_t frag = be16(ip.data() + 6);
    // Fragments other than an unfragmented datagram carry partial L4 data.
    if ((frag & 0x1FFF) != 0 || (frag & 0x2000) != 0) return std::nullopt;
    proto = ip[9];
    std::copy_n(ip.data() + 12, 4, pkt.src_addr.bytes.begin());
    std::copy_n(ip.data() + 16, 4, pkt.dst_addr.bytes.begin());
    l4_off = ihl;
    l3_end = std::min(ip.size(), total);
  } else if (version == 6) {
    if (ip.size() < 40) return std::nullopt;
    pkt.src_addr.v6 = pkt.dst_addr.v6 = true;
    std::copy_n(ip.data() + 8, 16, pkt.src_addr.bytes.begin());
    std::copy_n(ip.data() + 24, 16, pkt.dst_addr.bytes.begin());
    l3_end = std::min(ip.size(), std::size_t{40} + be16(ip.data() + 4));
    proto = ip[6];
    l4_off = 40;
    for (;;) {
      if (proto == 0 || proto == 43 || proto == 60) {
        if (l3_end < l4_off + 8) return std::nullopt;
        const std::size_t len = (static_cast<std::size_t>(ip[l4_off + 1]) + 1) * 8;
        proto = ip[l4_off];
        l4_off += len;
      } else if (proto == 51) {
        if (l3_end < l4_off + 8) return std::nullopt;
        const std::size_t len = (static_cast<std::size_t>(ip[l4_off + 1]) + 2) * 4;
        proto = ip[l4_off];
        l4_off += len;
      } else {
        break;
      }
    }
  } else {
    return std::nullopt;
  }

  if (proto != kTcp && proto != kUdp) return std::nullopt;
  pkt.protocol = Protocol::from_code(proto);
  if (l3_end < l4_off) return std::nullopt;
  const auto l4 = ip.subspan(l4_off, l3_end - l4_off);

  std::size_t payload_off = 0;
  std::size_t payload_end = l4.size();
  if (proto == kTcp) {
    if (l4.size() < 20) return std::nullopt;
    const std::size_t data_off = static_cast<std::size_t>(l4[12] >> 4) * 4;
    if (data_off < 20 || data_off > l4.size()) return std::nullopt;
    payload_off = data_off;
  } else {
    if (l4.size() < 8) return std::nullopt;
    const std::size_t udp_len = be16(l4.data() + 4);
    if (udp_len >= 8) payload_end = std::min(payload_end, udp_len);
    payload_off = 8;
  }
  pkt.src_port = be16(l4.data());
  pkt.dst_port = be16(l4.data() + 2);
  pkt.payload.assign(l4.begin() + static_cast<std::ptrdiff_t>(payload_off),
                     l4.begin() + static_cast<std::ptrdiff_t>(payload_end));
  return pkt;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// RFC 4180 field splitting: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::uint16_t parse_port(const std::string& s, std::size_t line_no) {
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value > 65535)
    throw ParseError("truth csv line " + std::to_string(line_no) + ": bad port '" + s + "'");
  return static_cast<std::uint16_t>(value);
}

std::uint8_t parse_protocol(const std::string& s, std::size_t line_no) {
  const std::string p = lower(s);
  if (p == "tcp") return kTcp;
  if (p == "udp") return kUdp;
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), value);
  if (ec != std::errc{} || ptr != p.data() + p.size() || value > 255)
    throw ParseError("truth csv line " + std::to_string(line_no) + ": bad protocol '" + s + "'");
  return static_cast<std::uint8_t>(value);
}

} // namespace

Protocol Protocol::from_code(std::uint8_t code) noexcept {
  Protocol p;
  p.code = code;
  p.kind = code == kTcp ? L4Kind::tcp : code == kUdp ? L4Kind::udp : L4Kind::other;
  return p;
}

std::string Protocol::name() const {
  switch (kind) {
  case L4Kind::tcp:
    return "tcp";
  case L4Kind::udp:
    return "udp";
  case L4Kind::other:
    break;
  }
  return std::to_string(code);
}

IpAddress IpAddress::v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) noexcept {
  IpAddress ip;
  ip.bytes[0] = a;
  ip.bytes[1] = b;
  ip.bytes[2] = c;
  ip.bytes[3] = d;
  return ip;
}

IpAddress IpAddress::parse(std::string_view text) {
  const std::string s(text);
  IpAddress ip;
  if (inet_pton(AF_INET, s.c_str(), ip.bytes.data()) == 1) return ip;
  if (inet_pton(AF_INET6, s.c_str(), ip.bytes.data()) == 1) {
    ip.v6 = true;
    return ip;
  }
  throw ParseError("invalid IP address '" + s + "'");
}

std::string IpAddress::to_string() const {
  char buf[INET6_ADDRSTRLEN] = {};
  inet_ntop(v6 ? AF_INET6 : AF_INET, bytes.data(), buf, sizeof buf);
  return buf;
}

FlowKey FlowKey::canonical(const IpAddress& src, std::uint16_t sport, const IpAddress& dst,
                           std::uint16_t dport, std::uint8_t protocol) noexcept {
  FlowKey key;
  key.protocol = protocol;
  if (std::tie(src, sport) <= std::tie(dst, dport)) {
    key.addr_a = src;
    key.port_a = sport;
    key.addr_b = dst;
    key.port_b = dport;
  } else {
    key.addr_a = dst;
    key.port_a = dport;
    key.addr_b = src;
    key.port_b = sport;
  }
  return key;
}

FlowKey FlowKey::of(const RawPacket& packet) noexcept {
  return canonical(packet.src_addr, packet.src_port, packet.dst_addr, packet.dst_port,
                   packet.protocol.code);
}

std::string FlowKey::to_string() const {
  auto endpoint = [](const IpAddress& ip, std::uint16_t port) {
    return ip.v6 ? "[" + ip.to_string() + "]:" + std::to_string(port)
                 : ip.to_string() + ":" + std::to_string(port);
  };
  return endpoint(addr_a, port_a) + "-" + endpoint(addr_b, port_b) + "/" +
         Protocol::from_code(protocol).name();
}

PcapParseResult parse_pcap(std::span<const std::uint8_t> capture) {
  const HeaderFormat fmt = read_global_header(capture);
  PcapParseResult result;
  std::size_t off = 24;
  while (off < capture.size()) {
    if (capture.size() - off < 16) {
      result.truncated = 1;
      break;
    }
    const std::uint8_t* rec = capture.data() + off;
    const std::uint32_t ts_sec = fmt.read32(rec);
    const std::uint32_t ts_frac = fmt.read32(rec + 4);
    const std::uint32_t incl_len = fmt.read32(rec + 8);
    off += 16;
    if (capture.size() - off < incl_len) {
      result.truncated = 1;
      break;
    }
    const auto frame = capture.subspan(off, incl_len);
    off += incl_len;

    const auto l3 = network_offset(frame, fmt.link);
    std::optional<RawPacket> pkt;
    if (l3) pkt = decode_ip(frame.subspan(*l3));
    if (!pkt) {
      ++result.skipped;
      continue;
    }
    pkt->timestamp = static_cast<double>(ts_sec) +
                     static_cast<double>(ts_frac) * (fmt.nanos ? 1e-9 : 1e-6);
    result.packets.push_back(std::move(*pkt));
  }
  return result;
}

PayloadVector extract_payload_vector(const RawPacket& packet, std::size_t n_p) {
  if (n_p == 0) throw InvalidArgument("extract_payload_vector: n_p must be >= 1");
  PayloadVector v;
  v.values.assign(n_p, 0);
  v.original_len = std::min(packet.payload.size(), n_p);
  std::copy_n(packet.payload.begin(), v.original_len, v.values.begin());
  return v;
}

std::vector<FlowRecord> group_flows(std::span<const RawPacket> packets) {
  std::vector<FlowRecord> flows;
  std::map<FlowKey, std::size_t> index;
  for (const RawPacket& p : packets) {
    const FlowKey key = FlowKey::of(p);
    auto [it, inserted] = index.try_emplace(key, flows.size());
    if (inserted) {
      FlowRecord rec;
      rec.key = key;
      rec.flow_id = key.to_string();
      flows.push_back(std::move(rec));
    }
    flows[it->second].packets.push_back(p);
  }
  for (FlowRecord& f : flows) {
    std::stable_sort(f.packets.begin(), f.packets.end(),
                     [](const RawPacket& a, const RawPacket& b) { return a.timestamp < b.timestamp; });
  }
  return flows;
}

std::vector<TruthRow> parse_truth_csv(std::string_view text) {
  std::vector<TruthRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::array<std::size_t, 6> col{};
  static constexpr std::array<std::string_view, 6> kRequired = {
      "src_ip", "dst_ip", "src_port", "dst_port", "protocol", "label"};

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (header.empty()) {
      for (auto& f : fields) f = lower(f);
      header = fields;
      for (std::size_t i = 0; i < kRequired.size(); ++i) {
        auto it = std::find(header.begin(), header.end(), kRequired[i]);
        if (it == header.end())
          throw ParseError("truth csv: missing required column '" + std::string(kRequired[i]) + "'");
        col[i] = static_cast<std::size_t>(it - header.begin());
      }
      continue;
    }
    if (fields.size() < header.size())
      throw ParseError("truth csv line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    const IpAddress src = IpAddress::parse(fields[col[0]]);
    const IpAddress dst = IpAddress::parse(fields[col[1]]);
    TruthRow row;
    row.key = FlowKey::canonical(src, parse_port(fields[col[2]], line_no), dst,
                                 parse_port(fields[col[3]], line_no),
                                 parse_protocol(fields[col[4]], line_no));
    row.label = fields[col[5]];
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw ParseError("truth csv: no header row");
  return rows;
}

bool ClassMap::is_benign(std::string_view label) {
  const std::string l = lower(trim(label));
  return l == "benign" || l == "normal" || l == "0";
}

ClassMap ClassMap::build(std::span<const TruthRow> truth, LabelMode mode) {
  ClassMap map;
  map.mode_ = mode;
  if (mode == LabelMode::binary) {
    map.names_ = {"benign", "attack"};
    return map;
  }
  bool has_benign = false;
  std::vector<std::string> others;
  for (const TruthRow& row : truth) {
    if (is_benign(row.label))
      has_benign = true;
    else
      others.push_back(row.label);
  }
  std::sort(others.begin(), others.end());
  others.erase(std::unique(others.begin(), others.end()), others.end());
  if (has_benign) map.names_.push_back("benign");
  map.names_.insert(map.names_.end(), others.begin(), others.end());
  return map;
}

int ClassMap::id_of(std::string_view label) const {
  const bool binary = names_ == std::vector<std::string>{"benign", "attack"} ||
                      mode_ == LabelMode::binary;
  if (binary) return is_benign(label) ? 0 : 1;
  if (!names_.empty() && names_.front() == "benign" && is_benign(label)) return 0;
  auto it = std::find(names_.begin(), names_.end(), label);
  if (it == names_.end()) throw InvalidArgument("unknown class label '" + std::string(label) + "'");
  return static_cast<int>(it - names_.begin());
}

LabelResult label_flows(std::vector<FlowRecord> flows, std::span<const TruthRow> truth,
                        LabelMode mode) {
  LabelResult result;
  result.classes = ClassMap::build(truth, mode);

  std::map<FlowKey, int> labels;
  for (const TruthRow& row : truth) {
    const int id = result.classes.id_of(row.label);
    auto [it, inserted] = labels.try_emplace(row.key, id);
    if (!inserted && it->second != id)
      throw InvalidArgument("conflicting truth labels for flow " + row.key.to_string());
  }

  for (FlowRecord& f : flows) {
    auto it = labels.find(f.key);
    if (it == labels.end()) {
      ++result.dropped;
      continue;
    }
    f.label = it->second;
    result.flows.push_back(std::move(f));
  }
  return result;
}

} // namespace ride::ingest
