#include "ride/synth.hpp"

#include "ride/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

namespace ride::synth {

namespace {

constexpr std::size_t kMaxPayload = 1460;
constexpr std::uint64_t kBaseEpochUs = 1'700'000'000ull * 1'000'000ull;
constexpr std::string_view kTextAlphabet =
    "etaoinshrdlucmfwypvbgkqjxz etaoinshrdlu     ETAOINSHRD0123456789.,:/=-&?\r\n";

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::uint8_t random_byte(Rng& rng) { return static_cast<std::uint8_t>(uniform(rng, 0, 255)); }

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v));
}

void put32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t ip_checksum(const std::uint8_t* p, std::size_t n) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i + 1 < n; i += 2) sum += static_cast<std::uint32_t>(p[i] << 8 | p[i + 1]);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

struct Endpoint {
  std::array<std::uint8_t, 4> addr;
  std::uint16_t port;
};

struct PendingPacket {
  std::uint64_t ts_us;
  std::size_t flow;
  std::size_t index;
  bool from_client;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> make_payload(const ClassProfile& p, Rng& rng, const std::vector<std::uint8_t>* motif) {
  const std::size_t len = uniform(rng, p.min_len, p.max_len);
  std::vector<std::uint8_t> out(len);
  if (chance(rng, p.text_fraction)) {
    for (auto& b : out) b = static_cast<std::uint8_t>(kTextAlphabet[uniform(rng, 0, kTextAlphabet.size() - 1)]);
  } else {
    for (auto& b : out) b = random_byte(rng);
  }
  if (motif && !motif->empty()) {
    const std::size_t room = len - std::min(len, motif->size());
    const std::size_t offset = uniform(rng, 0, std::min(p.max_offset, room));
    for (std::size_t i = 0; i < motif->size() && offset + i < len; ++i)
      out[offset + i] = chance(rng, p.noise_rate) ? random_byte(rng) : (*motif)[i];
  }
  return out;
}

std::vector<std::uint8_t> fixed_motif(std::uint64_t seed, std::size_t len) {
  Rng rng(seed);
  std::vector<std::uint8_t> m(len);
  for (auto& b : m) b = random_byte(rng);
  return m;
}

std::vector<std::uint8_t> block_motif(std::uint8_t lo, std::uint8_t hi, std::size_t len) {
  std::vector<std::uint8_t> m(len);
  for (std::size_t i = 0; i < len; ++i) m[i] = static_cast<std::uint8_t>(lo + i % (hi - lo + 1u));
  return m;
}

std::string ip_text(const std::array<std::uint8_t, 4>& a) {
  return std::to_string(a[0]) + "." + std::to_string(a[1]) + "." + std::to_string(a[2]) + "." +
         std::to_string(a[3]);
}

} // namespace

std::string_view to_string(MotifMode m) noexcept {
  switch (m) {
  case MotifMode::none: return "none";
  case MotifMode::per_packet: return "per_packet";
  case MotifMode::per_flow: return "per_flow";
  case MotifMode::alternate: return "alternate";
  }
  return "none";
}

MotifMode motif_mode_from_string(std::string_view name) {
  for (MotifMode m : {MotifMode::none, MotifMode::per_packet, MotifMode::per_flow, MotifMode::alternate})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown motif mode '" + std::string(name) + "'");
}

void TrafficSpec::validate() const {
  if (n_flows == 0) throw InvalidArgument("traffic spec: n_flows must be >= 1");
  if (min_packets < 1 || min_packets > max_packets)
    throw InvalidArgument("traffic spec: need 1 <= min_packets <= max_packets");
  if (classes.empty() || classes.size() != class_mix.size())
    throw InvalidArgument("traffic spec: class_mix needs one proportion per class");
  double total = 0.0;
  for (double p : class_mix) {
    if (!(p >= 0.0)) throw InvalidArgument("traffic spec: proportions must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("traffic spec: class_mix must sum to 1");
  if (!(udp_fraction >= 0.0 && udp_fraction <= 1.0))
    throw InvalidArgument("traffic spec: udp_fraction must be in [0, 1]");
  for (const auto& c : classes) {
    if (c.name.empty()) throw InvalidArgument("traffic spec: class without a name");
    if (c.min_len < 1 || c.min_len > c.max_len || c.max_len > kMaxPayload)
      throw InvalidArgument("traffic spec: class " + c.name + " needs 1 <= min_len <= max_len <= 1460");
    if (c.motif_mode != MotifMode::none && c.motifs.empty())
      throw InvalidArgument("traffic spec: class " + c.name + " uses motifs but defines none");
  }
}

std::vector<std::size_t> allocate(std::size_t n, const std::vector<double>& mix) {
  std::vector<std::size_t> counts(mix.size());
  std::vector<double> remainder(mix.size());
  const double total = std::accumulate(mix.begin(), mix.end(), 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    const double exact = total > 0.0 ? mix[i] / total * static_cast<double>(n) : 0.0;
    // Guard against 0.7 * 100 landing on 69.99999.
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    used += counts[i];
  }
  std::vector<std::size_t> order(mix.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; used < n && !order.empty(); i = (i + 1) % order.size(), ++used) ++counts[order[i]];
  return counts;
}

GeneratedTraffic generate(const TrafficSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  GeneratedTraffic out;

  const auto counts = allocate(spec.n_flows, spec.class_mix);
  for (std::size_t c = 0; c < counts.size(); ++c) out.class_of_flow.insert(out.class_of_flow.end(), counts[c], c);
  std::shuffle(out.class_of_flow.begin(), out.class_of_flow.end(), rng);

  std::vector<PendingPacket> packets;
  out.truth_csv = "src_ip,dst_ip,src_port,dst_port,protocol,label\n";
  std::vector<std::pair<Endpoint, Endpoint>> endpoints;
  std::vector<bool> is_udp;
  for (std::size_t f = 0; f < spec.n_flows; ++f) {
    const ClassProfile& profile = spec.classes[out.class_of_flow[f]];
    const std::size_t host = f + 1;
    const Endpoint client{{10, static_cast<std::uint8_t>(host >> 16), static_cast<std::uint8_t>(host >> 8),
                           static_cast<std::uint8_t>(host)},
                          static_cast<std::uint16_t>(20000 + f % 40000)};
    const bool udp = chance(rng, spec.udp_fraction);
    const Endpoint server{{192, 168, static_cast<std::uint8_t>(1 + f % 200), static_cast<std::uint8_t>(1 + f % 250)},
                          static_cast<std::uint16_t>(udp ? 53 : (f % 2 ? 443 : 80))};
    endpoints.emplace_back(client, server);
    is_udp.push_back(udp);
    out.truth_csv += ip_text(client.addr) + "," + ip_text(server.addr) + "," + std::to_string(client.port) + "," +
                     std::to_string(server.port) + "," + (udp ? "udp" : "tcp") + "," + profile.name + "\n";

    const std::size_t n = uniform(rng, spec.min_packets, spec.max_packets);
    const std::size_t flow_motif = profile.motifs.empty() ? 0 : uniform(rng, 0, profile.motifs.size() - 1);
    std::uint64_t ts = kBaseEpochUs + f * 10'000 + uniform(rng, 0, 9'999);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<std::uint8_t>* motif = nullptr;
      switch (profile.motif_mode) {
      case MotifMode::none: break;
      case MotifMode::per_packet:
        if (chance(rng, profile.motif_prob)) motif = &profile.motifs[uniform(rng, 0, profile.motifs.size() - 1)];
        break;
      case MotifMode::per_flow: motif = &profile.motifs[flow_motif]; break;
      case MotifMode::alternate: motif = &profile.motifs[(flow_motif + i) % profile.motifs.size()]; break;
      }
      packets.push_back({ts, f, i, i % 2 == 0, make_payload(profile, rng, motif)});
      ts += uniform(rng, 500, 5'000);
    }
  }
  std::stable_sort(packets.begin(), packets.end(), [](const PendingPacket& a, const PendingPacket& b) {
    return std::tie(a.ts_us, a.flow, a.index) < std::tie(b.ts_us, b.flow, b.index);
  });

  auto& pcap = out.pcap;
  put32le(pcap, 0xa1b2c3d4);
  pcap.insert(pcap.end(), {2, 0, 4, 0});
  put32le(pcap, 0);
  put32le(pcap, 0);
  put32le(pcap, 65535);
  put32le(pcap, 1);

  std::vector<std::uint32_t> seq(spec.n_flows * 2, 1000);
  std::uint16_t ip_id = 1;
  std::vector<std::uint8_t> frame;
  for (const auto& p : packets) {
    const auto& [client, server] = endpoints[p.flow];
    const Endpoint& src = p.from_client ? client : server;
    const Endpoint& dst = p.from_client ? server : client;
    const bool udp = is_udp[p.flow];
    frame.clear();
    frame.insert(frame.end(), {0x02, 0, 0, 0, 0, 0x02, 0x02, 0, 0, 0, 0, 0x01, 0x08, 0x00});
    const std::size_t ip_start = frame.size();
    const std::size_t l4_len = (udp ? 8 : 20) + p.payload.size();
    frame.insert(frame.end(), {0x45, 0});
    put16(frame, static_cast<std::uint16_t>(20 + l4_len));
    put16(frame, ip_id++);
    put16(frame, 0x4000);
    frame.push_back(64);
    frame.push_back(udp ? 17 : 6);
    put16(frame, 0);
    frame.insert(frame.end(), src.addr.begin(), src.addr.end());
    frame.insert(frame.end(), dst.addr.begin(), dst.addr.end());
    const std::uint16_t csum = ip_checksum(frame.data() + ip_start, 20);
    frame[ip_start + 10] = static_cast<std::uint8_t>(csum >> 8);
    frame[ip_start + 11] = static_cast<std::uint8_t>(csum);
    put16(frame, src.port);
    put16(frame, dst.port);
    if (udp) {
      put16(frame, static_cast<std::uint16_t>(l4_len));
      put16(frame, 0);
    } else {
      std::uint32_t& s = seq[2 * p.flow + (p.from_client ? 0 : 1)];
      put32(frame, s);
      put32(frame, seq[2 * p.flow + (p.from_client ? 1 : 0)]);
      s += static_cast<std::uint32_t>(p.payload.size());
      frame.insert(frame.end(), {0x50, 0x18, 0xff, 0xff, 0, 0, 0, 0});
    }
    frame.insert(frame.end(), p.payload.begin(), p.payload.end());

    put32le(pcap, static_cast<std::uint32_t>(p.ts_us / 1'000'000));
    put32le(pcap, static_cast<std::uint32_t>(p.ts_us % 1'000'000));
    put32le(pcap, static_cast<std::uint32_t>(frame.size()));
    put32le(pcap, static_cast<std::uint32_t>(frame.size()));
    pcap.insert(pcap.end(), frame.begin(), frame.end());
  }
  out.n_packets = packets.size();
  return out;
}

TrafficSpec default_fixture(std::uint64_t seed) {
  TrafficSpec spec;
  spec.n_flows = 400;
  spec.min_packets = 2;
  spec.max_packets = 8;
  spec.seed = seed;

  ClassProfile benign;
  benign.name = "benign";
  benign.text_fraction = 1.0;
  benign.min_len = 1400;
  benign.max_len = 1460;

  ClassProfile attack;
  attack.name = "attack";
  attack.text_fraction = 0.0;
  attack.min_len = 1400;
  attack.max_len = 1460;
  attack.motifs = {fixed_motif(0xA11CE, 24), fixed_motif(0xB0B, 24), fixed_motif(0xC0FFEE, 24)};
  attack.motif_mode = MotifMode::per_packet;
  attack.motif_prob = 0.9;
  attack.max_offset = 128;
  attack.noise_rate = 0.05;

  spec.classes = {benign, attack};
  spec.class_mix = {0.7, 0.3};
  return spec;
}

TrafficSpec motif_combination_fixture(std::uint64_t seed) {
  TrafficSpec spec;
  spec.n_flows = 400;
  spec.min_packets = 2;
  spec.max_packets = 6;
  spec.seed = seed;

  ClassProfile benign;
  benign.name = "benign";
  benign.text_fraction = 0.5;
  benign.min_len = 400;
  benign.max_len = 900;
  benign.motifs = {block_motif(0xF0, 0xFF, 320), block_motif(0x01, 0x0F, 320)};
  benign.motif_mode = MotifMode::per_flow;
  benign.max_offset = 64;
  benign.noise_rate = 0.02;

  ClassProfile attack = benign;
  attack.name = "attack";
  attack.motif_mode = MotifMode::alternate;

  spec.classes = {benign, attack};
  spec.class_mix = {0.5, 0.5};
  return spec;
}

} // namespace ride::synth
