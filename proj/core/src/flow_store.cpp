#include "ride/flow_store.hpp"

#include "ride/base64.hpp"
#include "ride/error.hpp"

#include <json.hpp>

#include <map>
#include <sstream>

namespace ride::ingest {

using nlohmann::json;

std::string write_flow_store(std::span<const FlowRecord> flows, const ClassMap& classes) {
  std::string out;
  for (const FlowRecord& f : flows) {
    json packets = json::array();
    for (const RawPacket& p : f.packets) {
      packets.push_back({{"ts", p.timestamp},
                         {"src", p.src_addr.to_string()},
                         {"dst", p.dst_addr.to_string()},
                         {"sport", p.src_port},
                         {"dport", p.dst_port},
                         {"proto", p.protocol.code},
                         {"payload", base64_encode(p.payload)}});
    }
    json rec = {{"flow_id", f.flow_id}, {"label", f.label}, {"packets", std::move(packets)}};
    if (f.label >= 0 && static_cast<std::size_t>(f.label) < classes.size())
      rec["label_name"] = classes.names()[static_cast<std::size_t>(f.label)];
    out += rec.dump();
    out += '\n';
  }
  return out;
}

FlowStore read_flow_store(std::string_view ndjson) {
  FlowStore store;
  std::map<int, std::string> names;
  std::istringstream in{std::string(ndjson)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      FlowRecord f;
      f.flow_id = rec.at("flow_id").get<std::string>();
      f.label = rec.at("label").get<int>();
      if (rec.contains("label_name")) names[f.label] = rec["label_name"].get<std::string>();
      for (const json& p : rec.at("packets")) {
        RawPacket pkt;
        pkt.timestamp = p.at("ts").get<double>();
        pkt.src_addr = IpAddress::parse(p.at("src").get<std::string>());
        pkt.dst_addr = IpAddress::parse(p.at("dst").get<std::string>());
        pkt.src_port = p.at("sport").get<std::uint16_t>();
        pkt.dst_port = p.at("dport").get<std::uint16_t>();
        pkt.protocol = Protocol::from_code(p.at("proto").get<std::uint8_t>());
        pkt.payload = base64_decode(p.at("payload").get<std::string>());
        f.packets.push_back(std::move(pkt));
      }
      if (f.packets.empty()) throw ParseError("flow has no packets");
      f.key = FlowKey::of(f.packets.front());
      store.flows.push_back(std::move(f));
    } catch (const json::exception& e) {
      throw ParseError("flow store line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("flow store line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<std::string> class_names;
  for (const auto& [id, name] : names) {
    if (id < 0) continue;
    if (class_names.size() <= static_cast<std::size_t>(id))
      class_names.resize(static_cast<std::size_t>(id) + 1);
    class_names[static_cast<std::size_t>(id)] = name;
  }
  store.classes = ClassMap(std::move(class_names));
  return store;
}

} // namespace ride::ingest
