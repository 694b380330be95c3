#pragma once

#include "ride/packet_ingest.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ride::ingest {

struct FlowStore {
  std::vector<FlowRecord> flows;
  ClassMap classes;
};

/// Newline-delimited JSON, one FlowRecord per line, payload bytes base64-encoded.
std::string write_flow_store(std::span<const FlowRecord> flows, const ClassMap& classes);

/// Inverse of write_flow_store. Throws ParseError on malformed lines.
FlowStore read_flow_store(std::string_view ndjson);

} // namespace ride::ingest
