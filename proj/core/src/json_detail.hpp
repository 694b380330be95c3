#pragma once

// Private helpers shared by the serializers. Not installed.

#include "ride/error.hpp"
#include "ride/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace ride::detail {

using nlohmann::json;

json net_to_json(const nn::DenseNet& net);
nn::DenseNet net_from_json(const json& j);

template <typename Fn>
auto parse_json_or_throw(std::string_view text, const char* what, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

} // namespace ride::detail
