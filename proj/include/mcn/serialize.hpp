// JSON (de)serialization of networks with a lossless decimal number codec.
#pragma once

#include <string>

#include <json.hpp>

#include "mcn/network.hpp"

namespace mcn {

/// Shortest decimal string that parses back to exactly the same double.
std::string encodeReal(double v);

/// Accepts either a decimal string (the native encoding) or a plain JSON
/// number. `path` names the field in error messages.
double decodeReal(const nlohmann::json& j, const std::string& path);

nlohmann::json linearMapToJson(const LinearMap& map);
LinearMap linearMapFromJson(const nlohmann::json& j, const std::string& path);

nlohmann::json networkToJson(const MCNNetwork& net);
MCNNetwork networkFromJson(const nlohmann::json& j);

/// Pretty-printed document; deserialize(serialize(net)) is weight-exact.
std::string serializeNetwork(const MCNNetwork& net);
MCNNetwork deserializeNetwork(const std::string& text);

}  // namespace mcn
