#include "weft/constraints.hpp"

#include "weft/error.hpp"

namespace weft {

void Constraints::validate() const {
  if (min_quality < 0.0 || min_quality > 1.0) {
    throw ValidationError("min_quality must be in [0,1]");
  }
  if (max_cost < 0.0) throw ValidationError("max_cost must be non-negative");
  if (max_latency < 0) throw ValidationError("max_latency must be non-negative");
  if (node_timeout_default < 0) throw ValidationError("node_timeout_default must be non-negative");
  if (max_replans < 0) throw ValidationError("max_replans must be non-negative");
}

nlohmann::json Constraints::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  if (max_cost != kUnboundedCost) j["max_cost"] = max_cost;
  if (max_latency != kUnboundedLatency) j["max_latency"] = max_latency;
  j["min_quality"] = min_quality;
  j["node_timeout_default"] = node_timeout_default;
  j["max_replans"] = max_replans;
  return j;
}

Constraints Constraints::from_json(const nlohmann::json& j) {
  Constraints c;
  if (j.contains("max_cost")) c.max_cost = j.at("max_cost").get<double>();
  if (j.contains("max_latency")) c.max_latency = j.at("max_latency").get<std::int64_t>();
  if (j.contains("min_quality")) c.min_quality = j.at("min_quality").get<double>();
  if (j.contains("node_timeout_default")) {
    c.node_timeout_default = j.at("node_timeout_default").get<std::int64_t>();
  }
  if (j.contains("max_replans")) c.max_replans = j.at("max_replans").get<int>();
  c.validate();
  return c;
}

}  // namespace weft
