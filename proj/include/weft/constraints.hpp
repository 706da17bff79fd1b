#pragma once
#include <cstdint>
#include <limits>

#include <json.hpp>

namespace weft {

// Production constraints a plan must satisfy and the coordinator enforces.
struct Constraints {
  static constexpr double kUnboundedCost = std::numeric_limits<double>::infinity();
  static constexpr std::int64_t kUnboundedLatency = std::numeric_limits<std::int64_t>::max();

  double max_cost = kUnboundedCost;
  std::int64_t max_latency = kUnboundedLatency;  // simulated ms
  double min_quality = 0.0;                      // in [0,1]
  std::int64_t node_timeout_default = 60000;     // simulated ms
  int max_replans = 3;

  void validate() const;  // throws ValidationError

  nlohmann::json to_json() const;
  static Constraints from_json(const nlohmann::json& j);
};

}  // namespace weft
