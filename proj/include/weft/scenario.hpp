#pragma once
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weft/clock.hpp"
#include "weft/constraints.hpp"
#include "weft/data_planner.hpp"
#include "weft/fixtures.hpp"
#include "weft/registry.hpp"
#include "weft/task_planner.hpp"

namespace weft {

// Everything a run needs, loaded from one JSON scenario file: session
// configuration, registry fixtures, data tables, the task or retrieval
// request, constraints, seed, and clock mode.
struct Scenario {
  std::string session_id = "session";
  std::vector<std::string> session_agents;
  std::vector<AgentRecord> agents;
  std::vector<DataAssetRecord> assets;
  std::map<std::string, Table> tables;
  std::optional<TaskSpec> task;
  std::optional<RetrievalRequest> retrieval;
  std::vector<std::string> inputs;  // text messages fed to the user stream
  Constraints constraints;
  std::uint64_t seed = 0;
  ClockMode clock = ClockMode::SIMULATED;

  bool has_work() const { return task.has_value() || retrieval.has_value(); }

  // Throws ValidationError; in particular it names any session agent that
  // has no fixture and is not one of the built-in participants.
  void validate() const;

  // Tables are inlined so the rendering is self-contained (replay needs
  // no files).
  nlohmann::json to_json() const;

  // `base_dir` resolves relative table file references.
  static Scenario from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static Scenario load_file(const std::string& path);
};

}  // namespace weft
