#include "weft/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "weft/error.hpp"

namespace weft {

namespace {

const std::vector<std::string> kBuiltinParticipants = {"user", "planner", "coordinator"};

bool is_builtin(const std::string& name) {
  return std::find(kBuiltinParticipants.begin(), kBuiltinParticipants.end(), name) !=
         kBuiltinParticipants.end();
}

}  // namespace

void Scenario::validate() const {
  if (session_id.empty()) throw ValidationError("session id must not be empty");
  constraints.validate();
  for (const auto& name : session_agents) {
    if (is_builtin(name)) continue;
    const bool declared = std::any_of(agents.begin(), agents.end(),
                                      [&](const AgentRecord& a) { return a.name == name; });
    if (!declared) {
      throw ValidationError("session agent '" + name + "' has no agent fixture");
    }
  }
  if (task && retrieval) {
    throw ValidationError("scenario declares both a task and a retrieval request");
  }
  if (has_work()) {
    for (const char* required : {"user", "planner", "coordinator"}) {
      if (std::find(session_agents.begin(), session_agents.end(), required) ==
          session_agents.end()) {
        throw ValidationError(std::string("session agents must include '") + required +
                              "' when a task or retrieval is declared");
      }
    }
  }
  for (const auto& asset : assets) {
    if (!tables.count(asset.table)) {
      throw ValidationError("asset '" + asset.name + "' references missing table '" +
                            asset.table + "'");
    }
  }
  for (const auto& agent : agents) {
    if (!agent.kind.empty()) {
      for (const char* key : {"table", "candidates"}) {
        if (agent.params.contains(key)) {
          const std::string t = agent.params.at(key).get<std::string>();
          if (!tables.count(t)) {
            throw ValidationError("agent '" + agent.name + "' references missing table '" + t +
                                  "'");
          }
        }
      }
    }
  }
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json agents_j = nlohmann::json::array();
  for (const auto& a : agents) agents_j.push_back(a.to_json());
  nlohmann::json assets_j = nlohmann::json::array();
  for (const auto& a : assets) assets_j.push_back(a.to_json());
  nlohmann::json tables_j = nlohmann::json::object();
  for (const auto& [name, table] : tables) tables_j[name] = table.to_json();

  nlohmann::json j{{"session", {{"id", session_id}, {"agents", session_agents}}},
                   {"agents", agents_j},
                   {"data", {{"assets", assets_j}, {"tables", tables_j}}},
                   {"constraints", constraints.to_json()},
                   {"seed", seed},
                   {"clock", to_string(clock)}};
  if (task) j["task"] = task->to_json();
  if (retrieval) j["retrieval"] = retrieval->to_json();
  if (!inputs.empty()) j["inputs"] = inputs;
  return j;
}

Scenario Scenario::from_json(const nlohmann::json& j, const std::string& base_dir) {
  Scenario s;
  if (j.contains("session")) {
    const auto& sj = j.at("session");
    s.session_id = sj.value("id", std::string{"session"});
    if (sj.contains("agents")) s.session_agents = sj.at("agents").get<std::vector<std::string>>();
  }
  if (j.contains("agents")) {
    for (const auto& a : j.at("agents")) s.agents.push_back(AgentRecord::from_json(a));
  }
  if (j.contains("data")) {
    const auto& dj = j.at("data");
    const char delimiter =
        dj.contains("delimiter") ? dj.at("delimiter").get<std::string>().at(0) : '\t';
    if (dj.contains("tables")) {
      for (auto it = dj.at("tables").begin(); it != dj.at("tables").end(); ++it) {
        if (it.value().is_string()) {
          const std::filesystem::path p = it.value().get<std::string>();
          const std::filesystem::path resolved =
              p.is_absolute() ? p : std::filesystem::path(base_dir) / p;
          s.tables.emplace(it.key(), load_table_file(resolved.string(), delimiter));
        } else {
          s.tables.emplace(it.key(), Table::from_json(it.value()));
        }
      }
    }
    if (dj.contains("assets")) {
      for (const auto& a : dj.at("assets")) s.assets.push_back(DataAssetRecord::from_json(a));
    }
  }
  if (j.contains("task")) s.task = TaskSpec::from_json(j.at("task"));
  if (j.contains("retrieval")) s.retrieval = RetrievalRequest::from_json(j.at("retrieval"));
  if (j.contains("inputs")) s.inputs = j.at("inputs").get<std::vector<std::string>>();
  if (j.contains("constraints")) s.constraints = Constraints::from_json(j.at("constraints"));
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("clock")) s.clock = clock_mode_from_string(j.at("clock").get<std::string>());
  s.validate();
  return s;
}

Scenario Scenario::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw NotFoundError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("scenario parse error in " + path + ": " + e.what());
  }
  const std::string base_dir = std::filesystem::path(path).parent_path().string();
  return from_json(j, base_dir.empty() ? "." : base_dir);
}

}  // namespace weft
