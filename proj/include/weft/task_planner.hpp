#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "weft/constraints.hpp"
#include "weft/payload.hpp"
#include "weft/registry.hpp"
#include "weft/session.hpp"

namespace weft {

// A step parameter is either a literal value or the output of another step.
struct ParamBinding {
  enum class Kind { LITERAL, STEP_OUTPUT };
  Kind kind = Kind::LITERAL;
  Payload literal;
  std::string step_id;  // STEP_OUTPUT only

  static ParamBinding lit(Payload p);
  static ParamBinding output_of(std::string step_id);

  bool operator==(const ParamBinding& other) const;

  nlohmann::json to_json() const;
  static ParamBinding from_json(const nlohmann::json& j);
};

struct TaskStep {
  std::string step_id;
  std::string capability;
  std::map<std::string, ParamBinding> params;
};

// Declarative task decomposition: steps plus dependency edges forming a DAG.
struct TaskSpec {
  std::vector<TaskStep> steps;
  std::set<std::pair<std::string, std::string>> deps;  // (from, to)

  const TaskStep* find_step(const std::string& step_id) const;
  void validate() const;  // throws ValidationError

  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& j);
};

struct Totals {
  double cost = 0.0;
  std::int64_t latency = 0;
  double quality = 1.0;

  nlohmann::json to_json() const;
  static Totals from_json(const nlohmann::json& j);
};

struct PlanNode {
  std::string node_id;
  std::string step_id;
  std::string agent;
  std::map<std::string, ParamBinding> params;
  std::int64_t timeout = 0;  // simulated ms
  double est_cost = 0.0;
  std::int64_t est_latency = 0;
  double est_quality = 1.0;
  bool skip = false;                     // completed earlier; output cached
  std::optional<Payload> cached_output;  // present when skip
  double cached_quality = 1.0;

  // Data-plan annotations (empty for task plans).
  std::string data_op;
  std::string asset;

  nlohmann::json to_json() const;
  static PlanNode from_json(const nlohmann::json& j);
};

// Directed acyclic graph of agent invocations with per-node budgets.
struct PlanDag {
  std::vector<PlanNode> nodes;
  std::set<std::pair<std::string, std::string>> edges;  // (from node_id, to node_id)
  Totals est_total;
  bool heuristic = false;  // true when produced by the greedy fallback

  const PlanNode* find_node(const std::string& node_id) const;
  PlanNode* find_node(const std::string& node_id);

  nlohmann::json to_json() const;
  static PlanDag from_json(const nlohmann::json& j);
};

namespace task_planner {

// 2 x the agent's latency estimate, capped by the default node timeout
// and floored at 1 ms so zero-latency runs can complete before expiring.
std::int64_t node_timeout(std::int64_t latency_est, const Constraints& constraints);

// Kahn's algorithm, ties by node_id ascending. Throws ValidationError
// naming one cycle's node ids when the graph is cyclic.
std::vector<std::string> validate_dag(const PlanDag& dag);

// cost = sum of node est_cost; latency = critical path over node
// est_latency (edges are free); quality = product of node est_quality.
// Skipped nodes contribute nothing. Throws ValidationError on a cycle.
Totals estimate(const PlanDag& dag);

// Cheapest feasible assignment of agents to steps. Exhaustive enumeration
// while the assignment count stays within `exhaustive_limit`; a greedy
// pick with a repair pass otherwise (flagged `heuristic` in the result).
// Ties break by (latency, -quality, lexicographic agent-name vector).
// Throws InfeasibleError.
PlanDag plan(const TaskSpec& task, const AgentRegistry& registry, const Constraints& constraints,
             const std::set<std::string>& excluded = {},
             std::size_t exhaustive_limit = 100000);

struct CompletedNode {
  std::string agent;
  std::map<std::string, ParamBinding> params;
  Payload output;
  double quality = 1.0;
};

// plan() with the failed node's agent added to the exclusions; steps whose
// (agent, params) match a completed entry are marked skip-with-cached-output.
PlanDag replan(const PlanDag& old_dag, const std::string& failed_node_id, const TaskSpec& task,
               const AgentRegistry& registry, const Constraints& constraints,
               const std::set<std::string>& prior_exclusions,
               const std::map<std::string, CompletedNode>& completed = {});

// Publishes the DAG as a single DATA message on a fresh stream tagged
// {plan} (plus `extra_tags`). The stream name is "plan", then "plan_2",
// "plan_3", ... on reuse.
StreamPtr publish_plan(const PlanDag& dag, Session& session, const std::string& producer,
                       const TagSet& extra_tags = {});

}  // namespace task_planner

}  // namespace weft
