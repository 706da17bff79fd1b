#pragma once
#include <optional>
#include <string>
#include <vector>

#include "weft/coordinator.hpp"
#include "weft/registry.hpp"
#include "weft/task_planner.hpp"

namespace weft {

enum class Aggregate { NONE, SUMMARIZE, COMPARE };

std::string to_string(Aggregate a);
Aggregate aggregate_from_string(const std::string& s);

// A declarative retrieval request the data planner decomposes into the
// fixed sub-task vocabulary.
struct RetrievalRequest {
  std::vector<std::string> target_fields;
  std::vector<std::pair<std::string, std::string>> filters;  // (field, predicate)
  Aggregate aggregate = Aggregate::NONE;
  Constraints constraints;

  void validate() const;  // throws ValidationError

  nlohmann::json to_json() const;
  static RetrievalRequest from_json(const nlohmann::json& j);
};

namespace data_planner {

// Agent names the generated nodes bind to, one stub per data operation.
std::string stub_agent_for(DataOp op);

// Whether `asset` can supply `field` for this request: directly, nested in
// a record field, or (under SUMMARIZE) derived as count/avg_x/sum_x/min_x/
// max_x of a present field.
bool asset_covers(const DataAssetRecord& asset, const std::string& field, Aggregate aggregate);

// Decomposes the request into DISCOVER / QUERY / EXTRACT / JOIN /
// SUMMARIZE / COMPARE nodes over registry assets:
//   1. DISCOVER picks the cheapest join-connected asset cover of the
//      target and filter fields (exhaustive over the top 8 candidates).
//   2. one QUERY per chosen asset, carrying that asset's filters.
//   3. EXTRACT per asset whose required fields sit inside a record field.
//   4. JOIN pairwise on shared join keys when the cover has several assets.
//   5. SUMMARIZE or COMPARE appended per the requested aggregate
//      (COMPARE consumes exactly two query branches in place of JOIN).
// Throws InfeasibleError(FIELD) for an uncoverable field and
// InfeasibleError(JOIN_KEY) when no join-compatible cover exists.
PlanDag plan_retrieval(const RetrievalRequest& request, const DataRegistry& registry,
                       const Constraints& constraints);

// Registers (or reuses) the data-op stub agents needed by `plan` in the
// agent registry and attaches them to the orchestrator.
void ensure_stub_agents(const PlanDag& plan, AgentRegistry& agents, Orchestrator& orch);

struct DataPlanResult {
  Payload result;  // the sink node's output
  ExecutionReport report;
};

// Delegates to the coordinator with data-op nodes bound to stub agents and
// returns the sink node's output alongside the execution report.
DataPlanResult execute_data_plan(const PlanDag& plan, TaskCoordinator::Deps deps,
                                 const Constraints& constraints);

}  // namespace data_planner

}  // namespace weft
