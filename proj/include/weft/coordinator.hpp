#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "weft/agent.hpp"
#include "weft/task_planner.hpp"

namespace weft {

enum class NodeStatus {
  PENDING,
  READY,
  RUNNING,
  COMPLETED,
  TIMED_OUT,
  LOW_QUALITY,
  FAILED,
  SKIPPED,
  CANCELLED
};

std::string to_string(NodeStatus s);

enum class ViolationKind { TIMEOUT, QUALITY, BUDGET };

std::string to_string(ViolationKind k);

enum class FinalStatus { COMPLETED, ABORTED_INFEASIBLE, ABORTED_BUDGET, ABORTED_REPLAN_LIMIT };

std::string to_string(FinalStatus s);

struct NodeState {
  std::string node_id;
  std::string step_id;
  std::string agent;
  int plan_gen = 0;
  NodeStatus status = NodeStatus::PENDING;
  std::int64_t started_ts = -1;
  std::int64_t finished_ts = -1;
  double actual_cost = 0.0;
  std::optional<double> observed_quality;
  std::optional<Payload> output;
  int attempts = 0;

  nlohmann::json to_json() const;
};

struct Violation {
  std::string node_id;
  ViolationKind kind = ViolationKind::TIMEOUT;
  std::int64_t ts = 0;

  nlohmann::json to_json() const;
};

struct ExecutionReport {
  std::vector<NodeState> nodes;  // every generation; final generation last
  std::vector<Violation> violations;
  int replans = 0;
  Totals totals;
  FinalStatus final_status = FinalStatus::COMPLETED;

  const NodeState* find_node(const std::string& node_id) const;  // latest generation

  nlohmann::json to_json() const;
};

enum class QualityDecision { ACCEPT, INTERVENE };
enum class InterventionAction { RETRY_ALTERNATE, REPLAN, ABORT };

std::string to_string(InterventionAction a);

// Per-node quality floor: accepted nodes jointly meet the plan-level
// product bound when each clears min_quality^(1/node_count).
double per_node_quality_floor(double min_quality, std::size_t node_count);

// ACCEPT iff the reported quality (1.0 when absent) clears the floor.
QualityDecision on_node_result(const std::optional<double>& quality, double floor);

struct InterventionInput {
  std::vector<AgentRecord> candidates;  // for the failed node's step
  std::set<std::string> used_agents;    // already attempted on this node
  std::set<std::string> excluded;
  double quality_floor = 0.0;
  double cost_so_far = 0.0;
  double pending_est_cost = 0.0;  // est cost of the other unfinished nodes
  double max_cost = Constraints::kUnboundedCost;
  int replans = 0;
  int max_replans = 0;
};

struct InterventionDecision {
  InterventionAction action = InterventionAction::ABORT;
  std::optional<AgentRecord> alternate;  // RETRY_ALTERNATE only
};

// Retry with the next-best unused candidate (planner tie-break order) when
// one fits the constraints; replan while the budget of replans lasts;
// abort otherwise.
InterventionDecision intervene(const InterventionInput& input);

// Executes a PlanDag: issues instruction messages, collects outputs from
// node output streams, enforces timeout/quality/cost constraints, and
// retries/replans/aborts on violations. Runs entirely on the session's
// scheduler; completion notifications arrive as messages.
class TaskCoordinator {
 public:
  using CandidatesFn = std::function<std::vector<AgentRecord>(const PlanNode&)>;
  using ReplanFn = std::function<PlanDag(const PlanDag& old_dag, const std::string& failed_node,
                                         const std::set<std::string>& excluded,
                                         const std::map<std::string, task_planner::CompletedNode>&)>;

  struct Deps {
    SessionPtr session;
    Orchestrator* orchestrator = nullptr;
    const AgentRegistry* registry = nullptr;
  };

  // Task-mode coordinator: candidates come from capability search and
  // replans go through task_planner::replan.
  TaskCoordinator(Deps deps, TaskSpec task, Constraints constraints,
                  std::string name = "coordinator", std::string planner_name = "planner");

  // Generic coordinator with explicit candidate/replan strategies
  // (used by the data planner).
  TaskCoordinator(Deps deps, CandidatesFn candidates, ReplanFn replan, Constraints constraints,
                  std::string name = "coordinator", std::string planner_name = "planner");

  // Joins (if needed) and attaches as a control agent with inclusion rule
  // "plan" and exclusion rule "replan".
  void attach();

  // Starts executing a validated plan. Normally invoked by a {plan}
  // message; exposed for direct drives.
  void start(const PlanDag& dag);

  // start() + run the scheduler until idle; throws StateError if the
  // execution stalls (an instructed agent never answered).
  ExecutionReport execute(const PlanDag& dag);

  bool finished() const { return finished_; }
  const ExecutionReport& report() const;
  const std::string& name() const { return name_; }

  // Accept a fresh plan after an execution finished (interactive sessions
  // run several executions back to back).
  void set_sequential(bool sequential) { sequential_ = sequential; }

 private:
  struct NodeRt {
    PlanNode node;
    int gen = 0;
    NodeStatus status = NodeStatus::PENDING;
    int attempts = 0;
    std::set<std::string> used_agents;
    std::int64_t started_ts = -1;
    std::int64_t finished_ts = -1;
    double actual_cost = 0.0;
    std::optional<double> observed_quality;
    std::optional<Payload> output;
    Scheduler::Handle timeout_handle = Scheduler::kInvalidHandle;
    std::string instr_msg_id;
  };

  void on_control_message(const StreamPtr& stream, const Message& msg);
  void on_result(const Message& msg);
  void adopt_plan(const PlanDag& dag, bool replanned);
  void promote_and_issue();
  void issue(NodeRt& rt);
  void on_timeout(const std::string& node_id, int attempt);
  void charge(NodeRt& rt, double cost);
  bool budget_exceeded_abort(const std::string& node_id);
  void apply_intervention(NodeRt& rt, ViolationKind kind);
  void do_replan(NodeRt& failed);
  void cancel_remaining(NodeStatus terminal);
  void finalize(FinalStatus status);
  void reset_for_next_execution();
  NodeState snapshot(const NodeRt& rt) const;
  void decision(nlohmann::json body);
  double pending_est_cost(const std::string& except_node) const;

  SessionPtr session_;
  Orchestrator* orch_;
  const AgentRegistry* registry_;
  Scheduler& sched_;
  TraceSink* trace_;
  std::string name_;
  std::string planner_name_;
  Constraints constraints_;
  CandidatesFn candidates_fn_;
  ReplanFn replan_fn_;

  bool attached_ = false;
  bool executing_ = false;
  bool finished_ = false;
  bool sequential_ = false;
  int gen_ = -1;
  PlanDag dag_;
  std::map<std::string, NodeRt> nodes_;
  std::vector<NodeState> history_;
  std::vector<Violation> violations_;
  std::set<std::string> excluded_agents_;
  int replans_ = 0;
  double total_cost_ = 0.0;
  double quality_floor_ = 0.0;
  std::int64_t exec_start_ts_ = 0;
  ExecutionReport report_;
};

}  // namespace weft
