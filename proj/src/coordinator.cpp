#include "weft/coordinator.hpp"

#include <algorithm>
#include <cmath>

#include "weft/error.hpp"
#include "weft/tags.hpp"

namespace weft {

namespace {
constexpr double kEps = 1e-9;
}

std::string to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::PENDING: return "PENDING";
    case NodeStatus::READY: return "READY";
    case NodeStatus::RUNNING: return "RUNNING";
    case NodeStatus::COMPLETED: return "COMPLETED";
    case NodeStatus::TIMED_OUT: return "TIMED_OUT";
    case NodeStatus::LOW_QUALITY: return "LOW_QUALITY";
    case NodeStatus::FAILED: return "FAILED";
    case NodeStatus::SKIPPED: return "SKIPPED";
    case NodeStatus::CANCELLED: return "CANCELLED";
  }
  return "UNKNOWN";
}

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::TIMEOUT: return "TIMEOUT";
    case ViolationKind::QUALITY: return "QUALITY";
    case ViolationKind::BUDGET: return "BUDGET";
  }
  return "UNKNOWN";
}

std::string to_string(FinalStatus s) {
  switch (s) {
    case FinalStatus::COMPLETED: return "COMPLETED";
    case FinalStatus::ABORTED_INFEASIBLE: return "ABORTED_INFEASIBLE";
    case FinalStatus::ABORTED_BUDGET: return "ABORTED_BUDGET";
    case FinalStatus::ABORTED_REPLAN_LIMIT: return "ABORTED_REPLAN_LIMIT";
  }
  return "UNKNOWN";
}

std::string to_string(InterventionAction a) {
  switch (a) {
    case InterventionAction::RETRY_ALTERNATE: return "RETRY_ALTERNATE";
    case InterventionAction::REPLAN: return "REPLAN";
    case InterventionAction::ABORT: return "ABORT";
  }
  return "UNKNOWN";
}

nlohmann::json NodeState::to_json() const {
  return nlohmann::json{
      {"node_id", node_id},
      {"step_id", step_id},
      {"agent", agent},
      {"plan_gen", plan_gen},
      {"status", to_string(status)},
      {"started_ts", started_ts},
      {"finished_ts", finished_ts},
      {"actual_cost", actual_cost},
      {"observed_quality", observed_quality ? nlohmann::json(*observed_quality) : nlohmann::json()},
      {"output", output ? output->to_json() : nlohmann::json()},
      {"attempts", attempts}};
}

nlohmann::json Violation::to_json() const {
  return nlohmann::json{{"node_id", node_id}, {"kind", to_string(kind)}, {"ts", ts}};
}

const NodeState* ExecutionReport::find_node(const std::string& node_id) const {
  const NodeState* found = nullptr;
  for (const auto& n : nodes) {
    if (n.node_id == node_id && (!found || n.plan_gen >= found->plan_gen)) found = &n;
  }
  return found;
}

nlohmann::json ExecutionReport::to_json() const {
  nlohmann::json nodes_j = nlohmann::json::array();
  for (const auto& n : nodes) nodes_j.push_back(n.to_json());
  nlohmann::json viol_j = nlohmann::json::array();
  for (const auto& v : violations) viol_j.push_back(v.to_json());
  return nlohmann::json{{"final_status", to_string(final_status)},
                        {"nodes", nodes_j},
                        {"violations", viol_j},
                        {"replans", replans},
                        {"totals", totals.to_json()}};
}

double per_node_quality_floor(double min_quality, std::size_t node_count) {
  if (node_count == 0 || min_quality <= 0.0) return 0.0;
  return std::pow(min_quality, 1.0 / static_cast<double>(node_count));
}

QualityDecision on_node_result(const std::optional<double>& quality, double floor) {
  const double q = quality.value_or(1.0);
  return q >= floor - kEps ? QualityDecision::ACCEPT : QualityDecision::INTERVENE;
}

InterventionDecision intervene(const InterventionInput& input) {
  // Candidates in planner tie-break order: cheapest, fastest, best, name.
  std::vector<AgentRecord> ordered = input.candidates;
  std::sort(ordered.begin(), ordered.end(), [](const AgentRecord& a, const AgentRecord& b) {
    if (a.cost_per_call != b.cost_per_call) return a.cost_per_call < b.cost_per_call;
    if (a.latency_est != b.latency_est) return a.latency_est < b.latency_est;
    if (a.quality_est != b.quality_est) return a.quality_est > b.quality_est;
    return a.name < b.name;
  });
  for (const auto& cand : ordered) {
    if (!cand.available) continue;
    if (input.used_agents.count(cand.name) || input.excluded.count(cand.name)) continue;
    if (cand.quality_est < input.quality_floor - kEps) continue;
    if (input.cost_so_far + cand.cost_per_call + input.pending_est_cost >
        input.max_cost + kEps) {
      continue;
    }
    return InterventionDecision{InterventionAction::RETRY_ALTERNATE, cand};
  }
  if (input.replans < input.max_replans) {
    return InterventionDecision{InterventionAction::REPLAN, std::nullopt};
  }
  return InterventionDecision{InterventionAction::ABORT, std::nullopt};
}

TaskCoordinator::TaskCoordinator(Deps deps, TaskSpec task, Constraints constraints,
                                 std::string name, std::string planner_name)
    : session_(std::move(deps.session)),
      orch_(deps.orchestrator),
      registry_(deps.registry),
      sched_(session_->scheduler()),
      trace_(session_->trace()),
      name_(std::move(name)),
      planner_name_(std::move(planner_name)),
      constraints_(std::move(constraints)) {
  constraints_.validate();
  auto task_shared = std::make_shared<TaskSpec>(std::move(task));
  const AgentRegistry* registry = registry_;
  candidates_fn_ = [task_shared, registry](const PlanNode& node) -> std::vector<AgentRecord> {
    const TaskStep* step = task_shared->find_step(node.step_id);
    if (!step || !registry) return {};
    return registry->search(step->capability);
  };
  Constraints c = constraints_;
  replan_fn_ = [task_shared, registry, c](const PlanDag& old_dag, const std::string& failed_node,
                                          const std::set<std::string>& excluded,
                                          const std::map<std::string, task_planner::CompletedNode>&
                                              completed) {
    if (!registry) throw StateError("no registry available for replanning");
    return task_planner::replan(old_dag, failed_node, *task_shared, *registry, c, excluded,
                                completed);
  };
}

TaskCoordinator::TaskCoordinator(Deps deps, CandidatesFn candidates, ReplanFn replan,
                                 Constraints constraints, std::string name,
                                 std::string planner_name)
    : session_(std::move(deps.session)),
      orch_(deps.orchestrator),
      registry_(deps.registry),
      sched_(session_->scheduler()),
      trace_(session_->trace()),
      name_(std::move(name)),
      planner_name_(std::move(planner_name)),
      constraints_(std::move(constraints)),
      candidates_fn_(std::move(candidates)),
      replan_fn_(std::move(replan)) {
  constraints_.validate();
}

void TaskCoordinator::attach() {
  if (attached_) return;
  if (!orch_) throw StateError("coordinator needs an orchestrator to attach");
  AgentRecord rec;
  rec.name = name_;
  rec.description = "task coordinator";
  rec.capabilities = {"coordinate"};
  rec.inclusion_rule = TagExpr::parse("plan");
  rec.exclusion_rule = TagExpr::parse("replan");
  rec.worker_count = 1;
  auto handler = [this](const StreamPtr& s, const Message& m) { on_control_message(s, m); };
  if (session_->is_participant(name_)) {
    orch_->attach_control(rec, handler);
  } else {
    orch_->join_and_attach_control(rec, handler);
  }
  attached_ = true;
}

void TaskCoordinator::on_control_message(const StreamPtr& stream, const Message& msg) {
  if (msg.payload.kind() != PayloadKind::RECORD) return;
  const auto& rec = msg.payload.as_record();
  if (stream->tags().count("plan") && rec.contains("nodes") && rec.contains("edges")) {
    if (finished_ && sequential_) reset_for_next_execution();
    if (finished_) return;
    if (executing_) {
      decision({{"decision", "plan_ignored"}, {"reason", "execution already in progress"}});
      return;
    }
    start(PlanDag::from_json(rec));
    return;
  }
  if (finished_) return;
  if (rec.contains("node_id") && (rec.contains("result") || rec.contains("error"))) {
    on_result(msg);
  }
}

void TaskCoordinator::reset_for_next_execution() {
  finished_ = false;
  executing_ = false;
  gen_ = -1;
  nodes_.clear();
  history_.clear();
  violations_.clear();
  excluded_agents_.clear();
  replans_ = 0;
  total_cost_ = 0.0;
  report_ = ExecutionReport{};
}

void TaskCoordinator::start(const PlanDag& dag) {
  if (executing_ || finished_) throw StateError("coordinator already executing or finished");
  task_planner::validate_dag(dag);
  executing_ = true;
  exec_start_ts_ = sched_.now();
  adopt_plan(dag, /*replanned=*/false);
  promote_and_issue();
}

ExecutionReport TaskCoordinator::execute(const PlanDag& dag) {
  start(dag);
  sched_.run_until_idle();
  if (!finished_) {
    throw StateError("execution stalled: an instructed agent never responded");
  }
  return report_;
}

const ExecutionReport& TaskCoordinator::report() const {
  if (!finished_) throw StateError("execution has not finished");
  return report_;
}

void TaskCoordinator::adopt_plan(const PlanDag& dag, bool replanned) {
  ++gen_;
  dag_ = dag;
  nodes_.clear();
  quality_floor_ = per_node_quality_floor(constraints_.min_quality, dag_.nodes.size());
  for (const auto& node : dag_.nodes) {
    NodeRt rt;
    rt.node = node;
    rt.gen = gen_;
    if (node.skip) {
      rt.status = NodeStatus::SKIPPED;
      rt.output = node.cached_output;
      rt.observed_quality = node.cached_quality;
      rt.finished_ts = sched_.now();
    }
    nodes_.emplace(node.node_id, std::move(rt));
  }
  decision({{"decision", replanned ? "replan_adopted" : "execution_started"},
            {"plan_gen", gen_},
            {"nodes", dag_.nodes.size()},
            {"est_total", dag_.est_total.to_json()},
            {"heuristic", dag_.heuristic},
            {"quality_floor", quality_floor_}});
}

void TaskCoordinator::promote_and_issue() {
  if (finished_) return;

  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& [from, to] : dag_.edges) preds[to].push_back(from);

  bool all_done = true;
  std::vector<std::string> to_issue;
  for (auto& [id, rt] : nodes_) {
    if (rt.status == NodeStatus::PENDING) {
      const auto& ps = preds[id];
      const bool ready = std::all_of(ps.begin(), ps.end(), [&](const std::string& p) {
        const NodeStatus s = nodes_.at(p).status;
        return s == NodeStatus::COMPLETED || s == NodeStatus::SKIPPED;
      });
      if (ready) {
        rt.status = NodeStatus::READY;
        to_issue.push_back(id);
      }
    }
    if (rt.status != NodeStatus::COMPLETED && rt.status != NodeStatus::SKIPPED) all_done = false;
  }

  if (all_done) {
    finalize(FinalStatus::COMPLETED);
    return;
  }
  for (const auto& id : to_issue) {
    issue(nodes_.at(id));
  }
}

void TaskCoordinator::issue(NodeRt& rt) {
  // Substitute predecessor outputs into the parameter bindings.
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [pname, binding] : rt.node.params) {
    if (binding.kind == ParamBinding::Kind::LITERAL) {
      params[pname] = binding.literal.to_json();
    } else {
      const NodeRt* src = nullptr;
      for (const auto& [_, other] : nodes_) {
        if (other.node.step_id == binding.step_id) {
          src = &other;
          break;
        }
      }
      if (!src || !src->output) {
        throw StateError("node '" + rt.node.node_id + "' needs output of step '" +
                         binding.step_id + "' which is not available");
      }
      params[pname] = src->output->to_json();
    }
  }

  const std::string agent_token = tag_token(rt.node.agent);
  const std::string stream_name = name_ + "/" + rt.node.agent + "/in";
  StreamPtr out = session_->find_stream(stream_name);
  if (!out) {
    out = session_->create_stream(stream_name, TagSet{"instruction", agent_token}, name_);
  }

  nlohmann::json instr{{"node_id", rt.node.node_id},
                       {"agent", rt.node.agent},
                       {"params", params},
                       {"latency_ms", rt.node.est_latency}};
  const std::uint64_t seq = out->append(MessageKind::INSTRUCTION, TagSet{"instruction", agent_token},
                                        Payload::record(std::move(instr)), name_);
  rt.instr_msg_id = out->id() + ":" + std::to_string(seq);
  rt.status = NodeStatus::RUNNING;
  rt.started_ts = sched_.now();
  ++rt.attempts;
  rt.used_agents.insert(rt.node.agent);

  orch_->subscribe_by_name(name_, Orchestrator::default_output_stream(rt.node.agent,
                                                                      rt.node.node_id));

  const std::string node_id = rt.node.node_id;
  const int attempt = rt.attempts;
  rt.timeout_handle = sched_.schedule_after(
      rt.node.timeout, [this, node_id, attempt] { on_timeout(node_id, attempt); });
}

void TaskCoordinator::on_result(const Message& msg) {
  const auto& rec = msg.payload.as_record();
  const std::string node_id = rec.at("node_id").get<std::string>();
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) return;  // superseded generation
  NodeRt& rt = it->second;
  if (rt.status != NodeStatus::RUNNING) return;
  if (rec.value("agent", rt.node.agent) != rt.node.agent) return;

  sched_.cancel(rt.timeout_handle);
  rt.timeout_handle = Scheduler::kInvalidHandle;
  rt.finished_ts = sched_.now();

  if (rec.contains("error")) {
    rt.status = NodeStatus::FAILED;
    rt.observed_quality = 0.0;
    charge(rt, rt.node.est_cost);
    // A failed run is accounted as the degenerate low-quality result.
    violations_.push_back({node_id, ViolationKind::QUALITY, sched_.now()});
    if (trace_) {
      trace_->record(TraceKind::VIOLATION, sched_.now(),
                     {{"node_id", node_id},
                      {"kind", to_string(ViolationKind::QUALITY)},
                      {"ts", sched_.now()},
                      {"detail", rec.at("error").get<std::string>()}});
    }
    if (budget_exceeded_abort(node_id)) return;
    apply_intervention(rt, ViolationKind::QUALITY);
    return;
  }

  const std::optional<double> quality =
      rec.contains("quality") ? std::optional<double>(rec.at("quality").get<double>())
                              : std::nullopt;
  const double cost =
      rec.contains("declared_cost") ? rec.at("declared_cost").get<double>() : rt.node.est_cost;
  charge(rt, cost);

  const QualityDecision qd = on_node_result(quality, quality_floor_);
  if (qd == QualityDecision::ACCEPT) {
    rt.status = NodeStatus::COMPLETED;
    rt.observed_quality = quality.value_or(1.0);
    rt.output = Payload::from_json(rec.at("result"));
    decision({{"decision", "node_accepted"},
              {"node_id", node_id},
              {"agent", rt.node.agent},
              {"quality", rt.observed_quality ? nlohmann::json(*rt.observed_quality)
                                              : nlohmann::json()},
              {"cost", cost}});
    if (budget_exceeded_abort(node_id)) return;
    promote_and_issue();
    return;
  }

  rt.status = NodeStatus::LOW_QUALITY;
  rt.observed_quality = quality.value_or(1.0);
  violations_.push_back({node_id, ViolationKind::QUALITY, sched_.now()});
  if (trace_) {
    trace_->record(TraceKind::VIOLATION, sched_.now(),
                   {{"node_id", node_id},
                    {"kind", to_string(ViolationKind::QUALITY)},
                    {"ts", sched_.now()},
                    {"quality", quality.value_or(1.0)},
                    {"floor", quality_floor_}});
  }
  if (budget_exceeded_abort(node_id)) return;
  apply_intervention(rt, ViolationKind::QUALITY);
}

void TaskCoordinator::on_timeout(const std::string& node_id, int attempt) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) return;
  NodeRt& rt = it->second;
  if (rt.status != NodeStatus::RUNNING || rt.attempts != attempt) return;

  rt.status = NodeStatus::TIMED_OUT;
  rt.finished_ts = rt.started_ts + rt.node.timeout;  // == now, exactly
  violations_.push_back({node_id, ViolationKind::TIMEOUT, sched_.now()});
  if (trace_) {
    trace_->record(TraceKind::VIOLATION, sched_.now(),
                   {{"node_id", node_id},
                    {"kind", to_string(ViolationKind::TIMEOUT)},
                    {"ts", sched_.now()},
                    {"timeout", rt.node.timeout}});
  }
  orch_->cancel_run(rt.node.agent, rt.instr_msg_id);
  charge(rt, rt.node.est_cost);  // the cancelled attempt still cost us
  if (budget_exceeded_abort(node_id)) return;
  apply_intervention(rt, ViolationKind::TIMEOUT);
}

void TaskCoordinator::charge(NodeRt& rt, double cost) {
  rt.actual_cost += cost;
  total_cost_ += cost;
}

bool TaskCoordinator::budget_exceeded_abort(const std::string& node_id) {
  if (total_cost_ <= constraints_.max_cost + kEps) return false;
  violations_.push_back({node_id, ViolationKind::BUDGET, sched_.now()});
  if (trace_) {
    trace_->record(TraceKind::VIOLATION, sched_.now(),
                   {{"node_id", node_id},
                    {"kind", to_string(ViolationKind::BUDGET)},
                    {"ts", sched_.now()},
                    {"total_cost", total_cost_},
                    {"max_cost", constraints_.max_cost}});
  }
  cancel_remaining(NodeStatus::CANCELLED);
  finalize(FinalStatus::ABORTED_BUDGET);
  return true;
}

double TaskCoordinator::pending_est_cost(const std::string& except_node) const {
  double sum = 0.0;
  for (const auto& [id, rt] : nodes_) {
    if (id == except_node) continue;
    if (rt.status == NodeStatus::PENDING || rt.status == NodeStatus::READY ||
        rt.status == NodeStatus::RUNNING) {
      sum += rt.node.est_cost;
    }
  }
  return sum;
}

void TaskCoordinator::apply_intervention(NodeRt& rt, ViolationKind kind) {
  InterventionInput input;
  input.candidates = candidates_fn_ ? candidates_fn_(rt.node) : std::vector<AgentRecord>{};
  input.used_agents = rt.used_agents;
  input.excluded = excluded_agents_;
  input.quality_floor = quality_floor_;
  input.cost_so_far = total_cost_;
  input.pending_est_cost = pending_est_cost(rt.node.node_id);
  input.max_cost = constraints_.max_cost;
  input.replans = replans_;
  input.max_replans = constraints_.max_replans;

  const InterventionDecision d = intervene(input);
  decision({{"decision", "intervention"},
            {"node_id", rt.node.node_id},
            {"violation", to_string(kind)},
            {"action", to_string(d.action)},
            {"alternate", d.alternate ? nlohmann::json(d.alternate->name) : nlohmann::json()}});

  switch (d.action) {
    case InterventionAction::RETRY_ALTERNATE: {
      const AgentRecord& alt = *d.alternate;
      rt.node.agent = alt.name;
      rt.node.est_cost = alt.cost_per_call;
      rt.node.est_latency = alt.latency_est;
      rt.node.est_quality = alt.quality_est;
      rt.node.timeout = task_planner::node_timeout(alt.latency_est, constraints_);
      rt.status = NodeStatus::READY;
      issue(rt);
      return;
    }
    case InterventionAction::REPLAN:
      do_replan(rt);
      return;
    case InterventionAction::ABORT:
      cancel_remaining(NodeStatus::CANCELLED);
      finalize(FinalStatus::ABORTED_REPLAN_LIMIT);
      return;
  }
}

void TaskCoordinator::do_replan(NodeRt& failed) {
  excluded_agents_.insert(failed.node.agent);

  std::map<std::string, task_planner::CompletedNode> completed;
  for (const auto& [_, rt] : nodes_) {
    if (rt.status == NodeStatus::COMPLETED || rt.status == NodeStatus::SKIPPED) {
      task_planner::CompletedNode c;
      c.agent = rt.node.agent;
      c.params = rt.node.params;
      c.output = rt.output.value_or(Payload{});
      c.quality = rt.observed_quality.value_or(1.0);
      completed.emplace(rt.node.step_id, std::move(c));
    }
  }

  PlanDag next;
  try {
    next = replan_fn_(dag_, failed.node.node_id, excluded_agents_, completed);
  } catch (const InfeasibleError& e) {
    decision({{"decision", "replan_infeasible"}, {"detail", e.what()}});
    cancel_remaining(NodeStatus::CANCELLED);
    finalize(FinalStatus::ABORTED_INFEASIBLE);
    return;
  }

  ++replans_;
  // Retire the current generation; running work is discarded.
  for (auto& [_, rt] : nodes_) {
    if (rt.status == NodeStatus::RUNNING) {
      orch_->cancel_run(rt.node.agent, rt.instr_msg_id);
      sched_.cancel(rt.timeout_handle);
      rt.status = NodeStatus::CANCELLED;
      rt.finished_ts = sched_.now();
    } else if (rt.status == NodeStatus::PENDING || rt.status == NodeStatus::READY) {
      rt.status = NodeStatus::CANCELLED;
      rt.finished_ts = sched_.now();
    }
    history_.push_back(snapshot(rt));
  }

  task_planner::publish_plan(next, *session_, planner_name_, TagSet{"replan"});
  adopt_plan(next, /*replanned=*/true);
  promote_and_issue();
}

void TaskCoordinator::cancel_remaining(NodeStatus terminal) {
  for (auto& [_, rt] : nodes_) {
    if (rt.status == NodeStatus::RUNNING) {
      orch_->cancel_run(rt.node.agent, rt.instr_msg_id);
      sched_.cancel(rt.timeout_handle);
      rt.status = terminal;
      rt.finished_ts = sched_.now();
    } else if (rt.status == NodeStatus::PENDING || rt.status == NodeStatus::READY) {
      rt.status = terminal;
      rt.finished_ts = sched_.now();
    }
  }
}

void TaskCoordinator::finalize(FinalStatus status) {
  if (finished_) return;
  finished_ = true;
  executing_ = false;

  report_.nodes = history_;
  for (const auto& [_, rt] : nodes_) report_.nodes.push_back(snapshot(rt));
  report_.violations = violations_;
  report_.replans = replans_;
  report_.final_status = status;
  report_.totals.cost = total_cost_;
  report_.totals.latency = sched_.now() - exec_start_ts_;
  double q = 1.0;
  for (const auto& [_, rt] : nodes_) {
    if (rt.status == NodeStatus::COMPLETED || rt.status == NodeStatus::SKIPPED) {
      q *= rt.observed_quality.value_or(1.0);
    }
  }
  report_.totals.quality = q;

  if (trace_) trace_->record(TraceKind::REPORT, sched_.now(), report_.to_json());
  session_->announce(event_names::kExecutionFinished, name_,
                     {{"status", to_string(status)},
                      {"cost", report_.totals.cost},
                      {"latency", report_.totals.latency},
                      {"quality", report_.totals.quality},
                      {"replans", report_.replans}});
}

NodeState TaskCoordinator::snapshot(const NodeRt& rt) const {
  NodeState s;
  s.node_id = rt.node.node_id;
  s.step_id = rt.node.step_id;
  s.agent = rt.node.agent;
  s.plan_gen = rt.gen;
  s.status = rt.status;
  s.started_ts = rt.started_ts;
  s.finished_ts = rt.finished_ts;
  s.actual_cost = rt.actual_cost;
  s.observed_quality = rt.observed_quality;
  s.output = rt.output;
  s.attempts = rt.attempts;
  return s;
}

void TaskCoordinator::decision(nlohmann::json body) {
  if (trace_) trace_->record(TraceKind::DECISION, sched_.now(), std::move(body));
}

}  // namespace weft
