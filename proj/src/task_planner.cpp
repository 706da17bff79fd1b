#include "weft/task_planner.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "weft/error.hpp"
#include "weft/tags.hpp"

namespace weft {

namespace {
constexpr double kEps = 1e-9;
}

ParamBinding ParamBinding::lit(Payload p) {
  ParamBinding b;
  b.kind = Kind::LITERAL;
  b.literal = std::move(p);
  return b;
}

ParamBinding ParamBinding::output_of(std::string step_id) {
  ParamBinding b;
  b.kind = Kind::STEP_OUTPUT;
  b.step_id = std::move(step_id);
  return b;
}

bool ParamBinding::operator==(const ParamBinding& other) const {
  if (kind != other.kind) return false;
  return kind == Kind::LITERAL ? literal == other.literal : step_id == other.step_id;
}

nlohmann::json ParamBinding::to_json() const {
  if (kind == Kind::LITERAL) return nlohmann::json{{"kind", "literal"}, {"value", literal.to_json()}};
  return nlohmann::json{{"kind", "step_output"}, {"step", step_id}};
}

ParamBinding ParamBinding::from_json(const nlohmann::json& j) {
  // Shorthand: {"$from": "step_id"} or a bare literal value.
  if (!j.is_object() || !j.contains("kind")) {
    if (j.is_object() && j.contains("$from")) return output_of(j.at("$from").get<std::string>());
    return lit(Payload::from_json(j));
  }
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "literal") return lit(Payload::from_json(j.at("value")));
  if (kind == "step_output") return output_of(j.at("step").get<std::string>());
  throw ValidationError("unknown param binding kind: '" + kind + "'");
}

const TaskStep* TaskSpec::find_step(const std::string& step_id) const {
  for (const auto& s : steps) {
    if (s.step_id == step_id) return &s;
  }
  return nullptr;
}

void TaskSpec::validate() const {
  std::set<std::string> ids;
  for (const auto& s : steps) {
    if (s.step_id.empty()) throw ValidationError("step_id must not be empty");
    if (!ids.insert(s.step_id).second) {
      throw ValidationError("duplicate step_id '" + s.step_id + "'");
    }
  }
  for (const auto& [from, to] : deps) {
    if (!ids.count(from) || !ids.count(to)) {
      throw ValidationError("dependency (" + from + " -> " + to + ") references unknown step");
    }
  }
  for (const auto& s : steps) {
    for (const auto& [name, binding] : s.params) {
      if (binding.kind == ParamBinding::Kind::STEP_OUTPUT && !ids.count(binding.step_id)) {
        throw ValidationError("step '" + s.step_id + "' param '" + name +
                              "' references unknown step '" + binding.step_id + "'");
      }
    }
  }
  // Cycle check via the same Kahn pass used for plans.
  PlanDag probe;
  for (const auto& s : steps) {
    PlanNode n;
    n.node_id = s.step_id;
    n.step_id = s.step_id;
    probe.nodes.push_back(n);
  }
  probe.edges = deps;
  for (const auto& s : steps) {
    for (const auto& [_, binding] : s.params) {
      if (binding.kind == ParamBinding::Kind::STEP_OUTPUT) {
        probe.edges.insert({binding.step_id, s.step_id});
      }
    }
  }
  task_planner::validate_dag(probe);
}

nlohmann::json TaskSpec::to_json() const {
  nlohmann::json steps_j = nlohmann::json::array();
  for (const auto& s : steps) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, b] : s.params) params[name] = b.to_json();
    steps_j.push_back(
        {{"step_id", s.step_id}, {"capability", s.capability}, {"params", params}});
  }
  nlohmann::json deps_j = nlohmann::json::array();
  for (const auto& [from, to] : deps) deps_j.push_back({from, to});
  return nlohmann::json{{"steps", steps_j}, {"deps", deps_j}};
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j) {
  TaskSpec t;
  for (const auto& s : j.at("steps")) {
    TaskStep step;
    step.step_id = s.at("step_id").get<std::string>();
    step.capability = s.at("capability").get<std::string>();
    if (s.contains("params")) {
      for (auto it = s.at("params").begin(); it != s.at("params").end(); ++it) {
        step.params.emplace(it.key(), ParamBinding::from_json(it.value()));
      }
    }
    t.steps.push_back(std::move(step));
  }
  if (j.contains("deps")) {
    for (const auto& d : j.at("deps")) {
      t.deps.insert({d.at(0).get<std::string>(), d.at(1).get<std::string>()});
    }
  }
  t.validate();
  return t;
}

nlohmann::json Totals::to_json() const {
  return nlohmann::json{{"cost", cost}, {"latency", latency}, {"quality", quality}};
}

Totals Totals::from_json(const nlohmann::json& j) {
  Totals t;
  t.cost = j.at("cost").get<double>();
  t.latency = j.at("latency").get<std::int64_t>();
  t.quality = j.at("quality").get<double>();
  return t;
}

nlohmann::json PlanNode::to_json() const {
  nlohmann::json params_j = nlohmann::json::object();
  for (const auto& [name, b] : params) params_j[name] = b.to_json();
  nlohmann::json j{{"node_id", node_id}, {"step_id", step_id},   {"agent", agent},
                   {"params", params_j}, {"timeout", timeout},   {"est_cost", est_cost},
                   {"est_latency", est_latency}, {"est_quality", est_quality}};
  if (skip) {
    j["skip"] = true;
    j["cached_output"] = cached_output ? cached_output->to_json() : nlohmann::json();
    j["cached_quality"] = cached_quality;
  }
  if (!data_op.empty()) j["data_op"] = data_op;
  if (!asset.empty()) j["asset"] = asset;
  return j;
}

PlanNode PlanNode::from_json(const nlohmann::json& j) {
  PlanNode n;
  n.node_id = j.at("node_id").get<std::string>();
  n.step_id = j.at("step_id").get<std::string>();
  n.agent = j.at("agent").get<std::string>();
  if (j.contains("params")) {
    for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) {
      n.params.emplace(it.key(), ParamBinding::from_json(it.value()));
    }
  }
  n.timeout = j.at("timeout").get<std::int64_t>();
  n.est_cost = j.at("est_cost").get<double>();
  n.est_latency = j.at("est_latency").get<std::int64_t>();
  n.est_quality = j.at("est_quality").get<double>();
  n.skip = j.value("skip", false);
  if (n.skip) {
    n.cached_output = Payload::from_json(j.value("cached_output", nlohmann::json()));
    n.cached_quality = j.value("cached_quality", 1.0);
  }
  n.data_op = j.value("data_op", std::string{});
  n.asset = j.value("asset", std::string{});
  return n;
}

const PlanNode* PlanDag::find_node(const std::string& node_id) const {
  for (const auto& n : nodes) {
    if (n.node_id == node_id) return &n;
  }
  return nullptr;
}

PlanNode* PlanDag::find_node(const std::string& node_id) {
  for (auto& n : nodes) {
    if (n.node_id == node_id) return &n;
  }
  return nullptr;
}

nlohmann::json PlanDag::to_json() const {
  nlohmann::json nodes_j = nlohmann::json::array();
  for (const auto& n : nodes) nodes_j.push_back(n.to_json());
  nlohmann::json edges_j = nlohmann::json::array();
  for (const auto& [from, to] : edges) edges_j.push_back({from, to});
  return nlohmann::json{{"nodes", nodes_j},
                        {"edges", edges_j},
                        {"est_total", est_total.to_json()},
                        {"heuristic", heuristic}};
}

PlanDag PlanDag::from_json(const nlohmann::json& j) {
  PlanDag d;
  for (const auto& n : j.at("nodes")) d.nodes.push_back(PlanNode::from_json(n));
  for (const auto& e : j.at("edges")) {
    d.edges.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
  }
  d.est_total = Totals::from_json(j.at("est_total"));
  d.heuristic = j.value("heuristic", false);
  return d;
}

namespace task_planner {

std::int64_t node_timeout(std::int64_t latency_est, const Constraints& constraints) {
  return std::max<std::int64_t>(
      1, std::min<std::int64_t>(2 * latency_est, constraints.node_timeout_default));
}

std::vector<std::string> validate_dag(const PlanDag& dag) {
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> next;
  for (const auto& n : dag.nodes) indegree[n.node_id];
  for (const auto& [from, to] : dag.edges) {
    if (!indegree.count(from) || !indegree.count(to)) {
      throw ValidationError("edge (" + from + " -> " + to + ") references unknown node");
    }
    ++indegree[to];
    next[from].push_back(to);
  }

  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, deg] : indegree) {
    if (deg == 0) ready.push(id);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string id = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& succ : next[id]) {
      if (--indegree[succ] == 0) ready.push(succ);
    }
  }
  if (order.size() == dag.nodes.size()) return order;

  // Walk the residual graph from its smallest node until a repeat names a cycle.
  std::set<std::string> remaining;
  for (const auto& [id, deg] : indegree) {
    if (deg > 0) remaining.insert(id);
  }
  std::vector<std::string> path;
  std::set<std::string> seen;
  std::string cur = *remaining.begin();
  while (!seen.count(cur)) {
    seen.insert(cur);
    path.push_back(cur);
    for (const auto& succ : next[cur]) {
      if (remaining.count(succ)) {
        cur = succ;
        break;
      }
    }
  }
  auto start = std::find(path.begin(), path.end(), cur);
  std::string cycle;
  for (auto it = start; it != path.end(); ++it) {
    if (!cycle.empty()) cycle += ", ";
    cycle += *it;
  }
  throw ValidationError("plan DAG contains a cycle: {" + cycle + "}");
}

Totals estimate(const PlanDag& dag) {
  const std::vector<std::string> order = validate_dag(dag);
  std::map<std::string, std::vector<std::string>> preds;
  for (const auto& [from, to] : dag.edges) preds[to].push_back(from);

  Totals t;
  std::map<std::string, std::int64_t> finish;
  for (const auto& id : order) {
    const PlanNode* n = dag.find_node(id);
    t.cost += n->est_cost;
    t.quality *= n->est_quality;
    std::int64_t start = 0;
    for (const auto& p : preds[id]) start = std::max(start, finish[p]);
    finish[id] = start + n->est_latency;
    t.latency = std::max(t.latency, finish[id]);
  }
  return t;
}

namespace {

std::set<std::pair<std::string, std::string>> task_edges(const TaskSpec& task) {
  auto edges = task.deps;
  for (const auto& s : task.steps) {
    for (const auto& [_, binding] : s.params) {
      if (binding.kind == ParamBinding::Kind::STEP_OUTPUT) {
        edges.insert({binding.step_id, s.step_id});
      }
    }
  }
  return edges;
}

PlanDag assemble(const TaskSpec& task, const std::vector<AgentRecord>& assignment,
                 const Constraints& constraints) {
  PlanDag dag;
  for (std::size_t i = 0; i < task.steps.size(); ++i) {
    const TaskStep& step = task.steps[i];
    const AgentRecord& agent = assignment[i];
    PlanNode n;
    n.node_id = step.step_id;
    n.step_id = step.step_id;
    n.agent = agent.name;
    n.params = step.params;
    n.timeout = node_timeout(agent.latency_est, constraints);
    n.est_cost = agent.cost_per_call;
    n.est_latency = agent.latency_est;
    n.est_quality = agent.quality_est;
    dag.nodes.push_back(std::move(n));
  }
  dag.edges = task_edges(task);
  dag.est_total = estimate(dag);
  return dag;
}

bool feasible(const Totals& t, const Constraints& c) {
  return t.cost <= c.max_cost + kEps && t.latency <= c.max_latency &&
         t.quality >= c.min_quality - kEps;
}

// Total order on assignments: cheapest, then fastest, then highest
// quality, then lexicographic agent-name vector.
bool better(const Totals& ta, const std::vector<AgentRecord>& aa, const Totals& tb,
            const std::vector<AgentRecord>& ab) {
  if (ta.cost != tb.cost) return ta.cost < tb.cost;
  if (ta.latency != tb.latency) return ta.latency < tb.latency;
  if (ta.quality != tb.quality) return ta.quality > tb.quality;
  for (std::size_t i = 0; i < aa.size(); ++i) {
    if (aa[i].name != ab[i].name) return aa[i].name < ab[i].name;
  }
  return false;
}

}  // namespace

PlanDag plan(const TaskSpec& task, const AgentRegistry& registry, const Constraints& constraints,
             const std::set<std::string>& excluded, std::size_t exhaustive_limit) {
  task.validate();
  constraints.validate();

  std::vector<std::vector<AgentRecord>> candidates;
  candidates.reserve(task.steps.size());
  for (const auto& step : task.steps) {
    std::vector<AgentRecord> cands = registry.search(step.capability);
    cands.erase(std::remove_if(cands.begin(), cands.end(),
                               [&](const AgentRecord& r) { return excluded.count(r.name) > 0; }),
                cands.end());
    if (cands.empty()) {
      throw InfeasibleError(InfeasibleError::Reason::NO_AGENT,
                            "step '" + step.step_id + "' capability '" + step.capability + "'");
    }
    candidates.push_back(std::move(cands));
  }

  std::size_t product = 1;
  bool overflow = false;
  for (const auto& c : candidates) {
    if (product > exhaustive_limit / std::max<std::size_t>(c.size(), 1)) {
      overflow = true;
      break;
    }
    product *= c.size();
  }

  if (!overflow && product <= exhaustive_limit) {
    std::vector<std::size_t> pick(task.steps.size(), 0);
    std::vector<AgentRecord> best_assignment;
    Totals best_totals;
    PlanDag best_dag;
    bool have_best = false;

    for (;;) {
      std::vector<AgentRecord> assignment;
      assignment.reserve(pick.size());
      for (std::size_t i = 0; i < pick.size(); ++i) assignment.push_back(candidates[i][pick[i]]);
      PlanDag dag = assemble(task, assignment, constraints);
      if (feasible(dag.est_total, constraints) &&
          (!have_best || better(dag.est_total, assignment, best_totals, best_assignment))) {
        have_best = true;
        best_totals = dag.est_total;
        best_assignment = assignment;
        best_dag = std::move(dag);
      }
      // Odometer advance.
      std::size_t i = 0;
      for (; i < pick.size(); ++i) {
        if (++pick[i] < candidates[i].size()) break;
        pick[i] = 0;
      }
      if (i == pick.size()) break;
    }
    if (!have_best) {
      throw InfeasibleError(InfeasibleError::Reason::CONSTRAINTS,
                            "no assignment satisfies the constraints");
    }
    return best_dag;
  }

  // Greedy fallback: per-step argmax of quality/(1+cost), then a bounded
  // repair pass swapping single assignments toward feasibility.
  std::vector<std::size_t> pick(task.steps.size(), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best_score = -1.0;
    for (std::size_t j = 0; j < candidates[i].size(); ++j) {
      const AgentRecord& r = candidates[i][j];
      const double s = r.quality_est / (1.0 + r.cost_per_call);
      if (s > best_score || (s == best_score && r.name < candidates[i][pick[i]].name)) {
        best_score = s;
        pick[i] = j;
      }
    }
  }

  auto build = [&](const std::vector<std::size_t>& p) {
    std::vector<AgentRecord> assignment;
    assignment.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) assignment.push_back(candidates[i][p[i]]);
    return assemble(task, assignment, constraints);
  };

  auto violation = [&](const Totals& t) {
    double v = 0.0;
    if (t.cost > constraints.max_cost) v += (t.cost - constraints.max_cost);
    if (t.latency > constraints.max_latency) {
      v += static_cast<double>(t.latency - constraints.max_latency);
    }
    if (t.quality < constraints.min_quality) v += (constraints.min_quality - t.quality) * 1000.0;
    return v;
  };

  PlanDag dag = build(pick);
  std::size_t budget = 64 * task.steps.size() + 64;
  while (!feasible(dag.est_total, constraints) && budget-- > 0) {
    double cur = violation(dag.est_total);
    double best_improvement = 0.0;
    std::vector<std::size_t> best_pick = pick;
    PlanDag best_dag = dag;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      for (std::size_t j = 0; j < candidates[i].size(); ++j) {
        if (j == pick[i]) continue;
        std::vector<std::size_t> alt = pick;
        alt[i] = j;
        PlanDag alt_dag = build(alt);
        const double improvement = cur - violation(alt_dag.est_total);
        if (improvement > best_improvement) {
          best_improvement = improvement;
          best_pick = alt;
          best_dag = std::move(alt_dag);
        }
      }
    }
    if (best_improvement <= 0.0) break;
    pick = best_pick;
    dag = std::move(best_dag);
  }
  if (!feasible(dag.est_total, constraints)) {
    throw InfeasibleError(InfeasibleError::Reason::CONSTRAINTS,
                          "greedy search found no feasible assignment");
  }
  dag.heuristic = true;
  return dag;
}

PlanDag replan(const PlanDag& old_dag, const std::string& failed_node_id, const TaskSpec& task,
               const AgentRegistry& registry, const Constraints& constraints,
               const std::set<std::string>& prior_exclusions,
               const std::map<std::string, CompletedNode>& completed) {
  const PlanNode* failed = old_dag.find_node(failed_node_id);
  if (!failed) {
    throw ValidationError("failed node '" + failed_node_id + "' is not in the old plan");
  }
  std::set<std::string> excluded = prior_exclusions;
  excluded.insert(failed->agent);

  PlanDag dag = plan(task, registry, constraints, excluded);
  for (auto& node : dag.nodes) {
    auto it = completed.find(node.step_id);
    if (it == completed.end()) continue;
    if (it->second.agent != node.agent || !(it->second.params == node.params)) continue;
    node.skip = true;
    node.cached_output = it->second.output;
    node.cached_quality = it->second.quality;
    node.est_cost = 0.0;
    node.est_latency = 0;
    node.est_quality = it->second.quality;
  }
  dag.est_total = estimate(dag);
  return dag;
}

StreamPtr publish_plan(const PlanDag& dag, Session& session, const std::string& producer,
                       const TagSet& extra_tags) {
  validate_dag(dag);
  std::string name = "plan";
  for (int i = 2; session.find_stream(name); ++i) {
    name = "plan_" + std::to_string(i);
  }
  TagSet tags = tag_union(TagSet{"plan"}, extra_tags);
  StreamPtr stream = session.create_stream(name, tags, producer);
  stream->append(MessageKind::DATA, tags, Payload::record(dag.to_json()), producer);
  return stream;
}

}  // namespace task_planner

}  // namespace weft
