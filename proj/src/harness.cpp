#include "weft/harness.hpp"

#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "weft/agent.hpp"
#include "weft/data_planner.hpp"
#include "weft/error.hpp"
#include "weft/stubs.hpp"

namespace weft {

namespace {

// Wires a scenario into a live session: registries, fixture store, agent
// instances, planner and coordinator.
struct Runtime {
  std::unique_ptr<Scheduler> sched;
  TraceSink trace;
  AgentRegistry agents;
  DataRegistry data;
  FixtureStore fixtures;
  SessionPtr session;
  std::unique_ptr<Orchestrator> orch;
  std::unique_ptr<TaskCoordinator> coordinator;
  StreamPtr user_stream;
  Scenario scenario;
};

// Replaces every "$user_query" literal with the query text.
TaskSpec substitute_query(const TaskSpec& tmpl, const std::string& query) {
  TaskSpec task = tmpl;
  for (auto& step : task.steps) {
    for (auto& [_, binding] : step.params) {
      if (binding.kind != ParamBinding::Kind::LITERAL) continue;
      nlohmann::json v = binding.literal.to_json();
      if (v.is_string() && v.get<std::string>() == "$user_query") {
        binding.literal = Payload::text(query);
      } else if (v.is_object() || v.is_array()) {
        // Substitute one level deep inside records.
        for (auto& item : v) {
          if (item.is_string() && item.get<std::string>() == "$user_query") item = query;
        }
        binding.literal = Payload::from_json(v);
      }
    }
  }
  return task;
}

ProcessorFn make_planner_processor(Runtime& rt) {
  // Worker-confined planning state: buffered words for REPL line handling.
  auto buffer = std::make_shared<std::vector<std::string>>();
  return [&rt, buffer](const Payload& input, const ProcessorContext&) -> ProcessorOutput {
    ProcessorOutput out;
    auto publish = [&](const PlanDag& dag) {
      ProcessorEntry entry;
      entry.target_stream = "plan";
      entry.stream_tags = TagSet{"plan"};
      entry.tags = TagSet{"plan"};
      entry.kind = MessageKind::DATA;
      entry.payload = Payload::record(dag.to_json());
      out.entries.push_back(std::move(entry));
      out.quality = 1.0;
    };

    if (input.kind() == PayloadKind::TEXT) {
      buffer->push_back(input.as_text());
      return out;  // wait for the line-end marker
    }
    const nlohmann::json rec = input.as_record();
    if (rec.contains("marker")) {
      std::string query;
      for (const auto& w : *buffer) {
        if (!query.empty()) query.push_back(' ');
        query += w;
      }
      buffer->clear();
      if (!rt.scenario.task) {
        throw ValidationError("no task template configured for interactive queries");
      }
      const TaskSpec task = substitute_query(*rt.scenario.task, query);
      publish(task_planner::plan(task, rt.agents, rt.scenario.constraints));
      return out;
    }
    if (rec.contains("steps")) {
      publish(task_planner::plan(TaskSpec::from_json(rec), rt.agents, rt.scenario.constraints));
      return out;
    }
    if (rec.contains("target_fields")) {
      publish(data_planner::plan_retrieval(RetrievalRequest::from_json(rec), rt.data,
                                           rt.scenario.constraints));
      return out;
    }
    throw ValidationError("planner cannot interpret the request payload");
  };
}

void build_runtime(Runtime& rt, const Scenario& scenario, const RunOptions& options) {
  rt.scenario = scenario;
  if (options.seed) rt.scenario.seed = *options.seed;
  if (options.clock) rt.scenario.clock = *options.clock;
  if (options.max_replans) rt.scenario.constraints.max_replans = *options.max_replans;
  rt.scenario.validate();

  rt.sched = make_scheduler(rt.scenario.clock);
  rt.trace.record(TraceKind::DECISION, 0,
                  {{"decision", "scenario_loaded"},
                   {"scenario", rt.scenario.to_json()},
                   {"seed", rt.scenario.seed},
                   {"clock", to_string(rt.scenario.clock)}});

  for (const auto& [name, table] : rt.scenario.tables) rt.fixtures.put(name, table);
  for (const auto& agent : rt.scenario.agents) rt.agents.register_agent(agent);
  for (const auto& asset : rt.scenario.assets) rt.data.register_asset(asset);

  SessionConfig config;
  config.id = rt.scenario.session_id;
  config.agents = rt.scenario.session_agents;
  config.creator = "user";
  config.budget = rt.scenario.constraints;
  rt.session = Session::create(config, *rt.sched, &rt.trace);
  rt.orch = std::make_unique<Orchestrator>(rt.session, rt.scenario.seed, &rt.fixtures);

  // Planner: a single-worker agent listening to the user stream.
  if (rt.scenario.has_work()) {
    AgentRecord planner;
    planner.name = "planner";
    planner.description = "task and data planner";
    planner.capabilities = {"plan"};
    planner.inclusion_rule = TagExpr::parse("user");
    planner.worker_count = 1;
    planner.latency_est = 0;
    rt.orch->attach(planner, make_planner_processor(rt));

    TaskCoordinator::Deps deps{rt.session, rt.orch.get(), &rt.agents};
    if (rt.scenario.retrieval) {
      AgentRegistry* agents = &rt.agents;
      TaskCoordinator::CandidatesFn candidates = [agents](const PlanNode& node) {
        if (node.data_op.empty()) return std::vector<AgentRecord>{};
        std::string op;
        for (char c : node.data_op) {
          op.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        return agents->search(op);
      };
      TaskCoordinator::ReplanFn replan =
          [](const PlanDag&, const std::string& failed_node, const std::set<std::string>&,
             const std::map<std::string, task_planner::CompletedNode>&) -> PlanDag {
        throw InfeasibleError(InfeasibleError::Reason::NO_AGENT,
                              "data plans are not replanned (failed node '" + failed_node + "')");
      };
      rt.coordinator = std::make_unique<TaskCoordinator>(deps, std::move(candidates),
                                                         std::move(replan),
                                                         rt.scenario.constraints);
    } else {
      rt.coordinator = std::make_unique<TaskCoordinator>(deps, *rt.scenario.task,
                                                         rt.scenario.constraints);
    }
    rt.coordinator->attach();
  }

  // Declared stub agents: session-configured ones attach, the rest join.
  for (const auto& agent : rt.scenario.agents) {
    ProcessorFn fn;
    if (!agent.kind.empty()) {
      fn = make_stub_processor(agent.kind, agent.params);
    } else {
      fn = [](const Payload& input, const ProcessorContext&) {
        ProcessorOutput out;
        ProcessorEntry entry;
        entry.payload = input;  // echo agent
        out.entries.push_back(std::move(entry));
        return out;
      };
    }
    if (rt.session->is_participant(agent.name)) {
      rt.orch->attach(agent, std::move(fn));
    } else {
      rt.orch->join_and_attach(agent, std::move(fn));
    }
  }

  // Data scenarios need the operation stubs before any plan executes.
  if (rt.scenario.retrieval) {
    for (DataOp op : {DataOp::DISCOVER, DataOp::QUERY, DataOp::EXTRACT, DataOp::SUMMARIZE,
                      DataOp::JOIN, DataOp::COMPARE}) {
      const std::string name = data_planner::stub_agent_for(op);
      if (!rt.agents.contains(name)) {
        AgentRecord rec;
        rec.name = name;
        rec.description = "data operation stub";
        std::string cap;
        for (char c : to_string(op)) {
          cap.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        rec.capabilities = {cap};
        rec.inclusion_rule =
            TagExpr::conj(TagExpr::tag("instruction"), TagExpr::tag(tag_token(name)));
        rec.kind = name;
        rec.worker_count = 4;  // parallel query branches must not queue
        rt.agents.register_agent(rec);
      }
      if (!rt.orch->find_instance(name)) {
        const AgentRecord rec = rt.agents.get(name);
        ProcessorFn fn = make_stub_processor(rec.kind, rec.params);
        if (rt.session->is_participant(name)) {
          rt.orch->attach(rec, std::move(fn));
        } else {
          rt.orch->join_and_attach(rec, std::move(fn));
        }
      }
    }
  }

  rt.user_stream = rt.session->create_stream("user_in", TagSet{"user"}, "user");
}

// Any {error}-tagged message carrying an infeasibility note?
bool saw_infeasible_error(const Runtime& rt, std::string& detail) {
  for (const auto& record : rt.trace.records()) {
    if (record.kind != TraceKind::MESSAGE) continue;
    const auto& body = record.body;
    if (!body.contains("tags")) continue;
    const auto tags = body.at("tags").get<TagSet>();
    if (!tags.count("error")) continue;
    const auto payload = body.value("payload", nlohmann::json::object());
    if (payload.is_object() && payload.contains("error")) {
      detail = payload.at("error").get<std::string>();
      if (detail.find("infeasible") != std::string::npos) return true;
    }
  }
  return false;
}

Metrics collect_metrics(const Runtime& rt, const ExecutionReport& report) {
  Metrics m;
  for (const auto& record : rt.trace.records()) {
    if (record.kind == TraceKind::MESSAGE || record.kind == TraceKind::EVENT) {
      ++m.messages_appended;
    }
    if (record.kind == TraceKind::DECISION && record.body.value("decision", std::string{}) ==
                                                  std::string{"execution_started"}) {
      m.plan_est = Totals::from_json(record.body.at("est_total"));
    }
  }
  m.busy_ms_by_agent = rt.orch->busy_ms_by_agent();
  m.actual = report.totals;
  return m;
}

void print_summary(std::ostream& out, const ExecutionReport& report, const Metrics& metrics) {
  out << "final_status: " << to_string(report.final_status) << "\n";
  out << "replans: " << report.replans << "\n";
  for (const auto& n : report.nodes) {
    out << "  node " << n.node_id << " gen=" << n.plan_gen << " agent=" << n.agent << " "
        << to_string(n.status) << " cost=" << n.actual_cost;
    if (n.observed_quality) out << " quality=" << *n.observed_quality;
    out << "\n";
  }
  for (const auto& v : report.violations) {
    out << "  violation " << to_string(v.kind) << " node=" << v.node_id << " ts=" << v.ts << "\n";
  }
  out << "== metrics ==\n";
  out << "messages_appended: " << metrics.messages_appended << "\n";
  out << "busy_ms:";
  for (const auto& [agent, ms] : metrics.busy_ms_by_agent) out << " " << agent << "=" << ms;
  out << "\n";
  if (metrics.plan_est) {
    out << "plan_est: cost=" << metrics.plan_est->cost << " latency=" << metrics.plan_est->latency
        << " quality=" << metrics.plan_est->quality << "\n";
  }
  out << "actual: cost=" << metrics.actual.cost << " latency=" << metrics.actual.latency
      << " quality=" << metrics.actual.quality << "\n";
}

void write_outputs(const Runtime& rt, const RunOptions& options, const ExecutionReport& report,
                   RunResult& result) {
  result.trace_text = rt.trace.render();
  if (options.trace_out) {
    std::ofstream f(*options.trace_out);
    if (!f.is_open()) throw StateError("cannot write trace file: " + *options.trace_out);
    f << result.trace_text;
  }
  if (options.report_out) {
    std::ofstream f(*options.report_out);
    if (!f.is_open()) throw StateError("cannot write report file: " + *options.report_out);
    f << report.to_json().dump(2) << "\n";
  }
}

}  // namespace

int exit_code_for(FinalStatus status) {
  switch (status) {
    case FinalStatus::COMPLETED: return 0;
    case FinalStatus::ABORTED_INFEASIBLE: return 2;
    case FinalStatus::ABORTED_BUDGET:
    case FinalStatus::ABORTED_REPLAN_LIMIT: return 3;
  }
  return 1;
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options, std::ostream& out) {
  Runtime rt;
  build_runtime(rt, scenario, options);

  for (const auto& input : rt.scenario.inputs) {
    rt.user_stream->append(MessageKind::DATA, TagSet{}, Payload::text(input), "user");
  }
  if (rt.scenario.has_work()) {
    const nlohmann::json request =
        rt.scenario.task ? rt.scenario.task->to_json() : rt.scenario.retrieval->to_json();
    rt.user_stream->append(MessageKind::DATA, TagSet{"task"}, Payload::record(request), "user");
  }
  rt.sched->run_until_idle();

  ExecutionReport report;
  if (rt.coordinator && rt.coordinator->finished()) {
    report = rt.coordinator->report();
  } else {
    std::string detail;
    if (!rt.scenario.has_work()) {
      // Autonomous scenario: agents reacted to the inputs, nothing to plan.
      report.final_status = FinalStatus::COMPLETED;
    } else if (saw_infeasible_error(rt, detail)) {
      // Planning never produced an executable DAG.
      report.final_status = FinalStatus::ABORTED_INFEASIBLE;
    } else {
      throw StateError("run stalled: no plan was published and no infeasibility was reported");
    }
    rt.trace.record(TraceKind::REPORT, rt.sched->now(), report.to_json());
    rt.session->announce(event_names::kExecutionFinished,
                         rt.scenario.has_work() ? "coordinator" : "user",
                         {{"status", to_string(report.final_status)}, {"detail", detail}});
  }

  rt.session->end(report.final_status == FinalStatus::COMPLETED ? SessionStatus::COMPLETED
                                                                : SessionStatus::ABORTED);

  RunResult result;
  result.report = report;
  result.metrics = collect_metrics(rt, report);
  result.exit_code = exit_code_for(report.final_status);
  write_outputs(rt, options, report, result);
  if (!options.quiet) print_summary(out, report, result.metrics);
  return result;
}

RunResult run_scenario_file(const std::string& path, const RunOptions& options,
                            std::ostream& out) {
  return run_scenario(Scenario::load_file(path), options, out);
}

ReplayVerdict replay(const std::string& trace_path) {
  std::ifstream in(trace_path);
  if (!in.is_open()) throw NotFoundError("cannot open trace file: " + trace_path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw ParseError("trace is empty", 0);

  std::vector<TraceRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      records.push_back(TraceRecord::from_line(lines[i]));
    } catch (const std::exception& e) {
      throw ParseError("trace parse error at record " + std::to_string(i + 1) + ": " + e.what(),
                       i + 1);
    }
  }

  const TraceRecord& header = records.front();
  if (header.kind != TraceKind::DECISION ||
      header.body.value("decision", std::string{}) != "scenario_loaded") {
    throw ParseError("trace does not start with a scenario_loaded record", 1);
  }
  if (clock_mode_from_string(header.body.value("clock", std::string{"sim"})) != ClockMode::SIMULATED) {
    throw StateError("replay supports SIMULATED-mode traces only");
  }

  const Scenario scenario = Scenario::from_json(header.body.at("scenario"));
  RunOptions options;
  options.seed = header.body.at("seed").get<std::uint64_t>();
  options.quiet = true;
  std::ostringstream sink;
  const RunResult rerun = run_scenario(scenario, options, sink);

  std::vector<std::string> rerun_lines;
  std::istringstream rr(rerun.trace_text);
  while (std::getline(rr, line)) {
    if (!line.empty()) rerun_lines.push_back(line);
  }

  ReplayVerdict verdict;
  const std::size_t n = std::min(lines.size(), rerun_lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (lines[i] != rerun_lines[i]) {
      verdict.match = false;
      verdict.diverged_record = i + 1;
      verdict.detail = "record " + std::to_string(i + 1) + " differs";
      return verdict;
    }
  }
  if (lines.size() != rerun_lines.size()) {
    verdict.match = false;
    verdict.diverged_record = n + 1;
    verdict.detail = "trace length differs (" + std::to_string(lines.size()) + " vs " +
                     std::to_string(rerun_lines.size()) + " records)";
    return verdict;
  }
  verdict.match = true;
  return verdict;
}

int repl(const Scenario& scenario, const RunOptions& options, std::istream& in,
         std::ostream& out) {
  Runtime rt;
  build_runtime(rt, scenario, options);
  if (!rt.scenario.task) {
    throw ValidationError("repl requires a scenario with a task template");
  }
  rt.coordinator->set_sequential(true);

  std::size_t echoed = rt.trace.size();
  auto echo_new_records = [&] {
    for (; echoed < rt.trace.size(); ++echoed) {
      const TraceRecord& r = rt.trace.records()[echoed];
      if (r.kind == TraceKind::MESSAGE || r.kind == TraceKind::EVENT) {
        const std::string stream = r.body.value("stream", std::string{"?"});
        const std::string producer = r.body.value("producer", std::string{"?"});
        out << "[" << stream << "] " << producer << " "
            << r.body.value("kind", std::string{}) << " "
            << r.body.value("payload", nlohmann::json()).dump() << "\n";
      }
    }
  };

  rt.sched->run_until_idle();
  echo_new_records();

  std::string line;
  out << "> " << std::flush;
  while (std::getline(in, line)) {
    if (line == ":quit") break;
    if (line.rfind(":feedback", 0) == 0) {
      std::string text = line.size() > 9 ? line.substr(10) : "";
      rt.session->record_feedback("user", Payload::text(text));
      rt.sched->run_until_idle();
      echo_new_records();
      out << "> " << std::flush;
      continue;
    }
    if (options.line_granularity) {
      if (!line.empty()) {
        rt.user_stream->append(MessageKind::DATA, TagSet{"line"}, Payload::text(line), "user");
      }
    } else {
      std::istringstream words(line);
      std::string word;
      while (words >> word) {
        rt.user_stream->append(MessageKind::DATA, TagSet{"word"}, Payload::text(word), "user");
      }
    }
    rt.user_stream->append(MessageKind::DATA, TagSet{"line_end"},
                           Payload::record({{"marker", "line_end"}}), "user");
    rt.sched->run_until_idle();
    echo_new_records();
    out << "> " << std::flush;
  }

  rt.session->close_stream("user_in");
  rt.sched->run_until_idle();
  rt.session->end(SessionStatus::COMPLETED);
  echo_new_records();

  ExecutionReport report;
  if (rt.coordinator->finished()) report = rt.coordinator->report();
  RunResult result;
  result.report = report;
  result.metrics = collect_metrics(rt, report);
  write_outputs(rt, options, report, result);
  if (!options.quiet) print_summary(out, report, result.metrics);
  return 0;
}

}  // namespace weft
