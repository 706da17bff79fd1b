#include "weft/agent.hpp"

#include <algorithm>

#include "weft/error.hpp"

namespace weft {

namespace {

// Base payload kind a semantic type name maps to.
PayloadKind base_kind(const std::string& type_name) {
  if (type_name == "int" || type_name == "integer") return PayloadKind::INT;
  if (type_name == "text" || type_name == "str" || type_name == "string") return PayloadKind::TEXT;
  return PayloadKind::RECORD;
}

bool sig_accepts(const std::vector<std::string>& sig, PayloadKind kind) {
  if (sig.empty()) return true;
  return std::any_of(sig.begin(), sig.end(),
                     [&](const std::string& t) { return base_kind(t) == kind; });
}

}  // namespace

bool should_trigger(const AgentRecord& record, const TagSet& stream_tags,
                    const TagSet& message_tags) {
  const TagSet all = tag_union(stream_tags, message_tags);
  return record.inclusion_rule.matches(all) && !record.exclusion_rule.matches(all);
}

AgentInstance::AgentInstance(AgentRecord record, ProcessorFn processor)
    : record_(std::move(record)), processor_(std::move(processor)) {
  workers_.resize(static_cast<std::size_t>(record_.worker_count));
}

AgentInstance::AgentInstance(AgentRecord record, ControlFn control)
    : record_(std::move(record)), control_(std::move(control)) {
  workers_.resize(static_cast<std::size_t>(record_.worker_count));
}

int AgentInstance::idle_workers() const {
  return static_cast<int>(std::count_if(workers_.begin(), workers_.end(),
                                        [](const Worker& w) { return !w.busy; }));
}

Orchestrator::Orchestrator(SessionPtr session, std::uint64_t seed, const FixtureStore* fixtures)
    : session_(std::move(session)),
      sched_(session_->scheduler()),
      seed_(seed),
      fixtures_(fixtures) {
  session_->set_stream_opened_hook([this](const StreamPtr& s) { on_stream_opened(s); });
  session_->set_message_hook(
      [this](const StreamPtr& s, const Message& m) { on_message(s, m); });
}

std::string Orchestrator::default_output_stream(const std::string& agent,
                                                const std::string& scope) {
  return agent + "/" + scope + "/out";
}

AgentInstance& Orchestrator::attach(AgentRecord record, ProcessorFn processor) {
  record.validate();
  if (!session_->is_participant(record.name)) {
    throw StateError("agent '" + record.name + "' has not joined the session");
  }
  if (instances_.count(record.name)) {
    throw DuplicateError("agent '" + record.name + "' already attached");
  }
  const std::string name = record.name;
  auto inst = std::make_unique<AgentInstance>(std::move(record), std::move(processor));
  auto& ref = *inst;
  instances_.emplace(name, std::move(inst));
  attach_order_.push_back(name);
  return ref;
}

AgentInstance& Orchestrator::attach_control(AgentRecord record, ControlFn handler) {
  record.validate();
  if (!session_->is_participant(record.name)) {
    throw StateError("agent '" + record.name + "' has not joined the session");
  }
  if (instances_.count(record.name)) {
    throw DuplicateError("agent '" + record.name + "' already attached");
  }
  const std::string name = record.name;
  auto inst = std::make_unique<AgentInstance>(std::move(record), std::move(handler));
  auto& ref = *inst;
  instances_.emplace(name, std::move(inst));
  attach_order_.push_back(name);
  return ref;
}

AgentInstance& Orchestrator::join_and_attach(AgentRecord record, ProcessorFn processor) {
  session_->join(record.name);
  return attach(std::move(record), std::move(processor));
}

AgentInstance& Orchestrator::join_and_attach_control(AgentRecord record, ControlFn handler) {
  session_->join(record.name);
  return attach_control(std::move(record), std::move(handler));
}

void Orchestrator::subscribe_by_name(const std::string& agent, const std::string& stream_name) {
  StreamPtr s = session_->find_stream(stream_name);
  if (!s) {
    pending_name_subs_[stream_name].push_back(agent);
    return;
  }
  subs_by_stream_[stream_name].push_back(
      Subscription{agent, open_cursor(s, 0, agent), /*filtered=*/false});
  if (AgentInstance* inst = find_instance(agent)) {
    inst->subscribed_streams_.push_back(stream_name);
  }
  sched_.schedule_after(0, [this, agent, stream_name] { drain(agent, stream_name); });
}

AgentInstance* Orchestrator::find_instance(const std::string& name) {
  auto it = instances_.find(name);
  return it == instances_.end() ? nullptr : it->second.get();
}

int Orchestrator::stream_eval_count(const std::string& agent, const std::string& stream_name) const {
  auto it = stream_evals_.find({agent, stream_name});
  return it == stream_evals_.end() ? 0 : it->second;
}

std::uint64_t Orchestrator::message_eval_count(const std::string& agent,
                                               const std::string& stream_name) const {
  auto it = msg_evals_.find({agent, stream_name});
  return it == msg_evals_.end() ? 0 : it->second;
}

std::int64_t Orchestrator::busy_ms(const std::string& agent) const {
  auto it = busy_ms_.find(agent);
  return it == busy_ms_.end() ? 0 : it->second;
}

void Orchestrator::on_stream_opened(const StreamPtr& stream) {
  const std::string name = stream->name();
  // Stream-level trigger: each joined agent decides once, at open time,
  // whether to subscribe.
  for (const auto& agent : attach_order_) {
    AgentInstance& inst = *instances_.at(agent);
    ++stream_evals_[{agent, name}];
    if (should_trigger(inst.record_, stream->tags(), TagSet{})) {
      subs_by_stream_[name].push_back(
          Subscription{agent, open_cursor(stream, 0, agent), /*filtered=*/true});
      inst.subscribed_streams_.push_back(name);
    }
  }
  auto pending = pending_name_subs_.find(name);
  if (pending != pending_name_subs_.end()) {
    for (const auto& agent : pending->second) {
      subs_by_stream_[name].push_back(
          Subscription{agent, open_cursor(stream, 0, agent), /*filtered=*/false});
      if (AgentInstance* inst = find_instance(agent)) {
        inst->subscribed_streams_.push_back(name);
      }
    }
    pending_name_subs_.erase(pending);
  }
}

void Orchestrator::on_message(const StreamPtr& stream, const Message&) {
  auto it = subs_by_stream_.find(stream->name());
  if (it == subs_by_stream_.end()) return;
  const std::string name = stream->name();
  for (const auto& sub : it->second) {
    const std::string agent = sub.agent;
    sched_.schedule_after(0, [this, agent, name] { drain(agent, name); });
  }
}

void Orchestrator::drain(const std::string& agent, const std::string& stream_name) {
  auto streams_it = subs_by_stream_.find(stream_name);
  if (streams_it == subs_by_stream_.end()) return;
  auto sub_it = std::find_if(streams_it->second.begin(), streams_it->second.end(),
                             [&](const Subscription& s) { return s.agent == agent; });
  if (sub_it == streams_it->second.end()) return;
  auto inst_it = instances_.find(agent);
  if (inst_it == instances_.end()) return;
  AgentInstance& inst = *inst_it->second;
  const StreamPtr stream = sub_it->cursor.stream();

  for (;;) {
    StreamLog::ReadResult r = sub_it->cursor.next();
    if (r.status != StreamLog::ReadResult::Status::MSG) break;
    const Message& msg = *r.message;
    if (sub_it->filtered) {
      ++msg_evals_[{agent, stream_name}];
      if (!should_trigger(inst.record_, stream->tags(), msg.tags)) continue;
    }
    deliver(inst, stream, msg);
  }
}

void Orchestrator::deliver(AgentInstance& inst, const StreamPtr& stream, const Message& msg) {
  // Instructions addressed to a specific agent are ignored by everyone else.
  if (msg.kind == MessageKind::INSTRUCTION && msg.payload.kind() == PayloadKind::RECORD) {
    const auto& rec = msg.payload.as_record();
    if (rec.contains("agent") && rec.at("agent").get<std::string>() != inst.record_.name) {
      return;
    }
  }
  if (inst.is_control()) {
    inst.control_(stream, msg);
    return;
  }
  dispatch(inst, msg);
}

void Orchestrator::dispatch(AgentInstance& inst, const Message& msg) {
  for (std::size_t i = 0; i < inst.workers_.size(); ++i) {
    if (!inst.workers_[i].busy) {
      start_run(inst, i, msg);
      return;
    }
  }
  inst.queue_.push_back(msg);
}

void Orchestrator::start_run(AgentInstance& inst, std::size_t worker_index, const Message& msg) {
  inst.workers_[worker_index].busy = true;
  ++inst.inflight_;
  inst.max_observed_inflight_ = std::max(inst.max_observed_inflight_, inst.inflight_);

  ActiveRun run;
  run.agent = inst.record_.name;
  run.worker_index = worker_index;
  run.input_msg_id = msg.id;
  run.started_ts = sched_.now();
  run.latency = inst.record_.latency_est;

  Payload input = msg.payload;
  bool instruction_run = false;
  if (msg.kind == MessageKind::INSTRUCTION && msg.payload.kind() == PayloadKind::RECORD) {
    const auto& rec = msg.payload.as_record();
    if (rec.contains("node_id") && rec.contains("agent")) {
      instruction_run = true;
      run.node_id = rec.at("node_id").get<std::string>();
      input = Payload::from_json(rec.value("params", nlohmann::json::object()));
      if (rec.contains("latency_ms")) run.latency = rec.at("latency_ms").get<std::int64_t>();
    }
  }

  // Resolve the input stream name for default output naming.
  StreamPtr in_stream;
  for (const auto& s : session_->streams_in_creation_order()) {
    if (s->id() == msg.stream_id) {
      in_stream = s;
      break;
    }
  }
  run.input_stream = in_stream ? in_stream->name() : msg.stream_id;

  if (!instruction_run && !sig_accepts(inst.record_.input_sig, input.kind())) {
    run.error = "input payload kind '" + to_string(input.kind()) + "' does not match input_sig";
  } else {
    ProcessorContext ctx;
    ctx.agent = inst.record_.name;
    ctx.node_id = run.node_id;
    ctx.input_stream = run.input_stream;
    ctx.seed = seed_;
    ctx.now = sched_.now();
    ctx.fixtures = fixtures_;
    try {
      run.output = inst.processor_(input, ctx);
      if (run.output.quality && (*run.output.quality < 0.0 || *run.output.quality > 1.0)) {
        throw ValidationError("processor reported quality outside [0,1]");
      }
      if (run.output.declared_cost && *run.output.declared_cost < 0.0) {
        throw ValidationError("processor reported negative declared_cost");
      }
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  }

  const std::string key = run.agent + "\n" + run.input_msg_id;
  const std::int64_t latency = run.latency;
  active_runs_[key] = std::move(run);
  active_runs_[key].completion =
      sched_.schedule_after(latency, [this, key] { finish_run(key); });
}

void Orchestrator::finish_run(const std::string& run_key) {
  auto it = active_runs_.find(run_key);
  if (it == active_runs_.end()) return;
  ActiveRun run = std::move(it->second);
  active_runs_.erase(it);

  AgentInstance& inst = *instances_.at(run.agent);
  inst.workers_[run.worker_index].busy = false;
  --inst.inflight_;
  busy_ms_[run.agent] += run.latency;

  const bool instruction_run = !run.node_id.empty();
  const std::string scope = instruction_run ? run.node_id : run.input_stream;
  const TagSet default_stream_tags{tag_token(run.agent), "result"};

  auto emit = [&](const ProcessorEntry& entry, bool is_error) {
    const std::string name = entry.target_stream.empty()
                                 ? default_output_stream(run.agent, scope)
                                 : entry.target_stream;
    StreamPtr out = ensure_stream(
        name, entry.stream_tags ? *entry.stream_tags : default_stream_tags, run.agent);
    Payload payload = entry.payload;
    TagSet tags = entry.tags;
    if (instruction_run) {
      nlohmann::json envelope{{"node_id", run.node_id}, {"agent", run.agent}};
      if (is_error) {
        envelope["error"] = run.error;
      } else {
        envelope["result"] = entry.payload.to_json();
        if (run.output.quality) envelope["quality"] = *run.output.quality;
        if (run.output.declared_cost) envelope["declared_cost"] = *run.output.declared_cost;
      }
      payload = Payload::record(std::move(envelope));
      tags.insert("result");
    }
    out->append(entry.kind, tags, std::move(payload), run.agent);
  };

  if (!run.error.empty()) {
    ProcessorEntry entry;
    entry.kind = MessageKind::DATA;
    entry.tags = TagSet{"error"};
    entry.payload = Payload::record({{"error", run.error}, {"agent", run.agent}});
    emit(entry, /*is_error=*/true);
  } else {
    for (const auto& entry : run.output.entries) {
      emit(entry, /*is_error=*/false);
    }
  }

  pull_queue(inst);
}

void Orchestrator::pull_queue(AgentInstance& inst) {
  while (!inst.queue_.empty()) {
    std::size_t worker = inst.workers_.size();
    for (std::size_t i = 0; i < inst.workers_.size(); ++i) {
      if (!inst.workers_[i].busy) {
        worker = i;
        break;
      }
    }
    if (worker == inst.workers_.size()) return;
    Message msg = inst.queue_.front();
    inst.queue_.pop_front();
    start_run(inst, worker, msg);
  }
}

bool Orchestrator::cancel_run(const std::string& agent, const std::string& input_msg_id) {
  const std::string key = agent + "\n" + input_msg_id;
  auto it = active_runs_.find(key);
  if (it == active_runs_.end()) return false;
  ActiveRun run = std::move(it->second);
  active_runs_.erase(it);
  sched_.cancel(run.completion);

  AgentInstance& inst = *instances_.at(agent);
  inst.workers_[run.worker_index].busy = false;
  --inst.inflight_;
  busy_ms_[agent] += sched_.now() - run.started_ts;

  if (TraceSink* trace = session_->trace()) {
    nlohmann::json discarded = nlohmann::json::array();
    for (const auto& entry : run.output.entries) {
      TagSet tags = entry.tags;
      tags.insert("stale");
      discarded.push_back({{"tags", tags}, {"payload", entry.payload.to_json()}});
    }
    trace->record(TraceKind::DECISION, sched_.now(),
                  {{"decision", "stale_output_discarded"},
                   {"agent", agent},
                   {"node_id", run.node_id},
                   {"input_msg_id", input_msg_id},
                   {"outputs", discarded}});
  }

  pull_queue(inst);
  return true;
}

StreamPtr Orchestrator::ensure_stream(const std::string& name, const TagSet& tags,
                                      const std::string& producer) {
  StreamPtr s = session_->find_stream(name);
  if (s) return s;
  return session_->create_stream(name, tags, producer);
}

}  // namespace weft
