#pragma once
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "weft/fixtures.hpp"
#include "weft/registry.hpp"
#include "weft/session.hpp"

namespace weft {

// One entry an agent processor wants written to an output stream.
struct ProcessorEntry {
  std::string target_stream;  // empty -> "<agent>/<node or input stream>/out"
  MessageKind kind = MessageKind::DATA;
  TagSet tags;
  Payload payload;
  std::optional<TagSet> stream_tags;  // tags for the stream if it must be created
};

struct ProcessorOutput {
  std::vector<ProcessorEntry> entries;
  std::optional<double> quality;        // in [0,1] when present
  std::optional<double> declared_cost;  // non-negative when present
};

struct ProcessorContext {
  std::string agent;
  std::string node_id;        // empty for autonomous (non-instruction) runs
  std::string input_stream;   // name of the stream the message came from
  std::uint64_t seed = 0;
  std::int64_t now = 0;       // logical ms at run start
  const FixtureStore* fixtures = nullptr;
};

// Deterministic given (input, seed, context). Throwing reports failure;
// the runtime converts it into an {error}-tagged output message.
using ProcessorFn = std::function<ProcessorOutput(const Payload& input, const ProcessorContext& ctx)>;

// Handler for control participants (planner/coordinator style agents whose
// reaction is a zero-latency control-loop step rather than a worker run).
using ControlFn = std::function<void(const StreamPtr& stream, const Message& msg)>;

// Trigger rule: inclusion matches and exclusion does not, evaluated over
// the union of stream and message tags. Exclusion strictly overrides.
bool should_trigger(const AgentRecord& record, const TagSet& stream_tags,
                    const TagSet& message_tags);

// A joined agent: its record, worker pool, and stream subscriptions.
class AgentInstance {
 public:
  AgentInstance(AgentRecord record, ProcessorFn processor);
  AgentInstance(AgentRecord record, ControlFn control);

  const AgentRecord& record() const { return record_; }
  bool is_control() const { return static_cast<bool>(control_); }

  int idle_workers() const;
  int inflight() const { return inflight_; }
  int max_observed_inflight() const { return max_observed_inflight_; }
  std::size_t queued() const { return queue_.size(); }
  const std::vector<std::string>& subscribed_streams() const { return subscribed_streams_; }

 private:
  friend class Orchestrator;

  struct Worker {
    bool busy = false;
  };

  AgentRecord record_;
  ProcessorFn processor_;
  ControlFn control_;
  std::vector<Worker> workers_;
  std::deque<Message> queue_;  // FIFO, no priority lanes
  std::vector<std::string> subscribed_streams_;
  int inflight_ = 0;
  int max_observed_inflight_ = 0;
};

// Event router: watches session streams, evaluates trigger rules, drives
// worker pools, and delivers output entries back onto streams. Everything
// runs on the scheduler; the orchestrator never blocks.
class Orchestrator {
 public:
  Orchestrator(SessionPtr session, std::uint64_t seed = 0, const FixtureStore* fixtures = nullptr);

  // Binds an instance for an agent that is already a session participant
  // (e.g. joined via the session configuration).
  AgentInstance& attach(AgentRecord record, ProcessorFn processor);
  AgentInstance& attach_control(AgentRecord record, ControlFn handler);

  // join_session: announces JOIN (rejecting double joins) and attaches.
  AgentInstance& join_and_attach(AgentRecord record, ProcessorFn processor);
  AgentInstance& join_and_attach_control(AgentRecord record, ControlFn handler);

  // Subscribes `agent` to a stream by exact name, bypassing trigger rules
  // (used by the coordinator to collect node outputs). Takes effect
  // immediately if the stream exists, otherwise when it is opened.
  void subscribe_by_name(const std::string& agent, const std::string& stream_name);

  // Cancels the in-flight run consuming `input_msg_id`, if any: the
  // worker frees immediately and the run's late output is discarded (and
  // recorded in the trace tagged {stale}). Returns true when a run was
  // cancelled.
  bool cancel_run(const std::string& agent, const std::string& input_msg_id);

  AgentInstance* find_instance(const std::string& name);
  const SessionPtr& session() const { return session_; }

  // Instrumentation.
  int stream_eval_count(const std::string& agent, const std::string& stream_name) const;
  std::uint64_t message_eval_count(const std::string& agent, const std::string& stream_name) const;
  std::int64_t busy_ms(const std::string& agent) const;
  const std::map<std::string, std::int64_t>& busy_ms_by_agent() const { return busy_ms_; }

  static std::string default_output_stream(const std::string& agent, const std::string& scope);

 private:
  struct Subscription {
    std::string agent;
    Cursor cursor;
    bool filtered = true;  // evaluate message-level trigger rules
  };

  struct ActiveRun {
    std::string agent;
    std::size_t worker_index = 0;
    std::string input_msg_id;
    std::string input_stream;
    std::string node_id;
    std::int64_t started_ts = 0;
    std::int64_t latency = 0;
    ProcessorOutput output;
    std::string error;  // non-empty on processor failure
    Scheduler::Handle completion = Scheduler::kInvalidHandle;
  };

  void on_stream_opened(const StreamPtr& stream);
  void on_message(const StreamPtr& stream, const Message& msg);
  void drain(const std::string& agent, const std::string& stream_name);
  void deliver(AgentInstance& inst, const StreamPtr& stream, const Message& msg);
  void dispatch(AgentInstance& inst, const Message& msg);
  void start_run(AgentInstance& inst, std::size_t worker_index, const Message& msg);
  void finish_run(const std::string& run_key);
  void pull_queue(AgentInstance& inst);
  StreamPtr ensure_stream(const std::string& name, const TagSet& tags, const std::string& producer);

  SessionPtr session_;
  Scheduler& sched_;
  std::uint64_t seed_;
  const FixtureStore* fixtures_;

  std::vector<std::string> attach_order_;
  std::map<std::string, std::unique_ptr<AgentInstance>> instances_;
  std::map<std::string, std::vector<Subscription>> subs_by_stream_;  // stream name -> subs
  std::map<std::string, std::vector<std::string>> pending_name_subs_;  // stream name -> agents
  std::map<std::string, ActiveRun> active_runs_;  // run key = agent + '\n' + msg id
  std::uint64_t next_run_id_ = 0;

  std::map<std::pair<std::string, std::string>, int> stream_evals_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> msg_evals_;
  std::map<std::string, std::int64_t> busy_ms_;
};

}  // namespace weft
