#pragma once
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "weft/clock.hpp"
#include "weft/constraints.hpp"
#include "weft/stream.hpp"
#include "weft/trace.hpp"

namespace weft {

enum class SessionStatus { ACTIVE, COMPLETED, ABORTED };

std::string to_string(SessionStatus s);

struct SessionConfig {
  std::string id;
  std::vector<std::string> agents;  // joined (with JOIN events) at creation, in order
  std::string creator = "user";
  Constraints budget;
};

// The scope of work: binds agents, streams, budget and the clock, and
// hosts the broadcast session stream on which joins, leaves and stream
// openings/closings are announced.
class Session : public std::enable_shared_from_this<Session> {
 public:
  using StreamOpenedFn = std::function<void(const StreamPtr&)>;
  using MessageFn = std::function<void(const StreamPtr&, const Message&)>;

  // Emits SESSION_CREATED followed by one JOIN per configured agent, in
  // configuration order.
  static std::shared_ptr<Session> create(SessionConfig config, Scheduler& sched,
                                         TraceSink* trace = nullptr);

  const std::string& id() const { return id_; }
  SessionStatus status() const;
  const Constraints& budget() const { return budget_; }
  Scheduler& scheduler() const { return sched_; }

  const StreamPtr& session_stream() const { return session_stream_; }

  // Registers a stream and announces STREAM_OPENED. Throws on name
  // collision or when the session is not ACTIVE.
  StreamPtr create_stream(const std::string& name, const TagSet& tags,
                          const std::string& producer);

  // Idempotent; announces STREAM_CLOSED on the first close. Closing the
  // session stream itself announces nothing (it is announced by
  // SESSION_CREATED and closed by end()).
  void close_stream(const std::string& name);

  StreamPtr stream(const std::string& name) const;  // throws NotFoundError
  StreamPtr find_stream(const std::string& name) const;  // nullptr when absent
  std::vector<StreamPtr> streams_in_creation_order() const;

  // Participant management. join announces JOIN; leave announces LEAVE.
  void join(const std::string& agent_id);
  void leave(const std::string& agent_id);
  bool is_participant(const std::string& agent_id) const;
  std::vector<std::string> participants() const;  // join order

  // Appends an EVENT message to the session stream; `extra` fields are
  // merged into the {event_name, agent_id} payload.
  void announce(const std::string& event_name, const std::string& agent_id,
                nlohmann::json extra = nlohmann::json::object());

  // Recorded-feedback hook: an EVENT tagged {feedback} plus a DECISION
  // trace record. No adaptation happens; the record is the deliverable.
  void record_feedback(const std::string& agent_id, const Payload& feedback);

  // Closes all open streams (announcing each), emits LEAVE for every
  // participant, sets the final status, then closes the session stream.
  void end(SessionStatus final_status);

  // Router hooks, fired for every stream creation / append in this
  // session. Wired once by the orchestrator before any agent runs.
  void set_stream_opened_hook(StreamOpenedFn fn) { on_stream_opened_ = std::move(fn); }
  void set_message_hook(MessageFn fn) { on_message_ = std::move(fn); }

  TraceSink* trace() const { return trace_; }

 private:
  Session(SessionConfig config, Scheduler& sched, TraceSink* trace);
  void wire_stream(const StreamPtr& s);
  StreamPtr make_stream(const std::string& name, const TagSet& tags, const std::string& producer);

  const std::string id_;
  Scheduler& sched_;
  TraceSink* trace_;
  Constraints budget_;
  std::string creator_;

  mutable std::mutex mutex_;  // guards status_, streams_, participants_
  SessionStatus status_ = SessionStatus::ACTIVE;
  StreamPtr session_stream_;
  std::map<std::string, StreamPtr> streams_;  // name -> stream (session stream included)
  std::vector<StreamPtr> creation_order_;
  std::vector<std::string> participants_;
  int next_stream_index_ = 0;

  StreamOpenedFn on_stream_opened_;
  MessageFn on_message_;
};

using SessionPtr = std::shared_ptr<Session>;

// Session factory enforcing id uniqueness.
class SessionManager {
 public:
  explicit SessionManager(Scheduler& sched, TraceSink* trace = nullptr)
      : sched_(sched), trace_(trace) {}

  // Throws DuplicateError when the id was already used.
  SessionPtr create_session(SessionConfig config);

  SessionPtr find(const std::string& id) const;

 private:
  Scheduler& sched_;
  TraceSink* trace_;
  std::map<std::string, SessionPtr> sessions_;
};

}  // namespace weft
