#include "weft/session.hpp"

#include <algorithm>

#include "weft/error.hpp"

namespace weft {

namespace {
constexpr const char* kSessionStreamName = "session";
}

std::string to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::ACTIVE: return "ACTIVE";
    case SessionStatus::COMPLETED: return "COMPLETED";
    case SessionStatus::ABORTED: return "ABORTED";
  }
  return "UNKNOWN";
}

Session::Session(SessionConfig config, Scheduler& sched, TraceSink* trace)
    : id_(config.id),
      sched_(sched),
      trace_(trace),
      budget_(config.budget),
      creator_(config.creator) {}

std::shared_ptr<Session> Session::create(SessionConfig config, Scheduler& sched,
                                         TraceSink* trace) {
  if (config.id.empty()) throw ValidationError("session id must not be empty");
  auto session = std::shared_ptr<Session>(new Session(config, sched, trace));
  session->session_stream_ =
      session->make_stream(kSessionStreamName, TagSet{"session"}, config.creator);
  session->announce(event_names::kSessionCreated, config.creator,
                    {{"session_id", config.id}, {"stream", kSessionStreamName}});
  for (const auto& agent : config.agents) {
    session->join(agent);
  }
  return session;
}

SessionStatus Session::status() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return status_;
}

StreamPtr Session::make_stream(const std::string& name, const TagSet& tags,
                               const std::string& producer) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (streams_.count(name)) {
    throw DuplicateError("stream name '" + name + "' already exists in session");
  }
  const std::string stream_id = "st" + std::to_string(next_stream_index_++);
  auto s = std::make_shared<StreamLog>(stream_id, name, tags, producer,
                                       [this] { return sched_.now(); });
  wire_stream(s);
  streams_.emplace(name, s);
  creation_order_.push_back(s);
  return s;
}

void Session::wire_stream(const StreamPtr& s) {
  // Observer fires on the appending thread, outside the stream lock.
  const std::string name = s->name();
  s->set_observer([this, name](const Message& m) {
    if (trace_) {
      nlohmann::json body = m.to_json();
      body["stream"] = name;
      trace_->record(m.kind == MessageKind::EVENT ? TraceKind::EVENT : TraceKind::MESSAGE, m.ts,
                     std::move(body));
    }
    if (on_message_) {
      StreamPtr stream = find_stream(name);
      if (stream) on_message_(stream, m);
    }
  });
}

StreamPtr Session::create_stream(const std::string& name, const TagSet& tags,
                                 const std::string& producer) {
  if (status() != SessionStatus::ACTIVE) {
    throw StateError("session '" + id_ + "' is not active");
  }
  if (name == kSessionStreamName) {
    throw DuplicateError("stream name '" + name + "' is reserved");
  }
  StreamPtr s = make_stream(name, tags, producer);
  announce(event_names::kStreamOpened, producer, {{"name", name}, {"tags", tags}});
  if (on_stream_opened_) on_stream_opened_(s);
  return s;
}

void Session::close_stream(const std::string& name) {
  StreamPtr s = stream(name);
  if (s == session_stream_ && status() == SessionStatus::ACTIVE) {
    throw StateError("session stream cannot be closed while the session is active");
  }
  if (s->close() && s != session_stream_) {
    announce(event_names::kStreamClosed, s->producer(), {{"name", name}});
  }
}

StreamPtr Session::stream(const std::string& name) const {
  StreamPtr s = find_stream(name);
  if (!s) throw NotFoundError("no stream named '" + name + "' in session");
  return s;
}

StreamPtr Session::find_stream(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = streams_.find(name);
  return it == streams_.end() ? nullptr : it->second;
}

std::vector<StreamPtr> Session::streams_in_creation_order() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return creation_order_;
}

void Session::join(const std::string& agent_id) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (status_ != SessionStatus::ACTIVE) throw StateError("session is not active");
    if (std::find(participants_.begin(), participants_.end(), agent_id) != participants_.end()) {
      throw StateError("agent '" + agent_id + "' already joined");
    }
    participants_.push_back(agent_id);
  }
  announce(event_names::kJoin, agent_id);
}

void Session::leave(const std::string& agent_id) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = std::find(participants_.begin(), participants_.end(), agent_id);
    if (it == participants_.end()) {
      throw StateError("agent '" + agent_id + "' is not a participant");
    }
    participants_.erase(it);
  }
  announce(event_names::kLeave, agent_id);
}

bool Session::is_participant(const std::string& agent_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return std::find(participants_.begin(), participants_.end(), agent_id) != participants_.end();
}

std::vector<std::string> Session::participants() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return participants_;
}

void Session::announce(const std::string& event_name, const std::string& agent_id,
                       nlohmann::json extra) {
  extra["event_name"] = event_name;
  extra["agent_id"] = agent_id;
  session_stream_->append(MessageKind::EVENT, TagSet{"event"}, Payload::record(std::move(extra)),
                          agent_id);
}

void Session::record_feedback(const std::string& agent_id, const Payload& feedback) {
  session_stream_->append(MessageKind::EVENT, TagSet{"event", "feedback"},
                          Payload::record({{"event_name", event_names::kFeedback},
                                           {"agent_id", agent_id},
                                           {"feedback", feedback.to_json()}}),
                          agent_id);
  if (trace_) {
    trace_->record(TraceKind::DECISION, sched_.now(),
                   {{"decision", "feedback_recorded"},
                    {"agent_id", agent_id},
                    {"feedback", feedback.to_json()}});
  }
}

void Session::end(SessionStatus final_status) {
  if (status() != SessionStatus::ACTIVE) return;
  for (const auto& s : streams_in_creation_order()) {
    if (s != session_stream_ && !s->closed()) close_stream(s->name());
  }
  for (const auto& agent : participants()) {
    leave(agent);
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    status_ = final_status;
  }
  session_stream_->close();
}

SessionPtr SessionManager::create_session(SessionConfig config) {
  if (sessions_.count(config.id)) {
    throw DuplicateError("session id '" + config.id + "' already exists");
  }
  SessionPtr s = Session::create(std::move(config), sched_, trace_);
  sessions_.emplace(s->id(), s);
  return s;
}

SessionPtr SessionManager::find(const std::string& id) const {
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

}  // namespace weft
