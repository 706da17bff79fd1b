#pragma once
#include <cstdint>
#include <string>

#include <json.hpp>

#include "weft/payload.hpp"
#include "weft/tags.hpp"

namespace weft {

enum class MessageKind { DATA, INSTRUCTION, EVENT };

std::string to_string(MessageKind kind);
MessageKind message_kind_from_string(const std::string& s);

// The universal envelope flowing on streams. Immutable once appended.
struct Message {
  std::string id;         // "<stream_id>:<seq>"
  std::string stream_id;
  std::uint64_t seq = 0;  // 0,1,2,... within the stream
  MessageKind kind = MessageKind::DATA;
  TagSet tags;            // explicit tags ∪ stream tags at append time
  Payload payload;
  std::string producer;
  std::int64_t ts = 0;    // logical milliseconds

  nlohmann::json to_json() const;
  static Message from_json(const nlohmann::json& j);
};

// Event names broadcast on the session stream.
namespace event_names {
inline constexpr const char* kSessionCreated = "SESSION_CREATED";
inline constexpr const char* kJoin = "JOIN";
inline constexpr const char* kLeave = "LEAVE";
inline constexpr const char* kStreamOpened = "STREAM_OPENED";
inline constexpr const char* kStreamClosed = "STREAM_CLOSED";
inline constexpr const char* kExecutionFinished = "EXECUTION_FINISHED";
inline constexpr const char* kFeedback = "FEEDBACK";
}  // namespace event_names

}  // namespace weft
