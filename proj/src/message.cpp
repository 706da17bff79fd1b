#include "weft/message.hpp"

#include "weft/error.hpp"

namespace weft {

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::DATA: return "DATA";
    case MessageKind::INSTRUCTION: return "INSTRUCTION";
    case MessageKind::EVENT: return "EVENT";
  }
  return "UNKNOWN";
}

MessageKind message_kind_from_string(const std::string& s) {
  if (s == "DATA") return MessageKind::DATA;
  if (s == "INSTRUCTION") return MessageKind::INSTRUCTION;
  if (s == "EVENT") return MessageKind::EVENT;
  throw ValidationError("unknown message kind: '" + s + "'");
}

nlohmann::json Message::to_json() const {
  return nlohmann::json{{"id", id},
                        {"stream_id", stream_id},
                        {"seq", seq},
                        {"kind", to_string(kind)},
                        {"tags", tags},
                        {"payload", payload.to_json()},
                        {"producer", producer},
                        {"ts", ts}};
}

Message Message::from_json(const nlohmann::json& j) {
  Message m;
  m.id = j.at("id").get<std::string>();
  m.stream_id = j.at("stream_id").get<std::string>();
  m.seq = j.at("seq").get<std::uint64_t>();
  m.kind = message_kind_from_string(j.at("kind").get<std::string>());
  m.tags = j.at("tags").get<TagSet>();
  m.payload = Payload::from_json(j.at("payload"));
  m.producer = j.at("producer").get<std::string>();
  m.ts = j.at("ts").get<std::int64_t>();
  return m;
}

}  // namespace weft
