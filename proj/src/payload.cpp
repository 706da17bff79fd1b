#include "weft/payload.hpp"

#include "weft/error.hpp"

namespace weft {

std::string to_string(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::INT: return "int";
    case PayloadKind::TEXT: return "text";
    case PayloadKind::RECORD: return "record";
  }
  return "unknown";
}

PayloadKind Payload::kind() const {
  switch (value_.index()) {
    case 0: return PayloadKind::INT;
    case 1: return PayloadKind::TEXT;
    default: return PayloadKind::RECORD;
  }
}

std::int64_t Payload::as_int() const {
  if (kind() != PayloadKind::INT) throw StateError("payload is not an int");
  return std::get<std::int64_t>(value_);
}

const std::string& Payload::as_text() const {
  if (kind() != PayloadKind::TEXT) throw StateError("payload is not text");
  return std::get<std::string>(value_);
}

const nlohmann::json& Payload::as_record() const {
  if (kind() != PayloadKind::RECORD) throw StateError("payload is not a record");
  return std::get<nlohmann::json>(value_);
}

nlohmann::json Payload::to_json() const {
  switch (value_.index()) {
    case 0: return std::get<std::int64_t>(value_);
    case 1: return std::get<std::string>(value_);
    default: return std::get<nlohmann::json>(value_);
  }
}

Payload Payload::from_json(const nlohmann::json& j) {
  if (j.is_number_integer() && !j.is_number_unsigned()) return integer(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return integer(static_cast<std::int64_t>(j.get<std::uint64_t>()));
  if (j.is_string()) return text(j.get<std::string>());
  return record(j);
}

}  // namespace weft
