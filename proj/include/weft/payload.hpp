#pragma once
#include <cstdint>
#include <string>
#include <variant>

#include <json.hpp>

namespace weft {

enum class PayloadKind { INT, TEXT, RECORD };

std::string to_string(PayloadKind kind);

// Typed message payload: an integer, a piece of text, or a structured
// record (any JSON value that is not a bare integer or string).
class Payload {
 public:
  Payload() : value_(nlohmann::json::object()) {}

  static Payload integer(std::int64_t v) { return Payload(v); }
  static Payload text(std::string v) { return Payload(std::move(v)); }
  static Payload record(nlohmann::json v) { return Payload(std::move(v)); }

  PayloadKind kind() const;

  std::int64_t as_int() const;
  const std::string& as_text() const;
  const nlohmann::json& as_record() const;

  // Bare JSON value; the kind is recoverable from the JSON type.
  nlohmann::json to_json() const;
  static Payload from_json(const nlohmann::json& j);

  bool operator==(const Payload& other) const { return to_json() == other.to_json(); }
  bool operator!=(const Payload& other) const { return !(*this == other); }

 private:
  explicit Payload(std::int64_t v) : value_(v) {}
  explicit Payload(std::string v) : value_(std::move(v)) {}
  explicit Payload(nlohmann::json v) : value_(std::move(v)) {}

  std::variant<std::int64_t, std::string, nlohmann::json> value_;
};

}  // namespace weft
