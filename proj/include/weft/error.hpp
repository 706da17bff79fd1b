#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace weft {

// Base for all runtime-reported failures. Subclasses distinguish the
// handful of error categories callers branch on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class DuplicateError : public Error {
 public:
  using Error::Error;
};

// Operation attempted against an object in the wrong state
// (closed stream, inactive session, double join, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

// Parse failure with a 0-based character position into the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)), position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_ = 0;
};

// Planner verdict when no plan exists for the given registry/constraints.
class InfeasibleError : public Error {
 public:
  enum class Reason { NO_AGENT, CONSTRAINTS, FIELD, JOIN_KEY };

  InfeasibleError(Reason reason, const std::string& detail)
      : Error("infeasible: " + reason_name(reason) + (detail.empty() ? "" : " (" + detail + ")")),
        reason_(reason),
        detail_(detail) {}

  Reason reason() const { return reason_; }
  const std::string& detail() const { return detail_; }

  static std::string reason_name(Reason r) {
    switch (r) {
      case Reason::NO_AGENT: return "no_agent";
      case Reason::CONSTRAINTS: return "constraints";
      case Reason::FIELD: return "field";
      case Reason::JOIN_KEY: return "join_key";
    }
    return "unknown";
  }

 private:
  Reason reason_;
  std::string detail_;
};

}  // namespace weft
