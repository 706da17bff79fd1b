#include "weft/trace.hpp"

#include "weft/error.hpp"

namespace weft {

std::string to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::MESSAGE: return "MESSAGE";
    case TraceKind::EVENT: return "EVENT";
    case TraceKind::DECISION: return "DECISION";
    case TraceKind::VIOLATION: return "VIOLATION";
    case TraceKind::REPORT: return "REPORT";
  }
  return "UNKNOWN";
}

TraceKind trace_kind_from_string(const std::string& s) {
  if (s == "MESSAGE") return TraceKind::MESSAGE;
  if (s == "EVENT") return TraceKind::EVENT;
  if (s == "DECISION") return TraceKind::DECISION;
  if (s == "VIOLATION") return TraceKind::VIOLATION;
  if (s == "REPORT") return TraceKind::REPORT;
  throw ValidationError("unknown trace kind: '" + s + "'");
}

std::string TraceRecord::to_line() const {
  // nlohmann::json objects serialize with sorted keys, which keeps the
  // byte layout stable across runs.
  nlohmann::json j{{"ts", ts}, {"seq", seq}, {"kind", to_string(kind)}, {"body", body}};
  return j.dump();
}

TraceRecord TraceRecord::from_line(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line);
  TraceRecord r;
  r.ts = j.at("ts").get<std::int64_t>();
  r.seq = j.at("seq").get<std::uint64_t>();
  r.kind = trace_kind_from_string(j.at("kind").get<std::string>());
  r.body = j.at("body");
  return r;
}

void TraceSink::record(TraceKind kind, std::int64_t ts, nlohmann::json body) {
  TraceRecord r;
  r.ts = ts;
  r.seq = next_seq_++;
  r.kind = kind;
  r.body = std::move(body);
  records_.push_back(std::move(r));
}

std::string TraceSink::render() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_line();
    out.push_back('\n');
  }
  return out;
}

}  // namespace weft
