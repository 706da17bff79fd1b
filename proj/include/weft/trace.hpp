#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace weft {

enum class TraceKind { MESSAGE, EVENT, DECISION, VIOLATION, REPORT };

std::string to_string(TraceKind kind);
TraceKind trace_kind_from_string(const std::string& s);

// One line of the run trace. Records are strictly ordered by (ts, seq)
// where seq is a global tie-break counter.
struct TraceRecord {
  std::int64_t ts = 0;
  std::uint64_t seq = 0;
  TraceKind kind = TraceKind::MESSAGE;
  nlohmann::json body;

  // Stable key order (alphabetical), one record per line.
  std::string to_line() const;
  static TraceRecord from_line(const std::string& line);
};

// In-memory trace collector; rendered to line-delimited records at the end.
class TraceSink {
 public:
  void record(TraceKind kind, std::int64_t ts, nlohmann::json body);

  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  std::string render() const;

 private:
  std::vector<TraceRecord> records_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace weft
