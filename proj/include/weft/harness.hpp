#pragma once
#include <iosfwd>
#include <optional>
#include <string>

#include "weft/coordinator.hpp"
#include "weft/scenario.hpp"
#include "weft/trace.hpp"

namespace weft {

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<ClockMode> clock;
  std::optional<int> max_replans;
  std::optional<std::string> trace_out;
  std::optional<std::string> report_out;
  bool line_granularity = false;  // repl: one message per line, not per word
  bool quiet = false;             // suppress the summary/metrics printout
};

struct Metrics {
  std::uint64_t messages_appended = 0;
  std::map<std::string, std::int64_t> busy_ms_by_agent;
  std::optional<Totals> plan_est;
  Totals actual;
};

struct RunResult {
  ExecutionReport report;
  Metrics metrics;
  std::string trace_text;
  int exit_code = 0;
};

// Exit code 0 iff the final status is COMPLETED; 2 : plan infeasible; 3:
// aborted on budget or the replan limit.
int exit_code_for(FinalStatus status);

// Builds registries and agents from the scenario, runs the full
// plan/execute loop to quiescence, writes trace/report files when asked,
// and prints a summary plus metrics to `out`.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options, std::ostream& out);

RunResult run_scenario_file(const std::string& path, const RunOptions& options,
                            std::ostream& out);

struct ReplayVerdict {
  bool match = false;
  std::size_t diverged_record = 0;  // 1-based; 0 when match
  std::string detail;
};

// Re-executes the scenario embedded in a SIMULATED-mode trace and compares
// record-by-record. Throws ParseError (with the record number) on a
// malformed trace and StateError for WALL-mode traces.
ReplayVerdict replay(const std::string& trace_path);

// Interactive loop: each input line becomes word messages plus a line-end
// marker on the user stream; the planner/coordinator respond and agent
// output is echoed with stream labels. ":quit" ends the session,
// ":feedback <text>" records a feedback event. Returns the process exit
// code.
int repl(const Scenario& scenario, const RunOptions& options, std::istream& in,
         std::ostream& out);

}  // namespace weft
