#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "weft/error.hpp"
#include "weft/harness.hpp"

namespace {

weft::RunOptions options_from(const std::optional<std::uint64_t>& seed,
                              const std::string& clock, const std::optional<int>& max_replans,
                              const std::string& trace_out, const std::string& report_out) {
  weft::RunOptions opts;
  opts.seed = seed;
  if (!clock.empty()) opts.clock = weft::clock_mode_from_string(clock);
  opts.max_replans = max_replans;
  if (!trace_out.empty()) opts.trace_out = trace_out;
  if (!report_out.empty()) opts.report_out = report_out;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weft: stream-orchestrated multi-agent runtime"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string trace_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_replans;
  std::string clock;
  std::string trace_out;
  std::string report_out;
  bool line_granularity = false;

  auto* run = app.add_subcommand("run", "run a scenario to completion");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--trace-out", trace_out, "write the trace to this file");
  run->add_option("--report-out", report_out, "write the execution report to this file");
  run->add_option("--max-replans", max_replans, "override the replan limit");
  run->add_option("--clock", clock, "clock mode: sim or wall")
      ->check(CLI::IsMember({"sim", "wall"}));

  auto* replay_cmd = app.add_subcommand("replay", "re-execute a trace and verify it matches");
  replay_cmd->add_option("trace", trace_path, "trace file produced by run --trace-out")
      ->required();

  auto* repl_cmd = app.add_subcommand("repl", "interactive session against a scenario");
  repl_cmd->add_option("scenario", scenario_path, "scenario file")->required();
  repl_cmd->add_option("--seed", seed, "override the scenario seed");
  repl_cmd->add_option("--trace-out", trace_out, "write the trace to this file");
  repl_cmd->add_option("--max-replans", max_replans, "override the replan limit");
  repl_cmd->add_flag("--line-granularity", line_granularity,
                     "one message per line instead of per word");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const weft::RunOptions opts =
          options_from(seed, clock, max_replans, trace_out, report_out);
      const weft::RunResult result =
          weft::run_scenario_file(scenario_path, opts, std::cout);
      return result.exit_code;
    }
    if (replay_cmd->parsed()) {
      const weft::ReplayVerdict verdict = weft::replay(trace_path);
      if (verdict.match) {
        std::cout << "MATCH\n";
        return 0;
      }
      std::cout << "DIVERGE at record " << verdict.diverged_record << ": " << verdict.detail
                << "\n";
      return 1;
    }
    if (repl_cmd->parsed()) {
      weft::RunOptions opts = options_from(seed, clock, max_replans, trace_out, report_out);
      opts.line_granularity = line_granularity;
      const weft::Scenario scenario = weft::Scenario::load_file(scenario_path);
      return weft::repl(scenario, opts, std::cin, std::cout);
    }
  } catch (const weft::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
