#pragma once
#include <string>

#include <json.hpp>

#include "weft/agent.hpp"
#include "weft/fixtures.hpp"

namespace weft {

// Deterministic in-process stand-ins for external services. A stub kind
// plus parameters (fixture table, template, quality, latency override)
// fully determines behavior; there is no wall-clock or network access.
//
// Kinds: uppercase, job_search, match_predict, llm_stub, summarize_stub,
// join_stub, compare_stub, extract_stub, query_stub, discover_stub.
ProcessorFn make_stub_processor(const std::string& kind, const nlohmann::json& params);

bool is_known_stub_kind(const std::string& kind);

// Filter predicate mini-language used by query stubs and the data planner:
// "<op><literal>" with op in {=, !=, >, >=, <, <=, ~}; '~' is token
// containment. Numeric comparison when both sides parse as numbers.
bool eval_predicate(const nlohmann::json& value, const std::string& predicate);

// Shared data-operation semantics (used by stubs and by test oracles'
// fixtures loading; the oracles themselves re-implement these directly).
Table project_table(const Table& in, const std::vector<std::string>& fields);
Table filter_table(const Table& in, const nlohmann::json& filters);
Table inner_join(const Table& left, const Table& right, const std::vector<std::string>& keys);
Table summarize_table(const Table& in, const std::vector<std::string>& targets);
nlohmann::json compare_tables(const Table& left, const Table& right,
                              const std::vector<std::string>& keys);
Table extract_nested(const Table& in, const std::string& record_field,
                     const std::vector<std::string>& subfields);

}  // namespace weft
