#pragma once
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "weft/tag_expr.hpp"

namespace weft {

// Metadata describing a registered agent: what it can do, what it costs,
// and when it triggers.
struct AgentRecord {
  std::string name;
  std::string description;
  std::set<std::string> capabilities;
  std::vector<std::string> input_sig;   // semantic type names
  std::vector<std::string> output_sig;
  double cost_per_call = 0.0;           // abstract cost units
  std::int64_t latency_est = 0;         // simulated ms
  double quality_est = 1.0;             // in [0,1]
  TagExpr inclusion_rule = TagExpr::truth();
  TagExpr exclusion_rule = TagExpr::never();
  int worker_count = 1;
  bool available = true;

  // Stub binding, carried for the harness: which built-in processor this
  // agent runs and with what parameters (fixture table, template, ...).
  std::string kind;
  nlohmann::json params = nlohmann::json::object();

  void validate() const;  // throws ValidationError

  nlohmann::json to_json() const;
  static AgentRecord from_json(const nlohmann::json& j);
};

enum class Granularity { RAW, SUMMARY, SCHEMA };

std::string to_string(Granularity g);
Granularity granularity_from_string(const std::string& s);

enum class DataOp { DISCOVER, QUERY, EXTRACT, SUMMARIZE, JOIN, COMPARE };

std::string to_string(DataOp op);
DataOp data_op_from_string(const std::string& s);

struct SchemaField {
  std::string name;
  std::string type = "text";               // semantic type name
  std::vector<std::string> nested;         // subfields when type == "record"

  nlohmann::json to_json() const;
  static SchemaField from_json(const nlohmann::json& j);
};

// Metadata describing a registered data asset at one granularity level.
struct DataAssetRecord {
  std::string name;
  Granularity granularity = Granularity::RAW;
  std::vector<SchemaField> schema_fields;
  std::uint64_t row_count = 0;
  double access_cost = 0.0;             // per operation
  std::int64_t latency_est = 0;         // simulated ms
  double quality_est = 1.0;             // in [0,1]
  std::set<std::string> join_keys;      // subset of schema field names
  std::set<DataOp> supported_ops;
  bool available = true;
  std::string table;                    // fixture table name (defaults to `name`)

  bool has_field(const std::string& field) const;
  // Field reachable either directly or nested inside a record field.
  bool covers_field(const std::string& field) const;

  void validate() const;  // throws ValidationError

  nlohmann::json to_json() const;
  static DataAssetRecord from_json(const nlohmann::json& j);
};

// Searchable in-memory catalog of agents. Thread-safe: reads are
// concurrent, registrations serialized, searches see consistent snapshots.
class AgentRegistry {
 public:
  // Returns the agent name (its id). Throws DuplicateError/ValidationError.
  std::string register_agent(AgentRecord record);

  AgentRecord get(const std::string& name) const;  // throws NotFoundError
  bool contains(const std::string& name) const;
  std::vector<AgentRecord> all() const;  // name order

  // Ranked: score descending, ties by name ascending. Unavailable records
  // and records failing the input/output hard filters are excluded, as are
  // records with score 0.
  std::vector<AgentRecord> search(const std::string& capability,
                                  const std::optional<std::string>& input_type = std::nullopt,
                                  const std::optional<std::string>& output_type = std::nullopt) const;

  // Exact capability-token match scores 1.0; otherwise Jaccard similarity
  // between the query tokens and capabilities ∪ description tokens.
  static double score(const AgentRecord& record, const std::string& capability);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, AgentRecord> records_;
};

// Searchable in-memory catalog of data assets; same concurrency contract.
class DataRegistry {
 public:
  std::string register_asset(DataAssetRecord record);

  DataAssetRecord get(const std::string& name) const;  // throws NotFoundError
  bool contains(const std::string& name) const;
  std::vector<DataAssetRecord> all() const;  // name order

  // Assets containing every required field and supporting `op`, ranked by
  // quality_est / (1 + access_cost), ties by name. Throws ValidationError
  // when required_fields is empty.
  std::vector<DataAssetRecord> search(const std::vector<std::string>& required_fields,
                                      DataOp op) const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, DataAssetRecord> records_;
};

}  // namespace weft
