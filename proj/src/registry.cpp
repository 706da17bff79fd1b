#include "weft/registry.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>

#include "weft/error.hpp"
#include "weft/tags.hpp"

namespace weft {

void AgentRecord::validate() const {
  if (name.empty()) throw ValidationError("agent name must not be empty");
  if (quality_est < 0.0 || quality_est > 1.0) {
    throw ValidationError("agent '" + name + "': quality_est must be in [0,1]");
  }
  if (cost_per_call < 0.0) {
    throw ValidationError("agent '" + name + "': cost_per_call must be non-negative");
  }
  if (latency_est < 0) {
    throw ValidationError("agent '" + name + "': latency_est must be non-negative");
  }
  if (worker_count < 1) {
    throw ValidationError("agent '" + name + "': worker_count must be >= 1");
  }
}

nlohmann::json AgentRecord::to_json() const {
  return nlohmann::json{{"name", name},
                        {"description", description},
                        {"capabilities", capabilities},
                        {"input_sig", input_sig},
                        {"output_sig", output_sig},
                        {"cost_per_call", cost_per_call},
                        {"latency_est", latency_est},
                        {"quality_est", quality_est},
                        {"inclusion_rule", inclusion_rule.str()},
                        {"exclusion_rule", exclusion_rule.str()},
                        {"worker_count", worker_count},
                        {"available", available},
                        {"kind", kind},
                        {"params", params}};
}

AgentRecord AgentRecord::from_json(const nlohmann::json& j) {
  AgentRecord r;
  r.name = j.at("name").get<std::string>();
  r.description = j.value("description", std::string{});
  if (j.contains("capabilities")) r.capabilities = j.at("capabilities").get<std::set<std::string>>();
  if (j.contains("input_sig")) r.input_sig = j.at("input_sig").get<std::vector<std::string>>();
  if (j.contains("output_sig")) r.output_sig = j.at("output_sig").get<std::vector<std::string>>();
  r.cost_per_call = j.value("cost_per_call", 0.0);
  r.latency_est = j.value("latency_est", std::int64_t{0});
  r.quality_est = j.value("quality_est", 1.0);
  if (j.contains("inclusion_rule")) {
    r.inclusion_rule = TagExpr::parse(j.at("inclusion_rule").get<std::string>());
  } else {
    // Default: triggered by instruction streams addressed to this agent.
    r.inclusion_rule = TagExpr::conj(TagExpr::tag("instruction"), TagExpr::tag(tag_token(r.name)));
  }
  if (j.contains("exclusion_rule")) {
    r.exclusion_rule = TagExpr::parse(j.at("exclusion_rule").get<std::string>());
  }
  r.worker_count = j.value("worker_count", 1);
  r.available = j.value("available", true);
  r.kind = j.value("kind", std::string{});
  r.params = j.value("params", nlohmann::json::object());
  r.validate();
  return r;
}

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::RAW: return "RAW";
    case Granularity::SUMMARY: return "SUMMARY";
    case Granularity::SCHEMA: return "SCHEMA";
  }
  return "UNKNOWN";
}

Granularity granularity_from_string(const std::string& s) {
  if (s == "RAW" || s == "raw") return Granularity::RAW;
  if (s == "SUMMARY" || s == "summary") return Granularity::SUMMARY;
  if (s == "SCHEMA" || s == "schema") return Granularity::SCHEMA;
  throw ValidationError("unknown granularity: '" + s + "'");
}

std::string to_string(DataOp op) {
  switch (op) {
    case DataOp::DISCOVER: return "DISCOVER";
    case DataOp::QUERY: return "QUERY";
    case DataOp::EXTRACT: return "EXTRACT";
    case DataOp::SUMMARIZE: return "SUMMARIZE";
    case DataOp::JOIN: return "JOIN";
    case DataOp::COMPARE: return "COMPARE";
  }
  return "UNKNOWN";
}

DataOp data_op_from_string(const std::string& s) {
  std::string upper;
  for (char c : s) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (upper == "DISCOVER") return DataOp::DISCOVER;
  if (upper == "QUERY") return DataOp::QUERY;
  if (upper == "EXTRACT") return DataOp::EXTRACT;
  if (upper == "SUMMARIZE") return DataOp::SUMMARIZE;
  if (upper == "JOIN") return DataOp::JOIN;
  if (upper == "COMPARE") return DataOp::COMPARE;
  throw ValidationError("unknown data op: '" + s + "'");
}

nlohmann::json SchemaField::to_json() const {
  nlohmann::json j{{"name", name}, {"type", type}};
  if (!nested.empty()) j["nested"] = nested;
  return j;
}

SchemaField SchemaField::from_json(const nlohmann::json& j) {
  SchemaField f;
  if (j.is_string()) {
    f.name = j.get<std::string>();
    return f;
  }
  f.name = j.at("name").get<std::string>();
  f.type = j.value("type", std::string{"text"});
  if (j.contains("nested")) f.nested = j.at("nested").get<std::vector<std::string>>();
  return f;
}

bool DataAssetRecord::has_field(const std::string& field) const {
  return std::any_of(schema_fields.begin(), schema_fields.end(),
                     [&](const SchemaField& f) { return f.name == field; });
}

bool DataAssetRecord::covers_field(const std::string& field) const {
  for (const auto& f : schema_fields) {
    if (f.name == field) return true;
    if (std::find(f.nested.begin(), f.nested.end(), field) != f.nested.end()) return true;
  }
  return false;
}

void DataAssetRecord::validate() const {
  if (name.empty()) throw ValidationError("asset name must not be empty");
  if (quality_est < 0.0 || quality_est > 1.0) {
    throw ValidationError("asset '" + name + "': quality_est must be in [0,1]");
  }
  if (access_cost < 0.0) {
    throw ValidationError("asset '" + name + "': access_cost must be non-negative");
  }
  if (latency_est < 0) {
    throw ValidationError("asset '" + name + "': latency_est must be non-negative");
  }
  for (const auto& key : join_keys) {
    if (!has_field(key)) {
      throw ValidationError("asset '" + name + "': join key '" + key +
                            "' is not a schema field");
    }
  }
}

nlohmann::json DataAssetRecord::to_json() const {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : schema_fields) fields.push_back(f.to_json());
  std::set<std::string> ops;
  for (DataOp op : supported_ops) ops.insert(to_string(op));
  return nlohmann::json{{"name", name},
                        {"granularity", to_string(granularity)},
                        {"schema_fields", fields},
                        {"row_count", row_count},
                        {"access_cost", access_cost},
                        {"latency_est", latency_est},
                        {"quality_est", quality_est},
                        {"join_keys", join_keys},
                        {"supported_ops", ops},
                        {"available", available},
                        {"table", table}};
}

DataAssetRecord DataAssetRecord::from_json(const nlohmann::json& j) {
  DataAssetRecord r;
  r.name = j.at("name").get<std::string>();
  if (j.contains("granularity")) {
    r.granularity = granularity_from_string(j.at("granularity").get<std::string>());
  }
  if (j.contains("schema_fields")) {
    for (const auto& f : j.at("schema_fields")) r.schema_fields.push_back(SchemaField::from_json(f));
  }
  r.row_count = j.value("row_count", std::uint64_t{0});
  r.access_cost = j.value("access_cost", 0.0);
  r.latency_est = j.value("latency_est", std::int64_t{0});
  r.quality_est = j.value("quality_est", 1.0);
  if (j.contains("join_keys")) r.join_keys = j.at("join_keys").get<std::set<std::string>>();
  if (j.contains("supported_ops")) {
    for (const auto& op : j.at("supported_ops")) {
      r.supported_ops.insert(data_op_from_string(op.get<std::string>()));
    }
  } else {
    r.supported_ops = {DataOp::DISCOVER, DataOp::QUERY, DataOp::EXTRACT,
                       DataOp::SUMMARIZE, DataOp::JOIN, DataOp::COMPARE};
  }
  r.available = j.value("available", true);
  r.table = j.value("table", r.name);
  r.validate();
  return r;
}

std::string AgentRegistry::register_agent(AgentRecord record) {
  record.validate();
  std::unique_lock lock(mutex_);
  if (records_.count(record.name)) {
    throw DuplicateError("agent '" + record.name + "' already registered");
  }
  const std::string name = record.name;
  records_.emplace(name, std::move(record));
  return name;
}

AgentRecord AgentRegistry::get(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(name);
  if (it == records_.end()) throw NotFoundError("agent '" + name + "' not registered");
  return it->second;
}

bool AgentRegistry::contains(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return records_.count(name) > 0;
}

std::vector<AgentRecord> AgentRegistry::all() const {
  std::shared_lock lock(mutex_);
  std::vector<AgentRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(r);
  return out;
}

double AgentRegistry::score(const AgentRecord& record, const std::string& capability) {
  if (record.capabilities.count(capability)) return 1.0;
  std::set<std::string> doc = lex_tokens(record.description);
  for (const auto& c : record.capabilities) {
    auto toks = lex_tokens(c);
    doc.insert(toks.begin(), toks.end());
  }
  const std::set<std::string> query = lex_tokens(capability);
  if (query.empty() || doc.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& q : query) inter += doc.count(q);
  const std::size_t uni = query.size() + doc.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<AgentRecord> AgentRegistry::search(const std::string& capability,
                                               const std::optional<std::string>& input_type,
                                               const std::optional<std::string>& output_type) const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<double, const AgentRecord*>> scored;
  for (const auto& [_, r] : records_) {
    if (!r.available) continue;
    if (input_type && !r.input_sig.empty() &&
        std::find(r.input_sig.begin(), r.input_sig.end(), *input_type) == r.input_sig.end()) {
      continue;
    }
    if (output_type && !r.output_sig.empty() &&
        std::find(r.output_sig.begin(), r.output_sig.end(), *output_type) == r.output_sig.end()) {
      continue;
    }
    const double s = score(r, capability);
    if (s <= 0.0) continue;
    scored.emplace_back(s, &r);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->name < b.second->name;
  });
  std::vector<AgentRecord> out;
  out.reserve(scored.size());
  for (const auto& [_, r] : scored) out.push_back(*r);
  return out;
}

std::string DataRegistry::register_asset(DataAssetRecord record) {
  record.validate();
  if (record.table.empty()) record.table = record.name;
  std::unique_lock lock(mutex_);
  if (records_.count(record.name)) {
    throw DuplicateError("asset '" + record.name + "' already registered");
  }
  const std::string name = record.name;
  records_.emplace(name, std::move(record));
  return name;
}

DataAssetRecord DataRegistry::get(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(name);
  if (it == records_.end()) throw NotFoundError("asset '" + name + "' not registered");
  return it->second;
}

bool DataRegistry::contains(const std::string& name) const {
  std::shared_lock lock(mutex_);
  return records_.count(name) > 0;
}

std::vector<DataAssetRecord> DataRegistry::all() const {
  std::shared_lock lock(mutex_);
  std::vector<DataAssetRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(r);
  return out;
}

std::vector<DataAssetRecord> DataRegistry::search(const std::vector<std::string>& required_fields,
                                                  DataOp op) const {
  if (required_fields.empty()) {
    throw ValidationError("search_assets requires a non-empty field list");
  }
  std::shared_lock lock(mutex_);
  std::vector<std::pair<double, const DataAssetRecord*>> scored;
  for (const auto& [_, r] : records_) {
    if (!r.available) continue;
    if (!r.supported_ops.count(op)) continue;
    const bool covers = std::all_of(required_fields.begin(), required_fields.end(),
                                    [&](const std::string& f) { return r.covers_field(f); });
    if (!covers) continue;
    scored.emplace_back(r.quality_est / (1.0 + r.access_cost), &r);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->name < b.second->name;
  });
  std::vector<DataAssetRecord> out;
  out.reserve(scored.size());
  for (const auto& [_, r] : scored) out.push_back(*r);
  return out;
}

}  // namespace weft
