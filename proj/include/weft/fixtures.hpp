#pragma once
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace weft {

// In-memory tabular fixture: a header of field names plus one JSON object
// per row. Stands in for lake/warehouse data behind the data registry.
struct Table {
  std::vector<std::string> fields;
  std::vector<nlohmann::json> rows;  // objects keyed by field name

  nlohmann::json to_json() const;
  static Table from_json(const nlohmann::json& j);
};

// Parses delimiter-separated text: first line is the header, one record
// per following line. Cells parse as integers when they look like one, as
// JSON when they start with '{' or '[', as text otherwise.
Table parse_table(const std::string& text, char delimiter = '\t');

Table load_table_file(const std::string& path, char delimiter = '\t');

// Named tables shared read-only by stub processors during a run.
class FixtureStore {
 public:
  void put(const std::string& name, Table table);
  const Table& get(const std::string& name) const;  // throws NotFoundError
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Table> tables_;
};

}  // namespace weft
