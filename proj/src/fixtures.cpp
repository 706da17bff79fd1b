#include "weft/fixtures.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "weft/error.hpp"

namespace weft {

nlohmann::json Table::to_json() const {
  return nlohmann::json{{"fields", fields}, {"rows", rows}};
}

Table Table::from_json(const nlohmann::json& j) {
  Table t;
  t.fields = j.at("fields").get<std::vector<std::string>>();
  for (const auto& r : j.at("rows")) t.rows.push_back(r);
  return t;
}

namespace {

std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delimiter) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool looks_like_int(const std::string& s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

bool looks_like_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

nlohmann::json parse_cell(const std::string& cell) {
  if (looks_like_int(cell)) return std::stoll(cell);
  if (looks_like_number(cell)) return std::stod(cell);
  if (!cell.empty() && (cell[0] == '{' || cell[0] == '[')) {
    auto parsed = nlohmann::json::parse(cell, nullptr, false);
    if (!parsed.is_discarded()) return parsed;
  }
  return cell;
}

}  // namespace

Table parse_table(const std::string& text, char delimiter) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      t.fields = split(line, delimiter);
      header = false;
      continue;
    }
    const auto cells = split(line, delimiter);
    if (cells.size() != t.fields.size()) {
      throw ValidationError("table line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.fields.size()));
    }
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      row[t.fields[i]] = parse_cell(cells[i]);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.fields.empty()) throw ValidationError("table has no header row");
  return t;
}

Table load_table_file(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in.is_open()) throw NotFoundError("cannot open table file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str(), delimiter);
}

void FixtureStore::put(const std::string& name, Table table) {
  tables_[name] = std::move(table);
}

const Table& FixtureStore::get(const std::string& name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) throw NotFoundError("no fixture table named '" + name + "'");
  return it->second;
}

bool FixtureStore::contains(const std::string& name) const { return tables_.count(name) > 0; }

std::vector<std::string> FixtureStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : tables_) out.push_back(name);
  return out;
}

}  // namespace weft
