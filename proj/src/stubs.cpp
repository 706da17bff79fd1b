#include "weft/stubs.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "weft/error.hpp"
#include "weft/tags.hpp"

namespace weft {

namespace {

std::string upper(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

bool numeric(const nlohmann::json& v) { return v.is_number(); }

double as_number(const nlohmann::json& v) { return v.get<double>(); }

std::string as_text(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

const Table& fixture(const ProcessorContext& ctx, const std::string& name) {
  if (!ctx.fixtures) throw StateError("no fixture store available");
  return ctx.fixtures->get(name);
}

nlohmann::json record_input(const Payload& input) {
  if (input.kind() != PayloadKind::RECORD) {
    throw ValidationError("expected a record input, got " + to_string(input.kind()));
  }
  return input.as_record();
}

Table table_arg(const nlohmann::json& rec, const std::string& key) {
  if (!rec.contains(key)) throw ValidationError("missing parameter '" + key + "'");
  return Table::from_json(rec.at(key));
}

ProcessorEntry data_entry(Payload payload) {
  ProcessorEntry e;
  e.kind = MessageKind::DATA;
  e.payload = std::move(payload);
  return e;
}

// Jaccard similarity between the token sets of two skill strings.
double skill_jaccard(const std::string& a, const std::string& b) {
  const std::set<std::string> ta = lex_tokens(a);
  const std::set<std::string> tb = lex_tokens(b);
  if (ta.empty() && tb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : ta) inter += tb.count(t);
  const std::size_t uni = ta.size() + tb.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

bool eval_predicate(const nlohmann::json& value, const std::string& predicate) {
  if (predicate.empty()) throw ValidationError("empty predicate");
  std::string op;
  std::string lit;
  if (predicate.size() >= 2 &&
      (predicate.substr(0, 2) == ">=" || predicate.substr(0, 2) == "<=" ||
       predicate.substr(0, 2) == "!=")) {
    op = predicate.substr(0, 2);
    lit = predicate.substr(2);
  } else if (predicate[0] == '=' || predicate[0] == '>' || predicate[0] == '<' ||
             predicate[0] == '~') {
    op = predicate.substr(0, 1);
    lit = predicate.substr(1);
  } else {
    throw ValidationError("malformed predicate '" + predicate + "'");
  }

  char* end = nullptr;
  const double lit_num = std::strtod(lit.c_str(), &end);
  const bool lit_is_num = !lit.empty() && end == lit.c_str() + lit.size();

  if (op == "~") {
    const auto tokens = lex_tokens(as_text(value));
    const auto needle = lex_tokens(lit);
    return std::all_of(needle.begin(), needle.end(),
                       [&](const std::string& t) { return tokens.count(t) > 0; });
  }

  int cmp;
  if (numeric(value) && lit_is_num) {
    const double v = as_number(value);
    cmp = v < lit_num ? -1 : (v > lit_num ? 1 : 0);
  } else {
    const std::string v = as_text(value);
    cmp = v < lit ? -1 : (v > lit ? 1 : 0);
  }

  if (op == "=") return cmp == 0;
  if (op == "!=") return cmp != 0;
  if (op == ">") return cmp > 0;
  if (op == ">=") return cmp >= 0;
  if (op == "<") return cmp < 0;
  if (op == "<=") return cmp <= 0;
  throw ValidationError("malformed predicate '" + predicate + "'");
}

Table project_table(const Table& in, const std::vector<std::string>& fields) {
  Table out;
  out.fields = fields;
  for (const auto& row : in.rows) {
    nlohmann::json slim = nlohmann::json::object();
    for (const auto& f : fields) {
      if (row.contains(f)) slim[f] = row.at(f);
    }
    out.rows.push_back(std::move(slim));
  }
  return out;
}

Table filter_table(const Table& in, const nlohmann::json& filters) {
  Table out;
  out.fields = in.fields;
  for (const auto& row : in.rows) {
    bool keep = true;
    for (const auto& f : filters) {
      const std::string field = f.at("field").get<std::string>();
      const std::string pred = f.at("pred").get<std::string>();
      if (!row.contains(field) || !eval_predicate(row.at(field), pred)) {
        keep = false;
        break;
      }
    }
    if (keep) out.rows.push_back(row);
  }
  return out;
}

Table inner_join(const Table& left, const Table& right, const std::vector<std::string>& keys) {
  Table out;
  out.fields = left.fields;
  for (const auto& f : right.fields) {
    if (std::find(out.fields.begin(), out.fields.end(), f) == out.fields.end()) {
      out.fields.push_back(f);
    }
  }
  for (const auto& lrow : left.rows) {
    for (const auto& rrow : right.rows) {
      bool match = true;
      for (const auto& k : keys) {
        if (!lrow.contains(k) || !rrow.contains(k) || lrow.at(k) != rrow.at(k)) {
          match = false;
          break;
        }
      }
      if (!match) continue;
      nlohmann::json merged = lrow;
      for (auto it = rrow.begin(); it != rrow.end(); ++it) {
        if (!merged.contains(it.key())) merged[it.key()] = it.value();
      }
      out.rows.push_back(std::move(merged));
    }
  }
  return out;
}

Table summarize_table(const Table& in, const std::vector<std::string>& targets) {
  Table out;
  out.fields = targets;
  nlohmann::json row = nlohmann::json::object();
  const std::vector<std::string> aggs = {"avg", "sum", "min", "max"};
  for (const auto& t : targets) {
    if (t == "count") {
      row[t] = static_cast<std::int64_t>(in.rows.size());
      continue;
    }
    bool derived = false;
    for (const auto& agg : aggs) {
      const std::string prefix = agg + "_";
      if (t.rfind(prefix, 0) == 0) {
        const std::string field = t.substr(prefix.size());
        const bool have = std::find(in.fields.begin(), in.fields.end(), field) != in.fields.end();
        if (have) {
          double acc = 0.0;
          double best = 0.0;
          std::size_t n = 0;
          for (const auto& r : in.rows) {
            if (!r.contains(field) || !r.at(field).is_number()) continue;
            const double v = r.at(field).get<double>();
            if (n == 0) best = v;
            acc += v;
            best = (agg == "min") ? std::min(best, v) : std::max(best, v);
            ++n;
          }
          if (n == 0) {
            row[t] = nullptr;
          } else if (agg == "avg") {
            row[t] = acc / static_cast<double>(n);
          } else if (agg == "sum") {
            row[t] = acc;
          } else {
            row[t] = best;
          }
          derived = true;
          break;
        }
      }
    }
    if (derived) continue;
    // Pass-through: precomputed summary fields take the first row's value.
    if (!in.rows.empty() && in.rows.front().contains(t)) {
      row[t] = in.rows.front().at(t);
    } else {
      row[t] = nullptr;
    }
  }
  out.rows.push_back(std::move(row));
  return out;
}

nlohmann::json compare_tables(const Table& left, const Table& right,
                              const std::vector<std::string>& keys) {
  std::set<std::string> lf(left.fields.begin(), left.fields.end());
  std::set<std::string> rf(right.fields.begin(), right.fields.end());
  nlohmann::json only_left = nlohmann::json::array();
  nlohmann::json only_right = nlohmann::json::array();
  for (const auto& f : lf) {
    if (!rf.count(f)) only_left.push_back(f);
  }
  for (const auto& f : rf) {
    if (!lf.count(f)) only_right.push_back(f);
  }

  auto key_of = [&](const nlohmann::json& row) {
    nlohmann::json k = nlohmann::json::object();
    for (const auto& key : keys) k[key] = row.contains(key) ? row.at(key) : nullptr;
    return k;
  };

  std::vector<std::string> shared;
  for (const auto& f : left.fields) {
    if (rf.count(f) && std::find(keys.begin(), keys.end(), f) == keys.end()) {
      shared.push_back(f);
    }
  }

  nlohmann::json mismatches = nlohmann::json::array();
  nlohmann::json left_only_rows = nlohmann::json::array();
  nlohmann::json right_only_rows = nlohmann::json::array();

  for (const auto& lrow : left.rows) {
    const nlohmann::json k = key_of(lrow);
    const nlohmann::json* matched = nullptr;
    for (const auto& rrow : right.rows) {
      if (key_of(rrow) == k) {
        matched = &rrow;
        break;
      }
    }
    if (!matched) {
      left_only_rows.push_back(k);
      continue;
    }
    for (const auto& f : shared) {
      const nlohmann::json lv = lrow.contains(f) ? lrow.at(f) : nlohmann::json();
      const nlohmann::json rv = matched->contains(f) ? matched->at(f) : nlohmann::json();
      if (lv != rv) {
        mismatches.push_back({{"keys", k}, {"field", f}, {"left", lv}, {"right", rv}});
      }
    }
  }
  for (const auto& rrow : right.rows) {
    const nlohmann::json k = key_of(rrow);
    const bool found = std::any_of(left.rows.begin(), left.rows.end(),
                                   [&](const nlohmann::json& lrow) { return key_of(lrow) == k; });
    if (!found) right_only_rows.push_back(k);
  }

  return nlohmann::json{{"only_in_left_fields", only_left},
                        {"only_in_right_fields", only_right},
                        {"mismatches", mismatches},
                        {"left_only_rows", left_only_rows},
                        {"right_only_rows", right_only_rows}};
}

Table extract_nested(const Table& in, const std::string& record_field,
                     const std::vector<std::string>& subfields) {
  Table out;
  for (const auto& f : in.fields) {
    if (f != record_field) out.fields.push_back(f);
  }
  for (const auto& sf : subfields) {
    if (std::find(out.fields.begin(), out.fields.end(), sf) == out.fields.end()) {
      out.fields.push_back(sf);
    }
  }
  for (const auto& row : in.rows) {
    nlohmann::json flat = nlohmann::json::object();
    for (const auto& f : in.fields) {
      if (f != record_field && row.contains(f)) flat[f] = row.at(f);
    }
    const nlohmann::json nested =
        row.contains(record_field) ? row.at(record_field) : nlohmann::json::object();
    for (const auto& sf : subfields) {
      flat[sf] = nested.is_object() && nested.contains(sf) ? nested.at(sf) : nlohmann::json();
    }
    out.rows.push_back(std::move(flat));
  }
  return out;
}

namespace {

ProcessorFn make_uppercase() {
  return [](const Payload& input, const ProcessorContext&) {
    std::string text;
    if (input.kind() == PayloadKind::TEXT) {
      text = input.as_text();
    } else if (input.kind() == PayloadKind::RECORD && input.as_record().contains("text")) {
      text = input.as_record().at("text").get<std::string>();
    } else {
      throw ValidationError("uppercase expects text input");
    }
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::text(upper(text))));
    out.quality = 1.0;
    return out;
  };
}

ProcessorFn make_job_search(const nlohmann::json& params) {
  const std::string table_name = params.value("table", std::string{"jobs"});
  return [table_name](const Payload& input, const ProcessorContext& ctx) {
    const Table& jobs = fixture(ctx, table_name);
    nlohmann::json rec = record_input(input);
    if (rec.contains("query")) rec = rec.at("query");

    Table result;
    result.fields = jobs.fields;
    for (const auto& row : jobs.rows) {
      bool keep = true;
      for (auto it = rec.begin(); it != rec.end(); ++it) {
        if (it.key() == "skill") {
          const auto tokens = lex_tokens(row.contains("skills") ? as_text(row.at("skills")) : "");
          const auto want = lex_tokens(as_text(it.value()));
          const bool all = std::all_of(want.begin(), want.end(), [&](const std::string& t) {
            return tokens.count(t) > 0;
          });
          if (!all) keep = false;
        } else if (!row.contains(it.key()) || row.at(it.key()) != it.value()) {
          keep = false;
        }
        if (!keep) break;
      }
      if (keep) result.rows.push_back(row);
    }
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result.to_json())));
    out.quality = 1.0;
    return out;
  };
}

ProcessorFn make_match_predict(const nlohmann::json& params) {
  const std::string cand_table = params.value("candidates", std::string{"candidates"});
  return [cand_table](const Payload& input, const ProcessorContext& ctx) {
    const nlohmann::json rec = record_input(input);
    const Table& candidates = fixture(ctx, cand_table);
    if (!rec.contains("candidate")) throw ValidationError("missing parameter 'candidate'");
    const nlohmann::json cand_id = rec.at("candidate");

    const nlohmann::json* cand = nullptr;
    for (const auto& row : candidates.rows) {
      if (row.contains("cand_id") && row.at("cand_id") == cand_id) {
        cand = &row;
        break;
      }
    }
    if (!cand) throw NotFoundError("candidate '" + as_text(cand_id) + "' not in fixture");
    const std::string cand_skills = cand->contains("skills") ? as_text(cand->at("skills")) : "";

    auto score_job = [&](const nlohmann::json& job) {
      const std::string job_skills = job.contains("skills") ? as_text(job.at("skills")) : "";
      return skill_jaccard(job_skills, cand_skills);
    };

    ProcessorOutput out;
    if (rec.contains("job")) {
      const double s = score_job(rec.at("job"));
      out.entries.push_back(data_entry(Payload::record({{"score", s}})));
      out.quality = s;
      return out;
    }

    const Table jobs = table_arg(rec, "jobs");
    nlohmann::json scores = nlohmann::json::array();
    nlohmann::json best;
    double best_score = -1.0;
    for (const auto& job : jobs.rows) {
      const double s = score_job(job);
      nlohmann::json entry = {{"score", s}};
      if (job.contains("job_id")) entry["job_id"] = job.at("job_id");
      scores.push_back(entry);
      if (s > best_score) {
        best_score = s;
        best = job;
        best["score"] = s;
      }
    }
    nlohmann::json result = {{"scores", scores}, {"best", best_score < 0 ? nlohmann::json() : best}};
    out.entries.push_back(data_entry(Payload::record(std::move(result))));
    out.quality = best_score < 0 ? 0.0 : best_score;
    return out;
  };
}

ProcessorFn make_llm_stub(const nlohmann::json& params) {
  const std::string tmpl = params.value("template", std::string{"{input}"});
  const double quality = params.value("quality", 1.0);
  const std::optional<double> declared_cost =
      params.contains("declared_cost") ? std::optional<double>(params.at("declared_cost").get<double>())
                                       : std::nullopt;
  const bool fail = params.value("fail", false);
  return [tmpl, quality, declared_cost, fail](const Payload& input, const ProcessorContext&) {
    if (fail) throw StateError("llm_stub configured to fail");
    std::string text;
    if (input.kind() == PayloadKind::TEXT) {
      text = input.as_text();
    } else if (input.kind() == PayloadKind::RECORD) {
      const auto& rec = input.as_record();
      text = rec.contains("text") && rec.at("text").is_string() ? rec.at("text").get<std::string>()
                                                                 : rec.dump();
    } else {
      text = std::to_string(input.as_int());
    }
    std::string rendered = tmpl;
    const std::string placeholder = "{input}";
    for (std::size_t pos = rendered.find(placeholder); pos != std::string::npos;
         pos = rendered.find(placeholder, pos)) {
      rendered.replace(pos, placeholder.size(), text);
      pos += text.size();
    }
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::text(std::move(rendered))));
    out.quality = quality;
    out.declared_cost = declared_cost;
    return out;
  };
}

ProcessorFn make_query_stub(const nlohmann::json& params) {
  const std::string default_table = params.value("table", std::string{});
  return [default_table](const Payload& input, const ProcessorContext& ctx) {
    const nlohmann::json rec = record_input(input);
    const std::string table_name = rec.value("table", default_table);
    if (table_name.empty()) throw ValidationError("missing parameter 'table'");
    const Table& table = fixture(ctx, table_name);
    Table result = filter_table(table, rec.value("filters", nlohmann::json::array()));
    const auto projection = rec.value("fields", std::vector<std::string>{});
    if (!projection.empty()) result = project_table(result, projection);
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result.to_json())));
    out.quality = 1.0;
    if (rec.contains("access_cost")) out.declared_cost = rec.at("access_cost").get<double>();
    return out;
  };
}

ProcessorFn make_discover_stub() {
  return [](const Payload& input, const ProcessorContext&) {
    const nlohmann::json rec = record_input(input);
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(
        {{"assets", rec.value("assets", nlohmann::json::array())},
         {"fields", rec.value("fields", nlohmann::json::array())}})));
    out.quality = 1.0;
    return out;
  };
}

ProcessorFn make_extract_stub() {
  return [](const Payload& input, const ProcessorContext&) {
    const nlohmann::json rec = record_input(input);
    const Table in = table_arg(rec, "input");
    const Table result = extract_nested(in, rec.at("record_field").get<std::string>(),
                                        rec.value("subfields", std::vector<std::string>{}));
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result.to_json())));
    out.quality = 1.0;
    if (rec.contains("access_cost")) out.declared_cost = rec.at("access_cost").get<double>();
    return out;
  };
}

ProcessorFn make_join_stub() {
  return [](const Payload& input, const ProcessorContext&) {
    const nlohmann::json rec = record_input(input);
    const Table left = table_arg(rec, "left");
    const Table right = table_arg(rec, "right");
    const Table result =
        inner_join(left, right, rec.value("keys", std::vector<std::string>{}));
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result.to_json())));
    out.quality = 1.0;
    return out;
  };
}

ProcessorFn make_summarize_stub() {
  return [](const Payload& input, const ProcessorContext&) {
    const nlohmann::json rec = record_input(input);
    const Table in = table_arg(rec, "input");
    const Table result = summarize_table(in, rec.value("targets", std::vector<std::string>{}));
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result.to_json())));
    out.quality = 1.0;
    return out;
  };
}

ProcessorFn make_compare_stub() {
  return [](const Payload& input, const ProcessorContext&) {
    const nlohmann::json rec = record_input(input);
    const Table left = table_arg(rec, "left");
    const Table right = table_arg(rec, "right");
    const nlohmann::json result =
        compare_tables(left, right, rec.value("keys", std::vector<std::string>{}));
    ProcessorOutput out;
    out.entries.push_back(data_entry(Payload::record(result)));
    out.quality = 1.0;
    return out;
  };
}

}  // namespace

bool is_known_stub_kind(const std::string& kind) {
  static const std::set<std::string> kinds = {
      "uppercase",      "job_search", "match_predict", "llm_stub",  "summarize_stub",
      "join_stub",      "compare_stub", "extract_stub", "query_stub", "discover_stub"};
  return kinds.count(kind) > 0;
}

ProcessorFn make_stub_processor(const std::string& kind, const nlohmann::json& params) {
  if (kind == "uppercase") return make_uppercase();
  if (kind == "job_search") return make_job_search(params);
  if (kind == "match_predict") return make_match_predict(params);
  if (kind == "llm_stub") return make_llm_stub(params);
  if (kind == "query_stub") return make_query_stub(params);
  if (kind == "discover_stub") return make_discover_stub();
  if (kind == "extract_stub") return make_extract_stub();
  if (kind == "join_stub") return make_join_stub();
  if (kind == "summarize_stub") return make_summarize_stub();
  if (kind == "compare_stub") return make_compare_stub();
  throw ValidationError("unknown stub kind: '" + kind + "'");
}

}  // namespace weft
