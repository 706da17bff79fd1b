#include "weft/data_planner.hpp"

#include <algorithm>
#include <cctype>

#include "weft/error.hpp"
#include "weft/stubs.hpp"
#include "weft/tags.hpp"

namespace weft {

std::string to_string(Aggregate a) {
  switch (a) {
    case Aggregate::NONE: return "NONE";
    case Aggregate::SUMMARIZE: return "SUMMARIZE";
    case Aggregate::COMPARE: return "COMPARE";
  }
  return "UNKNOWN";
}

Aggregate aggregate_from_string(const std::string& s) {
  std::string upper;
  for (char c : s) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (upper == "NONE" || upper.empty()) return Aggregate::NONE;
  if (upper == "SUMMARIZE") return Aggregate::SUMMARIZE;
  if (upper == "COMPARE") return Aggregate::COMPARE;
  throw ValidationError("unknown aggregate: '" + s + "'");
}

void RetrievalRequest::validate() const {
  if (target_fields.empty()) throw ValidationError("target_fields must not be empty");
  constraints.validate();
}

nlohmann::json RetrievalRequest::to_json() const {
  nlohmann::json filters_j = nlohmann::json::array();
  for (const auto& [field, pred] : filters) {
    filters_j.push_back({{"field", field}, {"pred", pred}});
  }
  return nlohmann::json{{"target_fields", target_fields},
                        {"filters", filters_j},
                        {"aggregate", to_string(aggregate)},
                        {"constraints", constraints.to_json()}};
}

RetrievalRequest RetrievalRequest::from_json(const nlohmann::json& j) {
  RetrievalRequest r;
  r.target_fields = j.at("target_fields").get<std::vector<std::string>>();
  if (j.contains("filters")) {
    for (const auto& f : j.at("filters")) {
      r.filters.emplace_back(f.at("field").get<std::string>(), f.at("pred").get<std::string>());
    }
  }
  if (j.contains("aggregate")) {
    r.aggregate = aggregate_from_string(j.at("aggregate").get<std::string>());
  }
  if (j.contains("constraints")) r.constraints = Constraints::from_json(j.at("constraints"));
  r.validate();
  return r;
}

namespace data_planner {

namespace {

const std::vector<std::string> kAggPrefixes = {"avg_", "sum_", "min_", "max_"};

std::optional<std::string> derived_base_field(const std::string& field) {
  for (const auto& p : kAggPrefixes) {
    if (field.rfind(p, 0) == 0 && field.size() > p.size()) return field.substr(p.size());
  }
  return std::nullopt;
}

using task_planner::node_timeout;

// The record field of `asset` whose nested subfields include `field`.
std::optional<std::string> nested_container(const DataAssetRecord& asset,
                                            const std::string& field) {
  for (const auto& f : asset.schema_fields) {
    if (std::find(f.nested.begin(), f.nested.end(), field) != f.nested.end()) return f.name;
  }
  return std::nullopt;
}

struct Cover {
  std::vector<DataAssetRecord> assets;  // join order
  double cost = 0.0;
};

}  // namespace

std::string stub_agent_for(DataOp op) {
  switch (op) {
    case DataOp::DISCOVER: return "discover_stub";
    case DataOp::QUERY: return "query_stub";
    case DataOp::EXTRACT: return "extract_stub";
    case DataOp::SUMMARIZE: return "summarize_stub";
    case DataOp::JOIN: return "join_stub";
    case DataOp::COMPARE: return "compare_stub";
  }
  return "unknown_stub";
}

bool asset_covers(const DataAssetRecord& asset, const std::string& field, Aggregate aggregate) {
  if (asset.covers_field(field)) return true;
  if (aggregate == Aggregate::SUMMARIZE) {
    if (field == "count") return true;
    if (auto base = derived_base_field(field)) return asset.covers_field(*base);
  }
  return false;
}

PlanDag plan_retrieval(const RetrievalRequest& request, const DataRegistry& registry,
                       const Constraints& constraints) {
  request.validate();
  constraints.validate();

  std::vector<std::string> required = request.target_fields;
  for (const auto& [field, _] : request.filters) {
    if (std::find(required.begin(), required.end(), field) == required.end()) {
      required.push_back(field);
    }
  }

  // Candidate assets: queryable and contributing at least one required field.
  std::vector<DataAssetRecord> candidates;
  for (const auto& asset : registry.all()) {
    if (!asset.available || !asset.supported_ops.count(DataOp::QUERY)) continue;
    const bool contributes = std::any_of(required.begin(), required.end(), [&](const auto& f) {
      return asset_covers(asset, f, request.aggregate);
    });
    if (contributes) candidates.push_back(asset);
  }

  for (const auto& field : required) {
    const bool coverable = std::any_of(candidates.begin(), candidates.end(), [&](const auto& a) {
      return asset_covers(a, field, request.aggregate);
    });
    if (!coverable) throw InfeasibleError(InfeasibleError::Reason::FIELD, field);
  }

  // Cap the exhaustive enumeration at the 8 best-ranked candidates.
  if (candidates.size() > 8) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      const double sa = a.quality_est / (1.0 + a.access_cost);
      const double sb = b.quality_est / (1.0 + b.access_cost);
      if (sa != sb) return sa > sb;
      return a.name < b.name;
    });
    candidates.resize(8);
    for (const auto& field : required) {
      const bool coverable = std::any_of(candidates.begin(), candidates.end(), [&](const auto& a) {
        return asset_covers(a, field, request.aggregate);
      });
      if (!coverable) throw InfeasibleError(InfeasibleError::Reason::FIELD, field);
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });

  // Deterministic join order for a chosen subset: start from the
  // lexicographically first asset, then repeatedly add the first remaining
  // asset sharing a join key with what is already joined. Returns nullopt
  // when the subset is not join-connected.
  auto join_order = [](std::vector<DataAssetRecord> subset)
      -> std::optional<std::vector<DataAssetRecord>> {
    if (subset.size() <= 1) return subset;
    std::vector<DataAssetRecord> ordered;
    std::set<std::string> joined_keys;
    ordered.push_back(subset.front());
    joined_keys = subset.front().join_keys;
    subset.erase(subset.begin());
    while (!subset.empty()) {
      bool advanced = false;
      for (std::size_t i = 0; i < subset.size(); ++i) {
        std::vector<std::string> shared;
        for (const auto& k : subset[i].join_keys) {
          if (joined_keys.count(k)) shared.push_back(k);
        }
        if (!shared.empty()) {
          joined_keys.insert(subset[i].join_keys.begin(), subset[i].join_keys.end());
          ordered.push_back(subset[i]);
          subset.erase(subset.begin() + static_cast<std::ptrdiff_t>(i));
          advanced = true;
          break;
        }
      }
      if (!advanced) return std::nullopt;
    }
    return ordered;
  };

  // Exhaustive cover search: cheapest total access cost, ties by fewer
  // assets then lexicographic names.
  std::optional<Cover> best;
  bool saw_cover = false;
  const std::size_t n = candidates.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
    std::vector<DataAssetRecord> subset;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) subset.push_back(candidates[i]);
    }
    const bool covers_all = std::all_of(required.begin(), required.end(), [&](const auto& f) {
      return std::any_of(subset.begin(), subset.end(),
                         [&](const auto& a) { return asset_covers(a, f, request.aggregate); });
    });
    if (!covers_all) continue;
    if (request.aggregate == Aggregate::COMPARE && subset.size() != 2) continue;
    saw_cover = true;
    auto ordered = join_order(subset);
    if (!ordered) continue;
    Cover cover;
    cover.assets = std::move(*ordered);
    cover.cost = 0.0;
    for (const auto& a : cover.assets) cover.cost += a.access_cost;
    const bool better =
        !best || cover.cost < best->cost ||
        (cover.cost == best->cost && cover.assets.size() < best->assets.size()) ||
        (cover.cost == best->cost && cover.assets.size() == best->assets.size() && [&] {
          std::vector<std::string> an, bn;
          for (const auto& a : cover.assets) an.push_back(a.name);
          for (const auto& b : best->assets) bn.push_back(b.name);
          std::sort(an.begin(), an.end());
          std::sort(bn.begin(), bn.end());
          return an < bn;
        }());
    if (better) best = std::move(cover);
  }
  if (!best) {
    if (request.aggregate == Aggregate::COMPARE && !saw_cover) {
      throw InfeasibleError(InfeasibleError::Reason::JOIN_KEY,
                            "compare requires two join-compatible assets");
    }
    throw InfeasibleError(InfeasibleError::Reason::JOIN_KEY,
                          "no join-connected asset cover exists");
  }

  // Assemble the pipeline.
  PlanDag dag;
  auto add_node = [&](PlanNode n) {
    dag.nodes.push_back(std::move(n));
    return dag.nodes.back().node_id;
  };

  nlohmann::json asset_names = nlohmann::json::array();
  for (const auto& a : best->assets) asset_names.push_back(a.name);

  PlanNode discover;
  discover.node_id = "discover";
  discover.step_id = "discover";
  discover.agent = stub_agent_for(DataOp::DISCOVER);
  discover.data_op = to_string(DataOp::DISCOVER);
  discover.params.emplace("assets",
                          ParamBinding::lit(Payload::record(asset_names)));
  discover.params.emplace("fields", ParamBinding::lit(Payload::record(request.target_fields)));
  discover.est_cost = 0.0;
  discover.est_latency = 0;
  discover.est_quality = 1.0;
  discover.timeout = node_timeout(0, constraints);
  const std::string discover_id = add_node(discover);

  // One query (plus optional extract) branch per chosen asset. Queries
  // project to the required fields this asset supplies: covered fields,
  // record containers of nested fields, aggregation bases, and the join
  // keys when several assets must be combined.
  std::vector<std::string> branch_tips;
  for (const auto& asset : best->assets) {
    nlohmann::json filters = nlohmann::json::array();
    for (const auto& [field, pred] : request.filters) {
      if (asset.has_field(field)) {
        filters.push_back({{"field", field}, {"pred", pred}});
      }
    }
    std::vector<std::string> projection;
    auto add_field = [&](const std::string& f) {
      if (std::find(projection.begin(), projection.end(), f) == projection.end()) {
        projection.push_back(f);
      }
    };
    for (const auto& field : required) {
      if (asset.has_field(field)) {
        add_field(field);
      } else if (auto container = nested_container(asset, field)) {
        add_field(*container);
      } else if (request.aggregate == Aggregate::SUMMARIZE) {
        if (auto base = derived_base_field(field); base && asset.has_field(*base)) {
          add_field(*base);
        }
      }
    }
    if (best->assets.size() > 1) {
      for (const auto& k : asset.join_keys) add_field(k);
    }

    PlanNode query;
    query.node_id = "query_" + asset.name;
    query.step_id = query.node_id;
    query.agent = stub_agent_for(DataOp::QUERY);
    query.data_op = to_string(DataOp::QUERY);
    query.asset = asset.name;
    query.params.emplace("table", ParamBinding::lit(Payload::text(asset.table)));
    query.params.emplace("filters", ParamBinding::lit(Payload::record(filters)));
    query.params.emplace("fields", ParamBinding::lit(Payload::record(projection)));
    query.params.emplace("access_cost", ParamBinding::lit(Payload::record(asset.access_cost)));
    query.est_cost = asset.access_cost;
    query.est_latency = asset.latency_est;
    query.est_quality = asset.quality_est;
    query.timeout = node_timeout(asset.latency_est, constraints);
    std::string tip = add_node(query);
    dag.edges.insert({discover_id, tip});

    // Required fields living inside a record field need an extract step.
    std::map<std::string, std::vector<std::string>> containers;
    for (const auto& field : required) {
      if (asset.has_field(field)) continue;
      if (auto container = nested_container(asset, field)) {
        containers[*container].push_back(field);
      }
    }
    for (const auto& [record_field, subfields] : containers) {
      PlanNode extract;
      extract.node_id = "extract_" + asset.name + "_" + record_field;
      extract.step_id = extract.node_id;
      extract.agent = stub_agent_for(DataOp::EXTRACT);
      extract.data_op = to_string(DataOp::EXTRACT);
      extract.asset = asset.name;
      extract.params.emplace("input", ParamBinding::output_of(tip));
      extract.params.emplace("record_field", ParamBinding::lit(Payload::text(record_field)));
      extract.params.emplace("subfields", ParamBinding::lit(Payload::record(subfields)));
      extract.params.emplace("access_cost",
                             ParamBinding::lit(Payload::record(asset.access_cost)));
      extract.est_cost = asset.access_cost;
      extract.est_latency = asset.latency_est;
      extract.est_quality = asset.quality_est;
      extract.timeout = node_timeout(asset.latency_est, constraints);
      const std::string eid = add_node(extract);
      dag.edges.insert({tip, eid});
      tip = eid;
    }
    branch_tips.push_back(tip);
  }

  std::string tip;
  if (request.aggregate == Aggregate::COMPARE) {
    std::vector<std::string> shared;
    for (const auto& k : best->assets[0].join_keys) {
      if (best->assets[1].join_keys.count(k)) shared.push_back(k);
    }
    PlanNode compare;
    compare.node_id = "compare";
    compare.step_id = "compare";
    compare.agent = stub_agent_for(DataOp::COMPARE);
    compare.data_op = to_string(DataOp::COMPARE);
    compare.params.emplace("left", ParamBinding::output_of(branch_tips[0]));
    compare.params.emplace("right", ParamBinding::output_of(branch_tips[1]));
    compare.params.emplace("keys", ParamBinding::lit(Payload::record(shared)));
    compare.est_quality = 1.0;
    compare.timeout = node_timeout(0, constraints);
    tip = add_node(compare);
    dag.edges.insert({branch_tips[0], tip});
    dag.edges.insert({branch_tips[1], tip});
  } else {
    tip = branch_tips.front();
    std::set<std::string> joined_keys = best->assets.front().join_keys;
    for (std::size_t i = 1; i < branch_tips.size(); ++i) {
      std::vector<std::string> shared;
      for (const auto& k : best->assets[i].join_keys) {
        if (joined_keys.count(k)) shared.push_back(k);
      }
      joined_keys.insert(best->assets[i].join_keys.begin(), best->assets[i].join_keys.end());
      PlanNode join;
      join.node_id = "join_" + std::to_string(i);
      join.step_id = join.node_id;
      join.agent = stub_agent_for(DataOp::JOIN);
      join.data_op = to_string(DataOp::JOIN);
      join.params.emplace("left", ParamBinding::output_of(tip));
      join.params.emplace("right", ParamBinding::output_of(branch_tips[i]));
      join.params.emplace("keys", ParamBinding::lit(Payload::record(shared)));
      join.est_quality = 1.0;
      join.timeout = node_timeout(0, constraints);
      const std::string jid = add_node(join);
      dag.edges.insert({tip, jid});
      dag.edges.insert({branch_tips[i], jid});
      tip = jid;
    }
    if (request.aggregate == Aggregate::SUMMARIZE) {
      PlanNode summarize;
      summarize.node_id = "summarize";
      summarize.step_id = "summarize";
      summarize.agent = stub_agent_for(DataOp::SUMMARIZE);
      summarize.data_op = to_string(DataOp::SUMMARIZE);
      summarize.params.emplace("input", ParamBinding::output_of(tip));
      summarize.params.emplace("targets",
                               ParamBinding::lit(Payload::record(request.target_fields)));
      summarize.est_quality = 1.0;
      summarize.timeout = node_timeout(0, constraints);
      const std::string sid = add_node(summarize);
      dag.edges.insert({tip, sid});
      tip = sid;
    }
  }

  dag.est_total = task_planner::estimate(dag);
  return dag;
}

void ensure_stub_agents(const PlanDag& plan, AgentRegistry& agents, Orchestrator& orch) {
  std::set<std::string> needed;
  for (const auto& node : plan.nodes) {
    if (!node.data_op.empty()) needed.insert(node.agent);
  }
  for (const auto& name : needed) {
    if (!agents.contains(name)) {
      AgentRecord rec;
      rec.name = name;
      rec.description = "data operation stub";
      const std::string op = name.substr(0, name.find("_stub"));
      rec.capabilities = {op};
      rec.inclusion_rule =
          TagExpr::conj(TagExpr::tag("instruction"), TagExpr::tag(tag_token(name)));
      rec.kind = name;
      rec.worker_count = 4;  // parallel query branches must not queue
      agents.register_agent(rec);
    }
    if (!orch.find_instance(name)) {
      const AgentRecord rec = agents.get(name);
      ProcessorFn fn = make_stub_processor(rec.kind.empty() ? name : rec.kind, rec.params);
      if (orch.session()->is_participant(name)) {
        orch.attach(rec, std::move(fn));
      } else {
        orch.join_and_attach(rec, std::move(fn));
      }
    }
  }
}

DataPlanResult execute_data_plan(const PlanDag& plan, TaskCoordinator::Deps deps,
                                 const Constraints& constraints) {
  if (!deps.orchestrator) throw StateError("execute_data_plan needs an orchestrator");

  // The sink is the unique node without outgoing edges.
  std::set<std::string> with_out;
  for (const auto& [from, _] : plan.edges) with_out.insert(from);
  std::string sink;
  for (const auto& node : plan.nodes) {
    if (!with_out.count(node.node_id)) {
      if (!sink.empty()) throw ValidationError("data plan has multiple sink nodes");
      sink = node.node_id;
    }
  }
  if (sink.empty()) throw ValidationError("data plan has no sink node");

  const AgentRegistry* registry = deps.registry;
  TaskCoordinator::CandidatesFn candidates = [registry](const PlanNode& node) {
    if (!registry || node.data_op.empty()) return std::vector<AgentRecord>{};
    std::string op;
    for (char c : node.data_op) {
      op.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return registry->search(op);
  };
  TaskCoordinator::ReplanFn replan =
      [](const PlanDag&, const std::string& failed_node, const std::set<std::string>&,
         const std::map<std::string, task_planner::CompletedNode>&) -> PlanDag {
    throw InfeasibleError(InfeasibleError::Reason::NO_AGENT,
                          "data plans are not replanned (failed node '" + failed_node + "')");
  };

  TaskCoordinator coordinator(deps, std::move(candidates), std::move(replan), constraints,
                              "data_coordinator");
  coordinator.attach();
  DataPlanResult out;
  out.report = coordinator.execute(plan);
  const NodeState* sink_state = out.report.find_node(sink);
  if (sink_state && sink_state->output) out.result = *sink_state->output;
  return out;
}

}  // namespace data_planner

}  // namespace weft
