#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "weft/clock.hpp"
#include "weft/error.hpp"
#include "weft/fixtures.hpp"
#include "weft/registry.hpp"
#include "weft/session.hpp"
#include "weft/stream.hpp"
#include "weft/tag_expr.hpp"

using namespace weft;

namespace {

// Test-side evaluator, independent of TagExpr::matches.
bool oracle_eval(const TagExpr& e, const TagSet& tags) {
  switch (e.kind()) {
    case TagExpr::Kind::TRUE_VAL: return true;
    case TagExpr::Kind::TAG: return tags.count(e.token()) > 0;
    case TagExpr::Kind::NOT: return !oracle_eval(e.child(), tags);
    case TagExpr::Kind::AND: return oracle_eval(e.lhs(), tags) && oracle_eval(e.rhs(), tags);
    case TagExpr::Kind::OR: return oracle_eval(e.lhs(), tags) || oracle_eval(e.rhs(), tags);
  }
  return false;
}

TagExpr random_expr(std::mt19937_64& rng, const std::vector<std::string>& vocab, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 4);
  switch (pick(rng)) {
    case 0: return TagExpr::truth();
    case 1: {
      std::uniform_int_distribution<std::size_t> v(0, vocab.size() - 1);
      return TagExpr::tag(vocab[v(rng)]);
    }
    case 2: return TagExpr::negate(random_expr(rng, vocab, depth - 1));
    case 3:
      return TagExpr::conj(random_expr(rng, vocab, depth - 1), random_expr(rng, vocab, depth - 1));
    default:
      return TagExpr::disj(random_expr(rng, vocab, depth - 1), random_expr(rng, vocab, depth - 1));
  }
}

std::vector<TagSet> all_subsets(const std::vector<std::string>& vocab) {
  std::vector<TagSet> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << vocab.size()); ++mask) {
    TagSet s;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (mask & (std::size_t{1} << i)) s.insert(vocab[i]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_SUITE("tag_expr") {
  TEST_CASE("a AND b parses to AND(TAG a, TAG b)") {
    const TagExpr e = TagExpr::parse("a AND b");
    CHECK(e == TagExpr::conj(TagExpr::tag("a"), TagExpr::tag("b")));
  }

  TEST_CASE("NOT binds tighter than AND which binds tighter than OR") {
    const TagExpr e = TagExpr::parse("NOT a OR b");
    CHECK(e == TagExpr::disj(TagExpr::negate(TagExpr::tag("a")), TagExpr::tag("b")));
    const TagExpr f = TagExpr::parse("a OR b AND c");
    CHECK(f == TagExpr::disj(TagExpr::tag("a"),
                             TagExpr::conj(TagExpr::tag("b"), TagExpr::tag("c"))));
  }

  TEST_CASE("leading AND is a parse error at position 0") {
    try {
      TagExpr::parse("AND a");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.position() == 0);
    }
  }

  TEST_CASE("malformed inputs report a position") {
    CHECK_THROWS_AS(TagExpr::parse("a AND"), ParseError);
    CHECK_THROWS_AS(TagExpr::parse("(a"), ParseError);
    CHECK_THROWS_AS(TagExpr::parse("a b"), ParseError);
    CHECK_THROWS_AS(TagExpr::parse("Upper"), ParseError);
    CHECK_THROWS_AS(TagExpr::parse(""), ParseError);
  }

  TEST_CASE("keywords are case-insensitive, tokens are [a-z0-9_]+") {
    CHECK(TagExpr::parse("a and b") == TagExpr::parse("a AND b"));
    CHECK(TagExpr::parse("not true") == TagExpr::never());
    CHECK(TagExpr::parse("tok_3").matches(TagSet{"tok_3"}));
  }

  TEST_CASE("match_tags examples") {
    CHECK(match_tags(TagExpr::parse("plan AND NOT final"), TagSet{"plan"}));
    CHECK_FALSE(match_tags(TagExpr::parse("plan AND NOT final"), TagSet{"plan", "final"}));
    CHECK(match_tags(TagExpr::truth(), TagSet{}));
  }

  TEST_CASE("a OR (b AND c) agrees with the 8-row truth table") {
    const TagExpr e = TagExpr::parse("a OR (b AND c)");
    const std::vector<std::string> vocab = {"a", "b", "c"};
    for (const auto& subset : all_subsets(vocab)) {
      const bool expect = subset.count("a") || (subset.count("b") && subset.count("c"));
      CHECK(match_tags(e, subset) == expect);
    }
  }

  TEST_CASE("soundness and round-trip over random ASTs") {
    const std::vector<std::string> vocab = {"a", "b", "c", "d"};
    std::mt19937_64 rng(42);
    const auto subsets = all_subsets(vocab);
    for (int i = 0; i < 300; ++i) {
      const TagExpr e = random_expr(rng, vocab, 6);
      const TagExpr reparsed = TagExpr::parse(e.str());
      CHECK(reparsed == e);
      for (const auto& subset : subsets) {
        CHECK(e.matches(subset) == oracle_eval(e, subset));
      }
    }
  }
}

TEST_SUITE("scheduler") {
  TEST_CASE("events run in (ts, schedule-order) order") {
    auto sched = make_sim_scheduler();
    std::vector<int> order;
    sched->schedule_at(10, [&] { order.push_back(2); });
    sched->schedule_at(5, [&] { order.push_back(1); });
    sched->schedule_at(10, [&] { order.push_back(3); });
    sched->run_until_idle();
    CHECK(order == std::vector<int>{1, 2, 3});
    CHECK(sched->now() == 10);
  }

  TEST_CASE("cancel drops a pending event") {
    auto sched = make_sim_scheduler();
    bool ran = false;
    auto h = sched->schedule_at(5, [&] { ran = true; });
    CHECK(sched->cancel(h));
    CHECK_FALSE(sched->cancel(h));
    sched->run_until_idle();
    CHECK_FALSE(ran);
  }

  TEST_CASE("events may schedule more events") {
    auto sched = make_sim_scheduler();
    std::vector<std::int64_t> stamps;
    sched->schedule_at(1, [&] {
      stamps.push_back(sched->now());
      sched->schedule_after(4, [&] { stamps.push_back(sched->now()); });
    });
    sched->run_until_idle();
    CHECK(stamps == std::vector<std::int64_t>{1, 5});
  }
}

TEST_SUITE("stream") {
  TEST_CASE("append to empty stream returns seq 0; five appends count up") {
    StreamLog s("st0", "t", TagSet{}, "p");
    CHECK(s.append(MessageKind::DATA, {}, Payload::integer(1), "p") == 0);
    for (std::uint64_t i = 1; i < 5; ++i) {
      CHECK(s.append(MessageKind::DATA, {}, Payload::integer(0), "p") == i);
    }
    CHECK(s.size() == 5);
  }

  TEST_CASE("closed stream rejects appends; close is idempotent") {
    StreamLog s("st0", "t", TagSet{}, "p");
    CHECK(s.close());
    CHECK_FALSE(s.close());
    CHECK_THROWS_AS(s.append(MessageKind::DATA, {}, Payload::integer(1), "p"), StateError);
  }

  TEST_CASE("message tags are the union of explicit and stream tags") {
    StreamLog s("st0", "t", TagSet{"plan"}, "p");
    s.append(MessageKind::DATA, TagSet{"draft"}, Payload::integer(1), "p");
    CHECK(s.at(0).tags == TagSet{"plan", "draft"});
  }

  TEST_CASE("invalid tag tokens are rejected") {
    StreamLog s("st0", "t", TagSet{}, "p");
    CHECK_THROWS_AS(s.append(MessageKind::DATA, TagSet{"Bad"}, Payload::integer(1), "p"),
                    ValidationError);
  }

  TEST_CASE("cursor examples") {
    auto s = std::make_shared<StreamLog>("st0", "t", TagSet{}, "p");
    for (int i = 0; i < 3; ++i) s->append(MessageKind::DATA, {}, Payload::integer(i), "p");

    Cursor c = open_cursor(s, 0, "reader");
    for (std::uint64_t want = 0; want < 3; ++want) {
      auto r = c.next();
      REQUIRE(r.status == StreamLog::ReadResult::Status::MSG);
      CHECK(r.message->seq == want);
    }
    CHECK(c.next().status == StreamLog::ReadResult::Status::PENDING);

    s->close();
    CHECK(c.next().status == StreamLog::ReadResult::Status::END);

    CHECK(open_cursor(s, 3, "tail").next().status == StreamLog::ReadResult::Status::END);
    CHECK_THROWS_AS(open_cursor(s, 4, "oob"), OutOfRangeError);
  }

  TEST_CASE("open at 5 on a 10-message stream reads seq 5 first") {
    auto s = std::make_shared<StreamLog>("st0", "t", TagSet{}, "p");
    for (int i = 0; i < 10; ++i) s->append(MessageKind::DATA, {}, Payload::integer(i), "p");
    Cursor c = open_cursor(s, 5, "reader");
    CHECK(c.next().message->seq == 5);
  }

  TEST_CASE("close of an empty stream yields END at position 0") {
    auto s = std::make_shared<StreamLog>("st0", "t", TagSet{}, "p");
    Cursor c = open_cursor(s, 0, "reader");
    s->close();
    CHECK(c.next().status == StreamLog::ReadResult::Status::END);
  }

  TEST_CASE("concurrent producers get a gap-free seq range, monotone per producer") {
    StreamLog s("st0", "t", TagSet{}, "shared");
    constexpr int kProducers = 4;
    constexpr int kEach = 25;
    std::vector<std::vector<std::uint64_t>> got(kProducers);
    std::vector<std::thread> threads;
    threads.reserve(kProducers);
    for (int p = 0; p < kProducers; ++p) {
      threads.emplace_back([&, p] {
        for (int i = 0; i < kEach; ++i) {
          got[p].push_back(
              s.append(MessageKind::DATA, {}, Payload::integer(p), "p" + std::to_string(p)));
        }
      });
    }
    for (auto& t : threads) t.join();

    std::set<std::uint64_t> all;
    for (const auto& seqs : got) {
      CHECK(std::is_sorted(seqs.begin(), seqs.end()));
      all.insert(seqs.begin(), seqs.end());
    }
    CHECK(all.size() == kProducers * kEach);
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == kProducers * kEach - 1);
  }

  TEST_CASE("two cursors drain identical sequences") {
    auto s = std::make_shared<StreamLog>("st0", "t", TagSet{}, "p");
    for (int i = 0; i < 20; ++i) s->append(MessageKind::DATA, {}, Payload::integer(i * 7), "p");
    s->close();
    Cursor a = open_cursor(s, 0, "a");
    Cursor b = open_cursor(s, 0, "b");
    for (;;) {
      auto ra = a.next();
      auto rb = b.next();
      CHECK(ra.status == rb.status);
      if (ra.status != StreamLog::ReadResult::Status::MSG) break;
      CHECK(ra.message->payload == rb.message->payload);
      CHECK(ra.message->seq == rb.message->seq);
    }
  }

  TEST_CASE("threaded producer/consumer drains in order under the wakeup contract") {
    auto s = std::make_shared<StreamLog>("st0", "t", TagSet{}, "p");
    std::thread producer([&] {
      for (int i = 0; i < 100; ++i) s->append(MessageKind::DATA, {}, Payload::integer(i), "p");
      s->close();
    });
    std::vector<std::int64_t> drained;
    Cursor c = open_cursor(s, 0, "consumer");
    for (;;) {
      auto r = c.next();
      if (r.status == StreamLog::ReadResult::Status::MSG) {
        drained.push_back(r.message->payload.as_int());
        continue;
      }
      if (r.status == StreamLog::ReadResult::Status::END) break;
      s->wait_for_change(c.position(), std::chrono::milliseconds(50));
    }
    producer.join();
    REQUIRE(drained.size() == 100);
    for (int i = 0; i < 100; ++i) CHECK(drained[i] == i);
  }
}

TEST_SUITE("session") {
  TEST_CASE("empty config yields exactly one SESSION_CREATED event") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    CHECK(session->session_stream()->size() == 1);
    const Message m = session->session_stream()->at(0);
    CHECK(m.kind == MessageKind::EVENT);
    CHECK(m.payload.as_record().at("event_name") == event_names::kSessionCreated);
  }

  TEST_CASE("configured agents join in order after SESSION_CREATED") {
    auto sched = make_sim_scheduler();
    SessionConfig cfg;
    cfg.id = "s1";
    cfg.agents = {"user", "planner", "coordinator"};
    auto session = Session::create(cfg, *sched);
    const auto& stream = session->session_stream();
    REQUIRE(stream->size() == 4);
    CHECK(stream->at(0).payload.as_record().at("event_name") == event_names::kSessionCreated);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto rec = stream->at(i + 1).payload.as_record();
      CHECK(rec.at("event_name") == event_names::kJoin);
      CHECK(rec.at("agent_id") == cfg.agents[i]);
    }
  }

  TEST_CASE("duplicate session id is rejected") {
    auto sched = make_sim_scheduler();
    SessionManager mgr(*sched);
    mgr.create_session({.id = "s1"});
    CHECK_THROWS_AS(mgr.create_session({.id = "s1"}), DuplicateError);
  }

  TEST_CASE("create_stream announces STREAM_OPENED with name and tags") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    session->create_stream("plan_out", TagSet{"plan"}, "planner");
    const Message m = session->session_stream()->at(1);
    CHECK(m.payload.as_record().at("event_name") == event_names::kStreamOpened);
    CHECK(m.payload.as_record().at("name") == "plan_out");
  }

  TEST_CASE("stream name collision and inactive session are rejected") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    session->create_stream("out", {}, "a");
    CHECK_THROWS_AS(session->create_stream("out", {}, "a"), DuplicateError);
    session->end(SessionStatus::ABORTED);
    CHECK_THROWS_AS(session->create_stream("other", {}, "a"), StateError);
  }

  TEST_CASE("close_stream is idempotent with exactly one STREAM_CLOSED event") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    session->create_stream("out", {}, "a");
    session->close_stream("out");
    session->close_stream("out");
    int closed = 0;
    for (std::uint64_t i = 0; i < session->session_stream()->size(); ++i) {
      if (session->session_stream()->at(i).payload.as_record().at("event_name") ==
          event_names::kStreamClosed) {
        ++closed;
      }
    }
    CHECK(closed == 1);
  }

  TEST_CASE("join/leave announce in order; double join is rejected") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    session->join("planner");
    CHECK_THROWS_AS(session->join("planner"), StateError);
    session->leave("planner");
    const auto& stream = session->session_stream();
    std::vector<std::string> events;
    for (std::uint64_t i = 0; i < stream->size(); ++i) {
      const auto rec = stream->at(i).payload.as_record();
      if (rec.at("agent_id") == "planner") events.push_back(rec.at("event_name"));
    }
    CHECK(events == std::vector<std::string>{event_names::kJoin, event_names::kLeave});
  }

  TEST_CASE("broadcast completeness: one event per lifecycle action") {
    auto sched = make_sim_scheduler();
    auto session = Session::create({.id = "s1"}, *sched);
    session->join("a");
    session->create_stream("x", {}, "a");
    session->create_stream("y", {}, "a");
    session->close_stream("x");
    session->end(SessionStatus::COMPLETED);

    std::map<std::string, int> counts;
    for (std::uint64_t i = 0; i < session->session_stream()->size(); ++i) {
      counts[session->session_stream()->at(i).payload.as_record().at("event_name")]++;
    }
    CHECK(counts[event_names::kSessionCreated] == 1);
    CHECK(counts[event_names::kJoin] == 1);
    CHECK(counts[event_names::kLeave] == 1);
    CHECK(counts[event_names::kStreamOpened] == 2);
    CHECK(counts[event_names::kStreamClosed] == 2);
    CHECK(session->session_stream()->closed());
    CHECK(session->status() == SessionStatus::COMPLETED);
  }
}

TEST_SUITE("registry") {
  AgentRecord agent(const std::string& name, std::set<std::string> caps, double cost = 1.0,
                    double quality = 0.9) {
    AgentRecord r;
    r.name = name;
    r.capabilities = std::move(caps);
    r.cost_per_call = cost;
    r.quality_est = quality;
    return r;
  }

  TEST_CASE("register then get; duplicates and bad quality rejected") {
    AgentRegistry reg;
    reg.register_agent(agent("JobSearch", {"search_jobs"}));
    CHECK(reg.get("JobSearch").capabilities.count("search_jobs") == 1);
    CHECK_THROWS_AS(reg.register_agent(agent("JobSearch", {"x"})), DuplicateError);
    AgentRecord bad = agent("Bad", {"x"});
    bad.quality_est = 1.3;
    CHECK_THROWS_AS(reg.register_agent(bad), ValidationError);
    CHECK_THROWS_AS(reg.get("missing"), NotFoundError);
  }

  TEST_CASE("search ranks by capability match") {
    AgentRegistry reg;
    reg.register_agent(agent("JobSearch", {"search_jobs"}));
    reg.register_agent(agent("MatchPredict", {"predict_match"}));
    const auto hits = reg.search("predict_match");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].name == "MatchPredict");
    CHECK(AgentRegistry{}.search("anything").empty());
  }

  TEST_CASE("equal scores tie-break by name ascending") {
    AgentRegistry reg;
    reg.register_agent(agent("b", {"c"}));
    reg.register_agent(agent("a", {"c"}));
    const auto hits = reg.search("c");
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].name == "a");
    CHECK(hits[1].name == "b");
  }

  TEST_CASE("unavailable agents are filtered out") {
    AgentRegistry reg;
    AgentRecord r = agent("a", {"c"});
    r.available = false;
    reg.register_agent(r);
    CHECK(reg.search("c").empty());
  }

  TEST_CASE("description tokens give partial Jaccard matches") {
    AgentRegistry reg;
    AgentRecord r = agent("Summarizer", {"summarize_text"});
    r.description = "Summarizes documents";
    reg.register_agent(r);
    const auto hits = reg.search("summarize_text");
    REQUIRE(hits.size() == 1);
    const double jaccard = AgentRegistry::score(r, "summarize");
    CHECK(jaccard > 0.0);
    CHECK(jaccard < 1.0);
  }

  DataAssetRecord asset(const std::string& name, std::vector<std::string> fields, double cost,
                        double quality) {
    DataAssetRecord r;
    r.name = name;
    for (auto& f : fields) r.schema_fields.push_back({f, "text", {}});
    r.access_cost = cost;
    r.quality_est = quality;
    r.supported_ops = {DataOp::QUERY};
    r.table = name;
    return r;
  }

  TEST_CASE("asset search ranks by quality/(1+cost): 0.40 vs 0.18") {
    DataRegistry reg;
    reg.register_asset(asset("jobs_raw", {"title", "salary"}, 4.0, 0.9));
    reg.register_asset(asset("jobs_summary", {"title", "salary"}, 1.0, 0.8));
    const auto hits = reg.search({"title"}, DataOp::QUERY);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].name == "jobs_summary");
    CHECK(hits[1].name == "jobs_raw");
    CHECK(0.8 / (1.0 + 1.0) == doctest::Approx(0.40));
    CHECK(0.9 / (1.0 + 4.0) == doctest::Approx(0.18));
  }

  TEST_CASE("assets missing a field or the op are excluded") {
    DataRegistry reg;
    reg.register_asset(asset("jobs", {"title"}, 1.0, 0.9));
    CHECK(reg.search({"visa_status"}, DataOp::QUERY).empty());
    CHECK(reg.search({"title"}, DataOp::JOIN).empty());
    CHECK(reg.search({"title"}, DataOp::QUERY).size() == 1);
    CHECK_THROWS_AS(reg.search({}, DataOp::QUERY), ValidationError);
  }

  TEST_CASE("join keys must be schema fields") {
    DataAssetRecord r = asset("bad", {"title"}, 1.0, 0.9);
    r.join_keys = {"job_id"};
    CHECK_THROWS_AS(r.validate(), ValidationError);
  }
}

TEST_SUITE("fixtures") {
  TEST_CASE("tsv parsing types cells as int, float, json, text") {
    const Table t = parse_table("id\tname\tscore\tmeta\n1\tab\t1.5\t{\"k\":2}\n");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].at("id") == 1);
    CHECK(t.rows[0].at("name") == "ab");
    CHECK(t.rows[0].at("score") == 1.5);
    CHECK(t.rows[0].at("meta").at("k") == 2);
  }

  TEST_CASE("ragged rows are rejected") {
    CHECK_THROWS_AS(parse_table("a\tb\n1\n"), ValidationError);
  }
}
