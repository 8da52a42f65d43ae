#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "doctest.h"
#include "poolgt/errors.hpp"
#include "poolgt/session.hpp"
#include "poolgt/sim.hpp"

using namespace poolgt;

namespace {

SessionParams params(double x, int n, std::optional<std::string> strategy = std::nullopt) {
  SessionParams p;
  p.risk = RiskModel::homogeneous(x);
  for (int i = 0; i < n; ++i) p.roster.push_back({"S" + std::to_string(i + 1)});
  p.strategy = std::move(strategy);
  return p;
}

std::unique_ptr<Session> session(double x, int n, std::optional<std::string> strategy = std::nullopt) {
  return Session::create("t", params(x, n, std::move(strategy)));
}

std::vector<std::string> ids(std::initializer_list<const char*> l) { return {l.begin(), l.end()}; }

std::filesystem::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto p = std::filesystem::temp_directory_path() / ("poolgt-" + tag + "-" + std::to_string(rd()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("strategy selection at creation") {
  CHECK(session(0.3, 12)->strategy_id() == "A2");
  CHECK(session(0.12, 12)->strategy_id() == "A5");
  auto pinned = session(0.45, 12, "A4");
  CHECK(pinned->strategy_id() == "A4");
  CHECK(pinned->strategy_pinned());
  SessionParams two;
  two.risk = RiskModel::two_group(0.38, 0.15);
  for (int i = 0; i < 10; ++i) two.roster.push_back({"p" + std::to_string(i), false, i % 2 == 1});
  CHECK(Session::create("m", two)->strategy_id().front() == 'M');
}

TEST_CASE("creation errors") {
  CHECK_THROWS_AS(session(0.3, 0), ValidationError);
  CHECK_THROWS_AS(session(0.0, 3), ValidationError);
  CHECK_THROWS_AS(session(1.0, 3), ValidationError);
  CHECK_THROWS_AS(session(0.3, 3, "A7"), InvalidStrategy);
  CHECK_THROWS_AS(session(0.3, 3, "M1"), ValidationError);
  CHECK_THROWS_AS(params_from_json(Json::parse(R"({"risk":{"x":0.3},"roster":["a","a"]})")), ValidationError);
  CHECK_THROWS_AS(params_from_json(Json::parse(R"({"risk":{"x":0.3},"roster":[]})")), ValidationError);
  CHECK_THROWS_AS(params_from_json(Json::parse(R"({"roster":["a"]})")), ValidationError);
  CHECK_THROWS_AS(params_from_json(Json::parse(R"({"risk":{"x":0.3},"roster":["a"],"urgent":["b"]})")),
                  ValidationError);
}

TEST_CASE("A4 session walk-through") {
  auto s = session(0.2, 12, "A4");
  auto i1 = s->next_instruction();
  REQUIRE(i1);
  CHECK(i1->pool == ids({"S1", "S2", "S3", "S4"}));
  CHECK_THROWS_AS(s->next_instruction(), SequencingError);
  CHECK_THROWS_AS(s->submit_outcome(i1->instruction_id + 1, true), SequencingError);

  SUBCASE("negative pool clears all four") {
    StateDelta d = s->submit_outcome(i1->instruction_id, false);
    CHECK(d.resolved.size() == 4);
    for (auto& [id, st] : d.resolved) CHECK(st == Status::Neg);
    auto i2 = s->next_instruction();
    REQUIRE(i2);
    CHECK(i2->pool == ids({"S5", "S6", "S7", "S8"}));
  }
  SUBCASE("positive pool continues with C and D") {
    s->submit_outcome(i1->instruction_id, true);
    auto i2 = s->next_instruction();
    REQUIRE(i2);
    CHECK(i2->pool == ids({"S3", "S4"}));
    s->submit_outcome(i2->instruction_id, true);
    auto i3 = s->next_instruction();
    REQUIRE(i3);
    CHECK(i3->pool == ids({"S4"}));
    StateDelta d = s->submit_outcome(i3->instruction_id, true);
    REQUIRE(d.resolved.size() == 1);
    CHECK(d.resolved[0].first == "S4");
    CHECK(d.resolved[0].second == Status::Pos);
    CHECK(d.repooled == ids({"S1", "S2", "S3"}));
    CHECK_THROWS_AS(s->submit_outcome(i3->instruction_id, true), SequencingError);
  }
}

TEST_CASE("A2 session: (+,-) resolves A negative and B positive") {
  auto s = session(0.3, 4, "A2");
  auto i1 = s->next_instruction();
  REQUIRE(i1->pool == ids({"S1", "S2"}));
  s->submit_outcome(i1->instruction_id, true);
  auto i2 = s->next_instruction();
  REQUIRE(i2->pool == ids({"S1"}));
  StateDelta d = s->submit_outcome(i2->instruction_id, false);
  auto st = s->statuses();
  CHECK(st["S1"] == Status::Neg);
  CHECK(st["S2"] == Status::Pos);
  CHECK(d.resolved.size() == 2);
}

TEST_CASE("urgent individual in slot D is resolved on every outcome path") {
  // Outcome sequences are explored exhaustively until the urgent one is settled.
  std::function<void(std::vector<bool>)> explore = [&](std::vector<bool> prefix) {
    SessionParams p = params(0.2, 8, "A4");
    p.roster[5].urgent = true;
    auto s = Session::create("u", p);
    for (bool o : prefix) s->submit_outcome(s->next_instruction()->instruction_id, o);
    if (s->statuses()["S6"] != Status::Pending) {
      CHECK_FALSE(s->ever_repooled("S6"));
      CHECK(s->ever_guaranteed("S6"));
      CHECK(s->history().size() <= 3);
      return;
    }
    auto ins = s->next_instruction();
    REQUIRE(ins);
    if (prefix.empty()) {
      CHECK(ins->pool == ids({"S1", "S2", "S3", "S6"}));
      CHECK(ins->guaranteed == ids({"S6"}));
    }
    REQUIRE(prefix.size() < 4);
    for (bool o : {false, true}) {
      auto next = prefix;
      next.push_back(o);
      explore(next);
    }
  };
  explore({});
}

TEST_CASE("statuses") {
  auto s = session(0.4, 5, "A1");
  for (auto& [id, st] : s->statuses()) CHECK(st == Status::Pending);
  s->submit_outcome(s->next_instruction()->instruction_id, true);
  int done = 0;
  for (auto& [id, st] : s->statuses()) done += st != Status::Pending;
  CHECK(done == 1);
  while (auto i = s->next_instruction()) s->submit_outcome(i->instruction_id, false);
  CHECK(s->complete());
  for (auto& [id, st] : s->statuses()) CHECK(st != Status::Pending);
  CHECK_THROWS_AS(s->submit_outcome(99, true), SessionCompleteError);
  CHECK_FALSE(s->next_instruction());
}

TEST_CASE("replay reproduces the state") {
  SUBCASE("mid-session A5 with a loop taken") {
    auto s = session(0.12, 40, "A5");
    std::mt19937_64 g(1);
    for (int k = 0; k < 200 && s->counters().loop_taken == 0; ++k) {
      auto ins = s->next_instruction();
      REQUIRE(ins);
      s->submit_outcome(ins->instruction_id, g() % 2 == 0);
    }
    REQUIRE(s->counters().loop_taken == 1);
    auto r = Session::replay(s->log());
    CHECK(r->counters().loop_taken == 1);
    CHECK(r->fingerprint() == s->fingerprint());
    CHECK(r->statuses() == s->statuses());
  }
  SUBCASE("50-step transcript") {
    std::mt19937_64 g(6);
    auto s = session(0.2, 200, "A3");
    for (int k = 0; k < 50; ++k) s->submit_outcome(s->next_instruction()->instruction_id, g() % 3 == 0);
    auto r = Session::replay(s->log());
    CHECK(r->statuses() == s->statuses());
    CHECK(r->fingerprint() == s->fingerprint());
    CHECK(r->history().size() == 50);
    CHECK(r->log() == s->log());
  }
  SUBCASE("outstanding instruction survives replay") {
    auto s = session(0.2, 10, "A4");
    auto ins = s->next_instruction();
    auto r = Session::replay(s->log());
    REQUIRE(r->outstanding());
    CHECK(r->outstanding()->pool == ins->pool);
    CHECK_NOTHROW(r->submit_outcome(ins->instruction_id, false));
  }
}

TEST_CASE("tampering is detected") {
  auto s = session(0.2, 120, "A3");
  for (int k = 0; k < 30; ++k) s->submit_outcome(s->next_instruction()->instruction_id, k % 4 == 0);
  std::vector<std::string> log = s->log();
  SUBCASE("edited outcome") {
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (log[i].find("\"outcome\":\"+\"") != std::string::npos) {
        log[i].replace(log[i].find("\"outcome\":\"+\""), 13, "\"outcome\":\"-\"");
        try {
          Session::replay(log);
          FAIL("tampered log accepted");
        } catch (const PersistError& e) {
          CHECK(e.offset() == i);
        }
        break;
      }
    }
  }
  SUBCASE("dropped record") {
    log.erase(log.begin() + 5);
    CHECK_THROWS_AS(Session::replay(log), PersistError);
  }
  SUBCASE("rehashed but inconsistent record") {
    // A forged record with a valid hash chain still fails the replay check.
    Json r = Json::parse(log[1]);
    r["pool"] = Json::array({"S9"});
    r.erase("hash");
    r["hash"] = sha256_hex(r["prev"].get<std::string>() + r.dump());
    log[1] = r.dump();
    log.resize(2);
    try {
      Session::replay(log);
      FAIL("forged record accepted");
    } catch (const PersistError& e) {
      CHECK(e.offset() == 1);
    }
  }
  SUBCASE("garbage") {
    log[3] = "{oops";
    try {
      Session::replay(log);
      FAIL("garbage accepted");
    } catch (const PersistError& e) {
      CHECK(e.offset() == 3);
    }
  }
}

TEST_CASE("snapshots are written periodically") {
  auto s = session(0.2, 200, "A3");
  for (int k = 0; k < 60; ++k) s->submit_outcome(s->next_instruction()->instruction_id, k % 5 == 0);
  int snaps = 0;
  for (const std::string& l : s->log()) snaps += l.find("\"type\":\"snapshot\"") != std::string::npos;
  CHECK(snaps == 2);
}

TEST_CASE("store persists to disk and reloads after a restart") {
  const auto dir = temp_dir("store");
  std::string id;
  std::string print;
  {
    SessionStore store(dir);
    auto s = store.create(params(0.12, 100));
    id = s->id();
    for (int k = 0; k < 27; ++k) {
      Json next = store.next_json(id);
      store.outcome_json(id, Json{{"instruction_id", next["instruction"]["instruction_id"]}, {"outcome", k % 3 ? "-" : "+"}});
    }
    store.next_json(id);
    print = s->fingerprint();
  }
  {
    SessionStore again(dir);
    auto s = again.get(id);
    CHECK(s->fingerprint() == print);
    CHECK(s->outstanding());
  }
  {
    // A torn final write is ignored.
    std::ofstream f(dir / (id + ".jsonl"), std::ios::app | std::ios::binary);
    f << "{\"seq\":99,\"ty";
  }
  {
    SessionStore again(dir);
    CHECK(again.get(id)->fingerprint() == print);
  }
  CHECK_THROWS_AS(SessionStore(dir).get("nope"), NotFound);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a session fed ground truth reproduces the simulator") {
  for (const char* name : {"A3", "A5", "A8"}) {
    CAPTURE(name);
    const Population pop = gen_population(RiskModel::homogeneous(0.15), 300, 21);
    RunOptions opt;
    opt.transcript = true;
    const SimReport sim = run_strategy(make_strategy(name), pop, RiskModel::homogeneous(0.15), opt);
    std::vector<std::vector<std::string>> sim_pools;
    for (const Event& e : sim.transcript) {
      if (e.kind != EventKind::Test) continue;
      std::vector<std::string> pool;
      for (int m : e.members) pool.push_back("S" + std::to_string(m + 1));
      sim_pools.push_back(std::move(pool));
    }
    auto s = Session::create("c", params(0.15, 300, name));
    std::vector<std::vector<std::string>> pools;
    while (auto ins = s->next_instruction()) {
      bool pos = false;
      for (const std::string& m : ins->pool) pos |= pop.positive[std::stoul(m.substr(1)) - 1] != 0;
      pools.push_back(ins->pool);
      s->submit_outcome(ins->instruction_id, pos);
    }
    CHECK(pools == sim_pools);
    for (int i = 0; i < 300; ++i) {
      const Status st = s->statuses()["S" + std::to_string(i + 1)];
      CHECK(st == (pop.positive[static_cast<std::size_t>(i)] ? Status::Pos : Status::Neg));
    }
  }
}

TEST_CASE("resolved statuses never regress") {
  std::mt19937_64 g(99);
  auto s = session(0.25, 40, "A4");
  std::map<std::string, Status> prev = s->statuses();
  while (auto ins = s->next_instruction()) {
    s->submit_outcome(ins->instruction_id, g() % 2 == 0);
    auto now = s->statuses();
    for (auto& [id, st] : prev)
      if (st != Status::Pending) CHECK(now[id] == st);
    prev = now;
  }
}
