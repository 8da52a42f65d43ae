#include <cmath>
#include <sstream>

#include "doctest.h"
#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"
#include "poolgt/rng.hpp"
#include "poolgt/sim.hpp"

using namespace poolgt;

TEST_CASE("substreams are distinct and reproducible") {
  CHECK(substream_seed(1, 0, 0) == substream_seed(1, 0, 0));
  CHECK(substream_seed(1, 0, 0) != substream_seed(1, 0, 1));
  CHECK(substream_seed(1, 0, 1) != substream_seed(1, 1, 0));
  CHECK(substream_seed(1, 0, 0) != substream_seed(2, 0, 0));
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.bits() == b.bits());
}

TEST_CASE("population generation") {
  CHECK(gen_population(RiskModel::homogeneous(0.0), 100, 1).positives() == 0);
  CHECK(gen_population(RiskModel::homogeneous(1.0), 10, 1).positives() == 10);
  const Population p = gen_population(RiskModel::homogeneous(0.2), 1000000, 42);
  const double frac = static_cast<double>(p.positives()) / 1e6;
  CHECK(std::fabs(frac - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / 1e6));
  CHECK(gen_population(RiskModel::homogeneous(0.3), 1000, 9).positive ==
        gen_population(RiskModel::homogeneous(0.3), 1000, 9).positive);
  CHECK(gen_population(RiskModel::homogeneous(0.3), 1000, 9).positive !=
        gen_population(RiskModel::homogeneous(0.3), 1000, 10).positive);
  CHECK_THROWS_AS(gen_population(RiskModel::homogeneous(0.3), 0, 1), DomainError);
  CHECK_THROWS_AS(gen_population(RiskModel::two_group(0.3, 0.1), 10, 1), DomainError);
}

TEST_CASE("A1 tests everyone once") {
  const Population p = gen_population(RiskModel::homogeneous(0.3), 5000, 3);
  const SimReport r = run_strategy(make_strategy("A1"), p);
  CHECK(r.total_tests == 5000);
  CHECK(r.resolved == 5000);
  CHECK(r.misclassifications == 0);
  CHECK(r.tests_per_person == 1.0);
}

TEST_CASE("A3 on an all-negative population") {
  const Population p = gen_population(RiskModel::homogeneous(0.0), 3 * 700, 3);
  const SimReport r = run_strategy(make_strategy("A3"), p);
  CHECK(r.total_tests == 700);
  CHECK(r.resolved == 2100);
}

TEST_CASE("zero misclassification across the family") {
  for (const char* n : {"A2", "A3", "A4", "A5", "A6", "A10", "A15", "A16", "A40", "REC5", "REC9"}) {
    CAPTURE(n);
    for (double x : {0.02, 0.1, 0.3, 0.6}) {
      const Population p = gen_population(RiskModel::homogeneous(x), 20000, 17);
      const SimReport r = run_strategy(make_strategy(n), p);
      CHECK(r.misclassifications == 0);
      CHECK(r.resolved == 20000);
      CHECK(r.tests_per_person == doctest::Approx(static_cast<double>(r.total_tests) / r.resolved));
    }
  }
}

TEST_CASE("A3 simulation agrees with f3") {
  SimSpec spec;
  spec.strategy = "A3";
  spec.risk = RiskModel::homogeneous(0.2);
  spec.persons = 100000;
  spec.replications = 10;
  spec.seed = 2024;
  const SimReport r = simulate(spec);
  CHECK(r.resolved == 1000000);
  CHECK(std::fabs(r.tests_per_person - 0.723834196891192) <= 3.0 * r.std_error);
  CHECK(r.misclassifications == 0);
}

TEST_CASE("compound and alternative strategies agree with the analyzer") {
  for (const char* n : {"A10", "A15", "A16", "REC5"}) {
    CAPTURE(n);
    SimSpec spec;
    spec.strategy = n;
    spec.risk = RiskModel::homogeneous(0.05);
    spec.persons = 50000;
    spec.replications = 20;
    spec.seed = 77;
    const SimReport r = simulate(spec);
    const double e = expected_cost(*make_strategy(n), spec.risk);
    CHECK(std::fabs(r.tests_per_person - e) <= 3.0 * r.std_error);
  }
}

TEST_CASE("slot D of A4 is never re-pooled") {
  const Population p = gen_population(RiskModel::homogeneous(0.25), 40000, 5);
  RunOptions opt;
  opt.transcript = true;
  const SimReport r = run_strategy(make_strategy("A4"), p, opt);
  std::vector<std::string> slot(p.size());
  std::size_t repools = 0;
  for (const Event& e : r.transcript) {
    if (e.individual < 0 || e.lane != 0) continue;
    if (e.kind == EventKind::Introduced) slot[static_cast<std::size_t>(e.individual)] = e.label;
    if (e.kind == EventKind::Repooled) {
      ++repools;
      CHECK(slot[static_cast<std::size_t>(e.individual)] != "D");
    }
  }
  CHECK(repools > 1000);
}

TEST_CASE("re-pooled individuals carry no information") {
  for (double x : {0.1, 0.3}) {
    CAPTURE(x);
    const std::size_t n = x < 0.2 ? 2200000 : 700000;
    const Population p = gen_population(RiskModel::homogeneous(x), n, 8);
    EngineConfig cfg;
    cfg.risk = RiskModel::homogeneous(x);
    Executor ex(make_strategy("A2"), cfg);
    for (std::size_t i = 0; i < n; ++i) ex.add_individual();
    std::size_t events = 0, positives = 0;
    while (auto t = ex.next()) {
      bool pos = false;
      for (int m : t->members) pos |= p.positive[static_cast<std::size_t>(m)] != 0;
      ex.submit(pos);
      for (const Event& e : ex.take_events()) {
        if (e.kind != EventKind::Repooled) continue;
        ++events;
        positives += p.positive[static_cast<std::size_t>(e.individual)];
      }
    }
    REQUIRE(events >= 100000);
    const double frac = static_cast<double>(positives) / static_cast<double>(events);
    CHECK(std::fabs(frac - x) <= 4.0 * std::sqrt(x * (1 - x) / static_cast<double>(events)));
  }
}

TEST_CASE("queues conserve individuals") {
  const Population p = gen_population(RiskModel::homogeneous(0.2), 3000, 12);
  EngineConfig cfg;
  cfg.risk = RiskModel::homogeneous(0.2);
  Executor ex(make_strategy("A16"), cfg);
  for (std::size_t i = 0; i < p.size(); ++i) ex.add_individual();
  std::size_t resolved_before = 0;
  while (auto t = ex.next()) {
    bool pos = false;
    for (int m : t->members) pos |= p.positive[static_cast<std::size_t>(m)] != 0;
    ex.submit(pos);
    const std::size_t resolved = p.size() - ex.unresolved();
    const std::size_t queued = ex.queued(Stratum::Default);
    CHECK(resolved >= resolved_before);
    CHECK(resolved + queued <= p.size());
    CHECK(p.size() - resolved - queued <= 16);  // at most one run in flight
    resolved_before = resolved;
  }
  CHECK(ex.unresolved() == 0);
  CHECK(ex.queued(Stratum::Default) == 0);
}

TEST_CASE("loop aborts are rare at the default cap") {
  SimSpec spec;
  spec.strategy = "A5";
  spec.risk = RiskModel::homogeneous(0.25);
  spec.persons = 200000;
  spec.replications = 5;
  const SimReport r = simulate(spec);
  CHECK(r.loop_taken > 0);
  CHECK(static_cast<double>(r.loop_abort_events) / static_cast<double>(r.runs) <= 1e-6);
}

TEST_CASE("stratified runs") {
  SUBCASE("M1 with no positives spends one test per run") {
    const Population p = gen_stratified({{Stratum::Upper, 0.0, 500}, {Stratum::Lower, 0.0, 500}}, 1);
    const SimReport r = run_strategy(make_strategy("M1"), p, RiskModel::two_group(0.0, 0.0));
    CHECK(r.total_tests == r.runs);
    CHECK(r.runs == 500);
    CHECK(r.misclassifications == 0);
  }
  SUBCASE("M3 per-run cost") {
    const double x = 0.35, y = 0.15;
    SimSpec spec;
    spec.strategy = "M3";
    spec.risk = RiskModel::two_group(x, y);
    spec.persons = 200000;
    spec.replications = 10;
    spec.seed = 31;
    const SimReport r = simulate(spec);
    CHECK(r.misclassifications == 0);
    CHECK(std::fabs(r.tests_per_run - (1 + y) * (1 + x - x * y) / (1 - y)) <= 3.0 * r.tests_per_run_se);
  }
  SUBCASE("M1 information per test") {
    const double x = 0.35, y = 0.15;
    SimSpec spec;
    spec.strategy = "M1";
    spec.risk = RiskModel::two_group(x, y);
    spec.persons = 200000;
    spec.replications = 10;
    spec.seed = 32;
    const SimReport r = simulate(spec);
    CHECK(r.misclassifications == 0);
    CHECK(std::fabs(r.info_per_test - mixed_performance(StrategyId::parse("M1"), x, y)) <= 3.0 * r.info_per_test_se);
  }
  SUBCASE("follow-up settles leftover low-risk individuals") {
    const Population p = gen_stratified({{Stratum::Upper, 0.35, 1000}, {Stratum::Lower, 0.15, 6000}}, 4);
    RunOptions opt;
    opt.follow_up = true;
    const SimReport r = run_strategy(make_strategy("M3"), p, RiskModel::two_group(0.35, 0.15), opt);
    CHECK(r.resolved == p.size());
    CHECK(r.misclassifications == 0);
    RunOptions none;
    const SimReport s = run_strategy(make_strategy("M3"), p, RiskModel::two_group(0.35, 0.15), none);
    CHECK(s.leftover_lower > 0);
  }
}

TEST_CASE("sweeps") {
  const auto ones = sweep({"A1"}, {0.3}, 10, 1000, 5);
  REQUIRE(ones.size() == 1);
  CHECK(ones[0].report.tests_per_person == 1.0);
  CHECK(ones[0].report.std_error == 0.0);

  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.02 + 0.03 * i);
  const auto rows = sweep({"A2", "A3", "A4", "A5"}, grid, 20, 5000, 2718);
  CHECK(rows.size() == 44);
  // 44 comparisons: 4 SE keeps the family-wise false alarm rate near 0.3%.
  for (const SweepRow& row : rows) {
    CAPTURE(row.strategy);
    CAPTURE(row.risk.x);
    CHECK(std::fabs(row.report.tests_per_person - row.expected) <= 4.0 * row.report.std_error);
  }

  std::ostringstream a, b;
  write_sweep_csv(a, sweep({"A2", "A4"}, {0.1, 0.2}, 4, 2000, 9, 2), 9);
  write_sweep_csv(b, sweep({"A2", "A4"}, {0.1, 0.2}, 4, 2000, 9, 1), 9);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("# seed=9\nstrategy_id,x,replications,persons,tests_per_person,std_error,closed_form,"
                      "abs_deviation,misclassifications,repool_events,loop_aborts,introduction_failures\nA2,0.1,4,2000,",
                      0) == 0);
}
