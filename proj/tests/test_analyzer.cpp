#include <cmath>

#include "doctest.h"
#include "poolgt/analyzer.hpp"
#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"

using namespace poolgt;

TEST_CASE("A1 analysis is trivial") {
  for (double x : {0.0, 0.2, 0.9}) {
    const TreeAnalysis a = analyze_tree(*make_strategy("A1"), RiskModel::homogeneous(x));
    CHECK(a.tests_per_run == 1.0);
    CHECK(a.resolved_per_run == 1.0);
    CHECK(a.tests_per_person == 1.0);
  }
}

TEST_CASE("analyzer agrees with the closed forms") {
  const TreeAnalysis a3 = analyze_tree(*make_strategy("A3"), RiskModel::homogeneous(0.2));
  CHECK(std::fabs(a3.tests_per_person - 0.723834196891192) < 1e-12);
  for (const char* n : {"A2", "A3", "A4", "A5", "A6", "A8", "A10", "A12", "A16", "A20"}) {
    CAPTURE(n);
    const StrategyId id = StrategyId::parse(n);
    for (int i = 0; i <= 100; ++i) {
      const double x = 0.005 + 0.99 * i / 100.0;
      const double an = analyze_tree(*make_strategy(id), RiskModel::homogeneous(x)).tests_per_person;
      CHECK(std::fabs(an - closed_form_cost(id, x)) <= 1e-10);
    }
  }
}

TEST_CASE("halving a known-positive unit") {
  CHECK(halving_resolved(0, 0.3) == 1.0);
  for (double p : {0.05, 0.3, 0.7}) CHECK(halving_resolved(1, p) == doctest::Approx(2.0 - 1.0 / (2.0 - p)));
}

TEST_CASE("A5 loop") {
  const TreeAnalysis a = analyze_tree(*make_strategy("A5"), RiskModel::homogeneous(0.12));
  CHECK(a.loop_probability > 0.0);
  CHECK(a.loop_probability < 0.12 + 1e-12);
}

TEST_CASE("a loop that always jumps back is rejected") {
  TreeBuilder b;
  LabelId A = b.label("A");
  NodeId root = b.reserve();
  NodeId abort1 = b.leaf({});
  NodeId abort2 = b.leaf({});
  NodeId l1 = b.loop({{A, Assignment::Neg}}, root, {A}, abort1);
  NodeId l2 = b.loop({{A, Assignment::Pos}}, root, {A}, abort2);
  b.test({A}, {A}, l1, l2, root);
  Strategy s{StrategyId::homogeneous(1), b.finish(root)};
  REQUIRE(validate(s).ok());
  CHECK_THROWS_AS(analyze_tree(s, RiskModel::homogeneous(0.3)), AnalysisError);
}

TEST_CASE("A15 beats A16 where A16 is the best of its neighbours") {
  const StrategyId a12 = StrategyId::parse("A12"), a15 = StrategyId::parse("A15"), a16 = StrategyId::parse("A16"),
                   a20 = StrategyId::parse("A20");
  int points = 0;
  for (int i = 0; i <= 2000; ++i) {
    const double x = 0.02 + 0.04 * i / 2000.0;
    const double c16 = closed_form_cost(a16, x);
    if (!(c16 < closed_form_cost(a12, x) && c16 < closed_form_cost(a20, x))) continue;
    ++points;
    CHECK(analyze_tree(*make_strategy(a15), RiskModel::homogeneous(x)).tests_per_person <
          analyze_tree(*make_strategy(a16), RiskModel::homogeneous(x)).tests_per_person);
  }
  CHECK(points > 50);
}

TEST_CASE("mixed analysis splits resolutions by stratum") {
  const TreeAnalysis a = analyze_tree(*make_strategy("M1"), RiskModel::two_group(0.35, 0.15));
  CHECK(a.resolved_upper > 0.0);
  CHECK(a.resolved_lower > 0.0);
  CHECK(a.resolved_upper + a.resolved_lower == doctest::Approx(a.resolved_per_run));
  CHECK(a.defer_posterior.size() == make_strategy("M1")->core().first->nodes.size());
}
