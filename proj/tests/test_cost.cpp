#include <cmath>
#include <sstream>

#include "doctest.h"
#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"
#include "poolgt/kernels.hpp"

using namespace poolgt;

namespace {

StrategyId id(const char* name) { return StrategyId::parse(name); }

// Independent A2 expectation: tests 2 - q^2 per run, resolved 2q + x.
double f2_by_hand(double x) {
  const double q = 1.0 - x;
  return (2.0 - q * q) / (2.0 * q + x);
}

int brute_dorfman(double p) {
  int best = 1;
  double cost = dorfman_cost(1, p, 1);
  for (int n = 2; n <= 1000; ++n) {
    const double c = dorfman_cost(n, p, n) / n;
    if (c < cost) {
      cost = c;
      best = n;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy(0.5) == 1.0);
  CHECK(entropy(0.0) == 0.0);
  CHECK(entropy(1.0) == 0.0);
  CHECK(entropy(0.381966011250105) == doctest::Approx(0.9594).epsilon(1e-4));
  CHECK(entropy(0.2) == doctest::Approx(entropy(0.8)).epsilon(1e-15));
  CHECK_THROWS_AS(entropy(-0.1), DomainError);
  CHECK_THROWS_AS(entropy(1.5), DomainError);
}

TEST_CASE("closed-form costs") {
  CHECK(closed_form_cost(id("A1"), 0.37) == 1.0);
  CHECK(closed_form_cost(id("A2"), 0.0) == 0.5);
  CHECK(closed_form_cost(id("A3"), 0.2) == doctest::Approx(2.2352 / 3.088).epsilon(1e-14));
  for (int i = 0; i <= 100; ++i) {
    const double x = i / 101.0;
    CHECK(std::fabs(closed_form_cost(id("A2"), x) - f2_by_hand(x)) < 1e-14);
    CHECK(std::fabs(closed_form_cost(id("A4"), x) - explicit_f4().eval(x)) < 1e-12);
    CHECK(std::fabs(closed_form_cost(id("A2"), x) - explicit_f2().eval(x)) < 1e-14);
  }
  CHECK_THROWS_AS(closed_form_cost(id("A2"), 1.0), DomainError);
  CHECK(closed_form_cost(id("A1"), 1.0) == 1.0);
}

TEST_CASE("exact evaluation agrees with the double path") {
  const Rational x(1, 5);
  for (const char* n : {"A1", "A2", "A3", "A4", "A5", "A6", "A10", "A40"}) {
    CAPTURE(n);
    CHECK(to_double(closed_form_cost_exact(id(n), x)) == doctest::Approx(closed_form_cost(id(n), 0.2)).epsilon(1e-14));
  }
  CHECK(closed_form_cost_exact(id("A3"), x) == Rational(22352, 30880));
}

TEST_CASE("batched closed forms match the scalar path on both ISAs") {
  std::vector<double> xs;
  for (int i = 0; i < 203; ++i) xs.push_back(i / 204.0);
  std::vector<double> out(xs.size());
  for (kernels::Isa isa : {kernels::Isa::Scalar, kernels::detected_isa()}) {
    kernels::force_isa(isa);
    for (const char* n : {"A3", "A5", "A12", "A80"}) {
      closed_form_cost(id(n), xs, out);
      for (std::size_t i = 0; i < xs.size(); ++i)
        CHECK(out[i] == doctest::Approx(closed_form_cost(id(n), xs[i])).epsilon(1e-14));
    }
  }
  kernels::force_isa(kernels::detected_isa());
}

TEST_CASE("cutoffs") {
  const double published[] = {0.381966011250105, 0.245122333753307, 0.170516459041503, 0.149636955876700,
                          0.113817389150325};
  for (int i = 1; i <= 5; ++i) {
    CAPTURE(i);
    const double g = cutoff(i);
    CHECK(std::fabs(g - published[i - 1]) < 1e-9);
    const StrategyId a = StrategyId::homogeneous(i), b = StrategyId::homogeneous(i + 1);
    CHECK(std::fabs(closed_form_cost(a, g) - closed_form_cost(b, g)) < 1e-10);
    CHECK(select_best(g + 1e-9) == a);
    CHECK(select_best(g - 1e-9) == b);
  }
  CHECK(std::fabs(cutoff(1) - (3.0 - std::sqrt(5.0)) / 2.0) < 1e-15);
  for (int i = 1; i < 5; ++i) CHECK(cutoff(i) > cutoff(i + 1));
  CHECK_THROWS_AS(cutoff(6), DomainError);
}

TEST_CASE("generic cutoffs") {
  CHECK(generic_cutoff(id("A1"), id("A2"), 0.3, 0.45) == doctest::Approx(cutoff(1)).epsilon(1e-12));
  CHECK(std::fabs(generic_cutoff(id("A4"), id("A5"), 0.14, 0.16) - 0.149636955876700) < 1e-9);
  CHECK_THROWS_AS(generic_cutoff(id("A1"), id("A2"), 0.0, 0.1), BracketError);
  const double lo = generic_cutoff(id("A15"), id("A20"), 0.03, 0.045);
  const double hi = generic_cutoff(id("A12"), id("A15"), 0.045, 0.06);
  CHECK(lo < hi);
  const double mid = 0.5 * (lo + hi);
  CHECK(closed_form_cost(id("A15"), mid) < closed_form_cost(id("A12"), mid));
  CHECK(closed_form_cost(id("A15"), mid) < closed_form_cost(id("A20"), mid));
}

TEST_CASE("selection") {
  CHECK(select_best(0.3) == id("A2"));
  CHECK(select_best(0.45) == id("A1"));
  CHECK(select_best(0.12) == id("A5"));
  CHECK_THROWS_AS(select_best(0.0), DomainError);
  // Beyond the first cutoff individual testing wins against every family member.
  const auto fam = homogeneous_family(64, true);
  for (double x = cutoff(1) + 1e-6; x < 0.999; x += 0.01)
    for (const StrategyId& s : fam) CHECK(closed_form_cost(id("A1"), x) <= closed_form_cost(s, x) + 1e-15);
}

TEST_CASE("lower bound and optimality") {
  const auto fam = homogeneous_family(kDefaultFamilyCap, false);
  for (int i = 1; i <= 1000; ++i) {
    const double x = i / 1001.0;
    for (const StrategyId& s : fam) CHECK(closed_form_cost(s, x) >= entropy(x) - 1e-12);
  }
  CHECK(optimality(id("A1"), 0.5) == 1.0);
  CHECK(optimality(id("A1"), cutoff(1)) == doctest::Approx(0.959).epsilon(1e-3));
}

TEST_CASE("99 percent coverage") {
  auto a = find_99(0.15, 64);
  REQUIRE(a);
  CHECK((*a == id("A4") || *a == id("A5")));
  CHECK_FALSE(find_99(0.40, 64));
  auto b = find_99(0.01, 1024);
  REQUIRE(b);
  CHECK(optimality(*b, 0.01) >= 0.99);
  for (double x : {0.24, 0.25, 0.32, 0.38, 0.44}) CHECK_FALSE(find_99(x));
}

TEST_CASE("Dorfman baseline") {
  CHECK(dorfman_cost(10, 0.0, 1000) == 100.0);
  CHECK(dorfman_cost(1, 0.2, 50) == doctest::Approx(50 * 1.2));
  CHECK(dorfman_cost(10, 0.01, 1000) == doctest::Approx(100 * (1 + 10 * (1 - std::pow(0.99, 10)))));
  CHECK_THROWS_AS(dorfman_cost(3, 0.1, 10), DomainError);
  CHECK_THROWS_AS(dorfman_cost(0, 0.1, 10), DomainError);
  for (double p : {0.001, 0.01, 0.05, 0.1}) {
    CAPTURE(p);
    CHECK(static_cast<int>(std::lround(dorfman_opt(p))) == brute_dorfman(p));
    CHECK(dorfman_opt_integer(p) == brute_dorfman(p));
  }
  CHECK(dorfman_opt(0.01) == doctest::Approx(10.516).epsilon(1e-4));
  double prev = dorfman_opt(0.001);
  for (double p = 0.002; p < 0.3; p += 0.001) {
    const double n = dorfman_opt(p);
    CHECK(n < prev);
    prev = n;
  }
  CHECK_THROWS_AS(dorfman_opt(0.0), DomainError);
  CHECK_THROWS_AS(dorfman_opt(1.0), DomainError);
}

TEST_CASE("Lambert W") {
  CHECK(lambert_w(0.0) == 0.0);
  CHECK(lambert_w(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambert_w(-1.0 / std::exp(1.0)) == -1.0);
  CHECK(lambert_w(1.0) == doctest::Approx(0.5671432904097838).epsilon(1e-15));
  for (double z = -0.3678; z < 50.0; z += 0.0731) {
    const double w = lambert_w(z);
    CHECK(std::fabs(w * std::exp(w) - z) <= 1e-12 * std::max(1.0, std::fabs(z)));
  }
  CHECK_THROWS_AS(lambert_w(-0.5), DomainError);
}

TEST_CASE("mixed populations") {
  const double x = 0.35, y = 0.15;
  const double m3 = ((1 - y) * (1 - y) * entropy(x) + (1 + x - x * y) * entropy(y)) / ((1 + y) * (1 + x - x * y));
  CHECK(mixed_performance(id("M3"), x, y) == doctest::Approx(m3).epsilon(1e-14));
  const TreeAnalysis a = analyze_tree(*make_strategy("M3"), RiskModel::two_group(x, y));
  CHECK(a.tests_per_run == doctest::Approx((1 + y) * (1 + x - x * y) / (1 - y)).epsilon(1e-12));
  CHECK(a.information_per_test == doctest::Approx(m3).epsilon(1e-12));
  // M1 through the analyzer with the same helper cost as the closed formula.
  const TreeAnalysis m1 = analyze_tree(*make_strategy("M1"), RiskModel::two_group(x, y));
  CHECK(m1.information_per_test == doctest::Approx(mixed_performance(id("M1"), x, y)).epsilon(1e-10));
  // y -> 0 limit of M3.
  CHECK(mixed_performance(id("M3"), 0.3, 1e-9) == doctest::Approx(entropy(0.3) / 1.3).epsilon(1e-6));

  const MixedChoice c = mixed_select(0.38, 0.15);
  CHECK(c.ratio >= 0.99);
  const MixedChoice d = mixed_select(0.25, 0.10);
  CHECK(d.id.mixed == MixedKind::M4);
  CHECK(d.id.arity >= 2);
  CHECK(d.id.arity <= 5);
  CHECK(d.ratio >= 0.99);
  const MixedChoice e = mixed_select(0.15, 0.38);
  CHECK(e.swapped);
  CHECK(e.id == c.id);
  CHECK(e.ratio == c.ratio);
  CHECK_THROWS_AS(mixed_performance(id("A3"), x, y), InvalidStrategy);
}

TEST_CASE("cost CSV") {
  std::ostringstream os;
  write_cost_csv(os, {id("A2"), id("A1")}, {0.3, 0.1});
  const std::string s = os.str();
  CHECK(s.rfind("strategy_id,x,cost_per_person,entropy,optimality\nA2,0.1,", 0) == 0);
  std::istringstream is(s);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  CHECK(lines[2].rfind("A2,0.3,", 0) == 0);
  CHECK(lines[3] == "A1,0.1,1,0.468995593589281,0.468995593589281");
}
