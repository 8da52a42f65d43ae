#pragma once

// Expected tests per resolved person, entropy bounds, cutoffs between
// neighbouring strategies, the Dorfman baseline and strategy selection.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poolgt/analyzer.hpp"
#include "poolgt/rational.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt {

inline constexpr int kDefaultFamilyCap = 1024;

double entropy(double x);

// Cost functions of the five basic strategies, and the explicit f2 / f4 forms
// used to cross-check the pair recurrence.
const RationalFn& basic_cost_fn(int n);
const RationalFn& explicit_f2();
const RationalFn& explicit_f4();

// True when the id reduces to A1..A5 through pair compounding only.
bool has_closed_form(const StrategyId& id);
double closed_form_cost(const StrategyId& id, double x);
Rational closed_form_cost_exact(const StrategyId& id, const Rational& x);
// Batched grid evaluation (SIMD kernels where available).
void closed_form_cost(const StrategyId& id, std::span<const double> xs, std::span<double> out);
double optimality(const StrategyId& id, double x);

// Cutoff i separates A_i and A_{i+1} (i = 5 separates A5 and A6).
const Polynomial& cutoff_polynomial(int i);
double cutoff(int i);
double generic_cutoff(const StrategyId& a, const StrategyId& b, double lo, double hi);

std::vector<StrategyId> homogeneous_family(int max_pool_size = 64, bool improved = false);
StrategyId select_best(double x, bool improved = false, int max_pool_size = kDefaultFamilyCap);
std::optional<StrategyId> find_99(double x, int max_pool_size = kDefaultFamilyCap, bool improved = false);

// Cost per item of the cheapest family member at risk z.
double best_homogeneous_cost(double z);
// Cost of a named defer helper ("best" or a homogeneous id) at risk z.
double solver_cost(const std::string& solver, double z);

double dorfman_cost(int n, double p, long long population);
double dorfman_opt(double p);
int dorfman_opt_integer(double p);
double lambert_w(double z);

using CostFn = std::function<double(double)>;
double mixed_performance(const StrategyId& id, double x, double y, const CostFn& phi = {});

struct MixedChoice {
  StrategyId id;
  double ratio = 0.0;
  bool swapped = false;  // roles exchanged because y > x
};
std::vector<StrategyId> mixed_candidates();
MixedChoice mixed_select(double x, double y);

// strategy_id,x,cost_per_person,entropy,optimality; grouped by strategy, x ascending.
void write_cost_csv(std::ostream& os, const std::vector<StrategyId>& ids, std::vector<double> xs);

}  // namespace poolgt
