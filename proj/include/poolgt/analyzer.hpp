#pragma once

// Exact expectation of a strategy tree over the truth vectors of its labels.
// Loops are folded with the geometric fixed point of an uncapped loop, which
// requires the labels kept across the jump to look exactly as they did on
// first arrival at the target.

#include <functional>
#include <string>
#include <vector>

#include "poolgt/risk.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt {

// Tests per item spent by a defer helper at the item's posterior risk.
using SolverCost = std::function<double(const std::string& solver, double z)>;

struct TreeAnalysis {
  double tests_per_run = 0.0;
  double resolved_per_run = 0.0;  // individuals
  double tests_per_person = 0.0;
  double resolved_upper = 0.0;    // by stratum (Default counts as upper)
  double resolved_lower = 0.0;
  double information_per_run = 0.0;  // bits
  double information_per_test = 0.0;
  double loop_probability = 0.0;     // chance a pass through a loop target jumps back
  // Posterior risk of the deferred unit at each defer node (NaN elsewhere).
  std::vector<double> defer_posterior;
};

TreeAnalysis analyze_tree(const Strategy& strategy, const RiskModel& risk, const SolverCost& solver_cost = {});

// Expected individuals resolved when halving a unit of 2^depth items known to
// hold a positive, each item positive with rate p.
double halving_resolved(int depth, double p);

}  // namespace poolgt
