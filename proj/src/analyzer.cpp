#include "poolgt/analyzer.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"

namespace poolgt {

double halving_resolved(int depth, double p) {
  double res = 1.0;
  for (int j = 1; j <= depth; ++j) {
    const double r_hi = -std::expm1(std::ldexp(1.0, j) * std::log1p(-p));
    const double r_lo = -std::expm1(std::ldexp(1.0, j - 1) * std::log1p(-p));
    const double q = r_hi > 0.0 ? r_lo / r_hi : 0.5;
    res += (1.0 - q) * std::ldexp(1.0, j - 1);
  }
  return res;
}

namespace {

constexpr std::size_t kMaxLabels = 22;
constexpr double kStationarityTol = 1e-9;

struct Entry {
  std::uint32_t mask;
  double w;
};
using Dist = std::vector<Entry>;

struct Acc {
  double tests = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  std::map<NodeId, double> back;  // mass jumping back to each loop target

  void add(const Acc& o) {
    tests += o.tests;
    upper += o.upper;
    lower += o.lower;
    for (auto [k, v] : o.back) back[k] += v;
  }
};

double mass(const Dist& d) {
  double m = 0.0;
  for (const Entry& e : d) m += e.w;
  return m;
}

struct Analyzer {
  const Tree& tree;
  int extra_depth;
  const RiskModel& risk;
  const SolverCost& cost;
  std::vector<double> unit_prior;
  std::vector<double> item_rate;
  std::vector<std::vector<LabelId>> live;
  std::vector<bool> is_target;
  std::map<NodeId, std::vector<double>> target_marginal;
  std::vector<double> posterior;
  double loop_probability = 0.0;

  Analyzer(const Tree& t, int e, const RiskModel& r, const SolverCost& c)
      : tree(t), extra_depth(e), risk(r), cost(c) {
    for (const Label& l : t.labels) {
      const double p = r.rate(l.stratum);
      item_rate.push_back(p);
      unit_prior.push_back(-std::expm1(std::ldexp(1.0, l.depth + e) * std::log1p(-p)));
    }
    live = live_labels(t);
    is_target.assign(t.nodes.size(), false);
    for (const TreeNode& n : t.nodes)
      if (n.kind == NodeKind::Loop && n.loop.target >= 0) is_target[n.loop.target] = true;
    posterior.assign(t.nodes.size(), std::numeric_limits<double>::quiet_NaN());
  }

  std::vector<LabelId> retained(NodeId target, const TreeNode& loop) const {
    std::vector<LabelId> out;
    for (LabelId l : live[target]) {
      bool redrawn = false;
      for (LabelId r : loop.loop.redraw) redrawn |= r == l;
      if (!redrawn) out.push_back(l);
    }
    return out;
  }

  // Normalised marginal over the given labels, indexed by their bit pattern.
  static std::vector<double> marginal(const Dist& d, const std::vector<LabelId>& ls) {
    std::vector<double> m(std::size_t{1} << ls.size(), 0.0);
    double total = 0.0;
    for (const Entry& e : d) {
      std::size_t idx = 0;
      for (std::size_t i = 0; i < ls.size(); ++i)
        if (e.mask >> ls[i] & 1u) idx |= std::size_t{1} << i;
      m[idx] += e.w;
      total += e.w;
    }
    if (total > 0.0)
      for (double& v : m) v /= total;
    return m;
  }

  void settle(const TreeNode& n, double m, Acc& acc) const {
    for (auto [l, a] : n.assignments) {
      const int d = tree.labels[l].depth + extra_depth;
      double resolved = 0.0;
      if (a == Assignment::Pos) {
        resolved = halving_resolved(d, item_rate[l]);
        acc.tests += m * d;
      } else if (a == Assignment::Neg) {
        resolved = std::ldexp(1.0, d);
      }
      (tree.labels[l].stratum == Stratum::Lower ? acc.lower : acc.upper) += m * resolved;
    }
  }

  Acc eval(NodeId id, const Dist& d) {
    Acc acc;
    const double m = mass(d);
    if (m <= 0.0) return acc;
    const TreeNode& n = tree.nodes[id];
    switch (n.kind) {
      case NodeKind::PoolTest: {
        if (is_target[id] && !target_marginal.count(id)) {
          std::vector<LabelId> keep;
          for (const TreeNode& ln : tree.nodes)
            if (ln.kind == NodeKind::Loop && ln.loop.target == id) keep = retained(id, ln);
          target_marginal[id] = marginal(d, keep);
        }
        std::uint32_t pm = 0;
        for (LabelId l : n.pool) pm |= 1u << l;
        Dist neg, pos;
        for (const Entry& e : d) (e.mask & pm ? pos : neg).push_back(e);
        acc.tests += m;
        acc.add(eval(n.neg, neg));
        acc.add(eval(n.pos, pos));
        if (is_target[id]) {
          const double back = acc.back[id];
          acc.back.erase(id);
          const double p = back / m;
          loop_probability = std::max(loop_probability, p);
          if (p >= 1.0 - 1e-15) throw AnalysisError("loop at node " + std::to_string(id) + " never exits");
          const double scale = 1.0 / (1.0 - p);
          acc.tests *= scale;
          acc.upper *= scale;
          acc.lower *= scale;
          for (auto& [k, v] : acc.back) v *= scale;
        }
        break;
      }
      case NodeKind::Defer: {
        const std::uint32_t bit = 1u << n.deferred;
        double pos_mass = 0.0;
        Dist neg, pos;
        for (const Entry& e : d) {
          if (e.mask & bit) {
            pos.push_back(e);
            pos_mass += e.w;
          } else {
            neg.push_back(e);
          }
        }
        const double z = pos_mass / m;
        if (std::isnan(posterior[id])) posterior[id] = z;
        const double phi = cost ? cost(n.solver, z) : solver_cost(n.solver, z);
        if (!std::isfinite(phi)) throw AnalysisError("helper " + n.solver + " has no cost at risk " + std::to_string(z));
        acc.tests += m * phi;
        acc.add(eval(n.neg, neg));
        acc.add(eval(n.pos, pos));
        break;
      }
      case NodeKind::Leaf:
        settle(n, m, acc);
        break;
      case NodeKind::Loop: {
        settle(n, m, acc);
        const NodeId t = n.loop.target;
        auto it = target_marginal.find(t);
        if (it == target_marginal.end()) throw AnalysisError("loop target reached out of order");
        std::vector<double> here = marginal(d, retained(t, n));
        for (std::size_t i = 0; i < here.size(); ++i)
          if (std::abs(here[i] - it->second[i]) > kStationarityTol)
            throw AnalysisError("labels kept across the loop at node " + std::to_string(id) +
                                " carry information gathered since the target; the fixed point does not apply");
        acc.back[t] += m;
        break;
      }
    }
    return acc;
  }
};

}  // namespace

TreeAnalysis analyze_tree(const Strategy& strategy, const RiskModel& risk, const SolverCost& solver_cost_fn) {
  risk.check();
  auto [tree, extra] = strategy.core();
  if (tree->labels.size() > kMaxLabels)
    throw AnalysisError("too many labels to enumerate (" + std::to_string(tree->labels.size()) + ")");
  if (auto r = validate(strategy); !r.ok()) throw InvalidStrategy("cannot analyze an invalid strategy:\n" + r.str());
  for (const Label& l : tree->labels)
    if (risk.rate(l.stratum) >= 1.0) throw DomainError("analysis needs rates below 1");

  Analyzer an(*tree, extra, risk, solver_cost_fn);
  const std::size_t L = tree->labels.size();
  Dist d;
  d.reserve(std::size_t{1} << L);
  for (std::uint32_t mask = 0; mask < (1u << L); ++mask) {
    double w = 1.0;
    for (std::size_t i = 0; i < L; ++i) w *= (mask >> i & 1u) ? an.unit_prior[i] : 1.0 - an.unit_prior[i];
    if (w > 0.0) d.push_back({mask, w});
  }
  Acc acc = an.eval(tree->root, d);

  TreeAnalysis out;
  out.tests_per_run = acc.tests;
  out.resolved_upper = acc.upper;
  out.resolved_lower = acc.lower;
  out.resolved_per_run = acc.upper + acc.lower;
  out.tests_per_person = out.tests_per_run / out.resolved_per_run;
  const double hx = entropy(risk.rate(Stratum::Upper));
  const double hy = tree->mixed ? entropy(risk.rate(Stratum::Lower)) : 0.0;
  out.information_per_run = acc.upper * hx + acc.lower * hy;
  out.information_per_test = out.information_per_run / out.tests_per_run;
  out.loop_probability = an.loop_probability;
  out.defer_posterior = std::move(an.posterior);
  return out;
}

}  // namespace poolgt
