#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <numeric>
#include <set>
#include <vector>

#include "poolgt/engine.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt::testing {

struct Step {
  std::vector<int> members;  // sorted
  bool positive;
  friend auto operator<=>(const Step&, const Step&) = default;
};

// Final per-individual outcome of a run: 0 NEG, 1 POS, 2 re-pooled.
struct Transcript {
  std::vector<Step> steps;
  std::vector<int> final_status;
  friend auto operator<=>(const Transcript&, const Transcript&) = default;
};

// Plays one run of the main tree on exactly n individuals with a fixed truth
// vector, stopping once every individual is resolved or re-pooled.
inline Transcript run_transcript(const StrategyPtr& s, const std::vector<bool>& truth, const RiskModel& risk) {
  EngineConfig cfg;
  cfg.risk = risk;
  Executor ex(s, cfg);
  const std::size_t n = truth.size();
  for (std::size_t i = 0; i < n; ++i) ex.add_individual();
  Transcript t;
  t.final_status.assign(n, -1);
  std::size_t settled = 0;
  auto absorb = [&] {
    for (const Event& e : ex.take_events()) {
      if (e.individual < 0) continue;
      int v = -1;
      if (e.kind == EventKind::Resolved) v = e.status == Status::Pos ? 1 : 0;
      else if (e.kind == EventKind::Repooled) v = 2;
      if (v < 0) continue;
      int& slot = t.final_status[static_cast<std::size_t>(e.individual)];
      if (slot < 0) ++settled;
      if (slot < 0 || slot == 2) slot = v;
    }
  };
  while (settled < n) {
    std::optional<PendingTest> p = ex.next();
    absorb();
    if (!p || settled == n) break;
    bool pos = false;
    for (int m : p->members) pos |= truth[static_cast<std::size_t>(m)];
    std::vector<int> mem = p->members;
    std::sort(mem.begin(), mem.end());
    t.steps.push_back({std::move(mem), pos});
    ex.submit(pos);
    absorb();
  }
  return t;
}

inline std::set<Transcript> all_transcripts(const StrategyPtr& s, int n, const RiskModel& risk) {
  std::set<Transcript> out;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    std::vector<bool> truth(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) truth[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    out.insert(run_transcript(s, truth, risk));
  }
  return out;
}

inline Transcript relabel(const Transcript& t, const std::vector<int>& sigma) {
  Transcript r;
  for (const Step& s : t.steps) {
    Step q{{}, s.positive};
    for (int m : s.members) q.members.push_back(sigma[static_cast<std::size_t>(m)]);
    std::sort(q.members.begin(), q.members.end());
    r.steps.push_back(std::move(q));
  }
  r.final_status.resize(t.final_status.size());
  for (std::size_t i = 0; i < t.final_status.size(); ++i)
    r.final_status[static_cast<std::size_t>(sigma[i])] = t.final_status[i];
  return r;
}

// True when some relabelling of individuals maps every transcript of `a`
// onto a transcript of `b` and the two sets coincide.
inline bool transcripts_isomorphic(const std::set<Transcript>& a, const std::set<Transcript>& b, int n) {
  if (a.size() != b.size()) return false;
  std::vector<int> sigma(static_cast<std::size_t>(n));
  std::iota(sigma.begin(), sigma.end(), 0);
  do {
    bool ok = true;
    for (const Transcript& t : a) {
      if (!b.count(relabel(t, sigma))) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return false;
}

}  // namespace poolgt::testing
