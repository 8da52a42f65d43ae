#include "poolgt/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "poolgt/analyzer.hpp"
#include "poolgt/cost.hpp"
#include "poolgt/errors.hpp"

namespace poolgt {

std::string_view status_name(Status s) {
  switch (s) {
    case Status::Pending: return "PENDING";
    case Status::Pos: return "POS";
    case Status::Neg: return "NEG";
  }
  return "?";
}

namespace {

constexpr int kVirtual = -1;

struct Unit {
  int depth = 0;
  std::vector<int> m;  // 2^depth members, kVirtual for known negatives

  int first_real() const {
    for (int v : m)
      if (v != kVirtual) return v;
    return kVirtual;
  }
  bool all_virtual() const { return first_real() == kVirtual; }
  Unit half(int which) const {
    const std::size_t h = m.size() / 2;
    Unit u;
    u.depth = depth - 1;
    u.m.assign(m.begin() + (which ? h : 0), m.begin() + (which ? m.size() : h));
    return u;
  }
};

struct Indiv {
  Stratum stratum = Stratum::Default;
  bool urgent = false;
  Status status = Status::Pending;
  int tested = 0;
};

struct Supply {
  std::deque<int> urgent, normal, fifo;
  bool empty() const { return urgent.empty() && normal.empty() && fifo.empty(); }
  std::size_t size() const { return urgent.size() + normal.size() + fifo.size(); }
};

enum class RunState { Ready, Testing, Parked, Blocked };

struct Run {
  int id = 0;
  NodeId node = kNoNode;
  std::vector<std::optional<Unit>> bound;
  std::map<NodeId, int> loops;
  RunState st = RunState::Ready;

  std::deque<LabelId> intro;  // labels still to draw at the current node
  std::optional<Unit> partial;

  bool in_agenda = false;
  std::deque<std::pair<LabelId, Assignment>> agenda;
  std::optional<Unit> halving;
  LabelId halving_label = -1;

  bool deferred = false;
  std::optional<bool> defer_result;
};

struct Lane {
  int id = 0;
  int level = 0;
  int parent = -1;          // owning lane for helpers
  bool helper = false;
  bool follow = false;      // draws Default labels from the lower stratum
  StrategyPtr strat;
  const Tree* tree = nullptr;
  int extra = 0;            // pair wrappers around the core tree
  int item_depth = 0;
  std::vector<bool> guaranteed;
  RiskModel risk;
  std::vector<double> posterior;
  bool posterior_ready = false;

  std::deque<Unit> pending, fifo;   // helper lanes
  std::map<int, int> waiting;       // helper lanes: first real member -> parent run id
  std::map<NodeId, int> helpers;    // defer node -> helper lane id

  std::vector<std::unique_ptr<Run>> runs;
  int next_run = 0;

  int unit_depth(LabelId l) const { return tree->labels[l].depth + extra + item_depth; }
  Stratum draw_stratum(LabelId l) const { return follow ? Stratum::Lower : tree->labels[l].stratum; }
};

struct Outstanding {
  PendingTest test;
  int lane = 0;
  int run = 0;
  bool halving = false;
};

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

struct Executor::Impl {
  StrategyPtr strategy;
  EngineConfig cfg;
  std::vector<Indiv> people;
  std::map<Stratum, Supply> supply;
  std::vector<std::unique_ptr<Lane>> lanes;
  bool follow_created = false;
  std::optional<Outstanding> out;
  std::uint64_t seq = 0;
  std::size_t unresolved = 0;
  EngineCounters counters;
  std::vector<Event> events;

  Impl(StrategyPtr s, EngineConfig c) : strategy(std::move(s)), cfg(std::move(c)) {
    if (!strategy) throw InvalidStrategy("executor needs a strategy");
    require_valid(*strategy);
    cfg.risk.check();
    add_lane(strategy, -1, 0, false);
  }

  // --- lanes -----------------------------------------------------------------

  Lane& add_lane(StrategyPtr s, int parent, int item_depth, bool follow) {
    auto lane = std::make_unique<Lane>();
    lane->id = static_cast<int>(lanes.size());
    lane->parent = parent;
    lane->helper = parent >= 0;
    lane->follow = follow;
    lane->level = parent >= 0 ? lanes[parent]->level + 1 : 0;
    lane->strat = std::move(s);
    auto [tree, extra] = lane->strat->core();
    lane->tree = tree;
    lane->extra = extra;
    lane->item_depth = item_depth;
    lane->guaranteed = guaranteed_labels(*tree);
    lane->risk = follow ? RiskModel::homogeneous(cfg.risk.y) : cfg.risk;
    lanes.push_back(std::move(lane));
    return *lanes.back();
  }

  double posterior_at(Lane& lane, NodeId node) {
    if (!lane.posterior_ready) {
      lane.posterior = analyze_tree(*lane.strat, lane.risk).defer_posterior;
      lane.posterior_ready = true;
    }
    return lane.posterior[node];
  }

  int helper_for(int lane_id, NodeId node) {
    Lane& lane = *lanes[lane_id];
    if (auto it = lane.helpers.find(node); it != lane.helpers.end()) return it->second;
    const TreeNode& n = lane.tree->nodes[node];
    const double z = posterior_at(lane, node);
    StrategyId sid;
    if (n.solver == "best") {
      sid = (z > 0.0 && z < 1.0) ? select_best(z) : StrategyId::homogeneous(1);
    } else {
      sid = StrategyId::parse(n.solver);
    }
    const int depth = lane.unit_depth(n.deferred);
    Lane& h = add_lane(make_strategy(sid), lane_id, depth, false);
    h.risk = RiskModel::homogeneous(std::clamp(std::isfinite(z) ? z : 0.0, 0.0, 1.0));
    lanes[lane_id]->helpers.emplace(node, h.id);
    return h.id;
  }

  std::vector<Lane*> ordered_lanes() {
    std::vector<Lane*> v;
    for (auto& l : lanes) v.push_back(l.get());
    std::stable_sort(v.begin(), v.end(), [](Lane* a, Lane* b) { return a->level > b->level; });
    return v;
  }

  // --- events ------------------------------------------------------------------

  void emit(Event e) {
    if (cfg.record_events) events.push_back(std::move(e));
  }

  std::string slot_name(const Lane& lane, LabelId l, std::size_t member, std::size_t size) const {
    std::string s = lane.tree->labels[l].name;
    if (size > 1) s += "[" + std::to_string(member + 1) + "]";
    return s;
  }

  // --- supply ------------------------------------------------------------------

  bool has_supply(const Lane& lane, LabelId l) const {
    if (lane.helper) return !lane.pending.empty() || !lane.fifo.empty();
    auto it = supply.find(lane.draw_stratum(l));
    return it != supply.end() && !it->second.empty();
  }

  static int pop(std::deque<int>& q) {
    int v = q.front();
    q.pop_front();
    return v;
  }

  int draw_individual(Supply& s, bool guaranteed_slot) {
    if (guaranteed_slot) {
      if (!s.urgent.empty()) return pop(s.urgent);
      if (!s.normal.empty()) return pop(s.normal);
      return pop(s.fifo);
    }
    if (!s.normal.empty()) return pop(s.normal);
    if (!s.fifo.empty()) return pop(s.fifo);
    return pop(s.urgent);
  }

  // Fills the run's partial unit; false when supply ran out.
  bool introduce(Lane& lane, Run& run) {
    while (!run.intro.empty()) {
      const LabelId l = run.intro.front();
      const int depth = lane.unit_depth(l);
      if (lane.helper) {
        // Helper items are whole units from the owning lane.
        const int per = 1 << (depth - lane.item_depth);
        if (!run.partial) run.partial = Unit{depth, {}};
        while (static_cast<int>(run.partial->m.size()) < (1 << depth)) {
          if (lane.pending.empty() && lane.fifo.empty()) return false;
          std::deque<Unit>& q = !lane.pending.empty() ? lane.pending : lane.fifo;
          Unit item = std::move(q.front());
          q.pop_front();
          run.partial->m.insert(run.partial->m.end(), item.m.begin(), item.m.end());
          emit({EventKind::Introduced, item.first_real(), Status::Pending, lane.id,
                slot_name(lane, l, run.partial->m.size() / item.m.size() - 1, per), false, {}, false});
        }
      } else {
        Supply& s = supply[lane.draw_stratum(l)];
        const std::size_t size = std::size_t{1} << depth;
        if (!run.partial) run.partial = Unit{depth, {}};
        while (run.partial->m.size() < size) {
          if (s.empty()) return false;
          const bool slot = lane.guaranteed[l] && run.partial->m.size() + 1 == size;
          const int who = draw_individual(s, slot);
          run.partial->m.push_back(who);
          emit({EventKind::Introduced, who, Status::Pending, lane.id,
                slot_name(lane, l, run.partial->m.size() - 1, size), slot, {}, false});
        }
      }
      run.bound[l] = std::move(*run.partial);
      run.partial.reset();
      run.intro.pop_front();
    }
    return true;
  }

  void supply_virtual(Lane& lane, Run& run) {
    const LabelId l = run.intro.front();
    if (!run.partial) run.partial = Unit{lane.unit_depth(l), {}};
    const int n = lane.helper ? 1 << lane.item_depth : 1;
    for (int i = 0; i < n; ++i) run.partial->m.push_back(kVirtual);
    ++counters.introduction_failures;
    emit({EventKind::IntroFailure, kVirtual, Status::Pending, lane.id, lane.tree->labels[l].name, false, {}, false});
    run.st = RunState::Ready;
  }

  bool can_start(const Lane& lane) const {
    for (const auto& r : lane.runs)
      if (r->st == RunState::Ready || r->st == RunState::Blocked || r->st == RunState::Testing) return false;
    if (lane.helper) return !lane.pending.empty() || !lane.fifo.empty();
    const TreeNode& root = lane.tree->nodes[lane.tree->root];
    return has_supply(lane, root.introductions.front());
  }

  void start_run(Lane& lane) {
    auto run = std::make_unique<Run>();
    run->id = lane.next_run++;
    run->node = lane.tree->root;
    run->bound.assign(lane.tree->labels.size(), std::nullopt);
    const TreeNode& root = lane.tree->nodes[run->node];
    run->intro.assign(root.introductions.begin(), root.introductions.end());
    if (lane.id == 0) ++counters.runs;
    lane.runs.push_back(std::move(run));
  }

  // --- resolution ---------------------------------------------------------------

  void resolve_individual(int who, Status st) {
    if (who == kVirtual) return;
    Indiv& p = people[who];
    if (p.status != Status::Pending) {
      if (p.status != st) throw std::logic_error("contradictory resolution of individual " + std::to_string(who));
      return;
    }
    p.status = st;
    --unresolved;
    emit({EventKind::Resolved, who, st, 0, {}, false, {}, false});
  }

  std::vector<Unit> items_of(const Lane& lane, const Unit& u) const {
    std::vector<Unit> out;
    const std::size_t n = std::size_t{1} << lane.item_depth;
    for (std::size_t i = 0; i < u.m.size(); i += n) out.push_back(Unit{lane.item_depth, {u.m.begin() + i, u.m.begin() + i + n}});
    return out;
  }

  void notify(Lane& helper, const Unit& item, bool positive) {
    auto it = helper.waiting.find(item.first_real());
    if (it == helper.waiting.end()) return;
    Lane& owner = *lanes[helper.parent];
    for (auto& r : owner.runs) {
      if (r->id == it->second) {
        r->defer_result = positive;
        r->st = RunState::Ready;
      }
    }
    helper.waiting.erase(it);
  }

  void settle_neg(Lane& lane, const Unit& u) {
    for (int who : u.m) resolve_individual(who, Status::Neg);
    if (lane.helper)
      for (const Unit& item : items_of(lane, u)) notify(lane, item, false);
  }

  void settle_pos_item(Lane& lane, const Unit& item) {
    if (lane.helper) {
      notify(lane, item, true);
    } else {
      resolve_individual(item.m.front(), Status::Pos);
    }
  }

  void repool(Lane& lane, const Unit& u) {
    if (lane.helper) {
      for (Unit& item : items_of(lane, u)) {
        if (item.all_virtual()) continue;
        for (int who : item.m)
          if (who != kVirtual) {
            ++counters.repool_events;
            emit({EventKind::Repooled, who, Status::Pending, lane.id, {}, false, {}, false});
          }
        lane.fifo.push_back(std::move(item));
      }
      return;
    }
    for (int who : u.m) {
      if (who == kVirtual) continue;
      Indiv& p = people[who];
      Supply& s = supply[p.stratum];
      (p.urgent ? s.urgent : s.fifo).push_back(who);
      ++counters.repool_events;
      emit({EventKind::Repooled, who, Status::Pending, lane.id, {}, false, {}, false});
    }
  }

  // --- stepping -------------------------------------------------------------------

  void enter(Lane& lane, Run& run, NodeId node) {
    run.node = node;
    run.deferred = false;
    run.defer_result.reset();
    run.in_agenda = false;
    const TreeNode& n = lane.tree->nodes[node];
    if (n.kind == NodeKind::PoolTest) run.intro.assign(n.introductions.begin(), n.introductions.end());
  }

  void issue(Lane& lane, Run& run, const std::vector<int>& members, std::string note, bool halving) {
    std::vector<int> real;
    for (int v : members)
      if (v != kVirtual) real.push_back(v);
    if (real.empty()) {
      ++counters.skipped_tests;
      apply(lane, run, false, halving);
      return;
    }
    Outstanding o;
    o.test.seq = ++seq;
    o.test.members = std::move(real);
    o.test.lane = lane.id;
    o.test.node = halving ? kNoNode : run.node;
    o.test.note = std::move(note);
    o.lane = lane.id;
    o.run = run.id;
    o.halving = halving;
    run.st = RunState::Testing;
    out = std::move(o);
  }

  void apply(Lane& lane, Run& run, bool positive, bool halving) {
    run.st = RunState::Ready;
    if (halving) {
      Unit u = std::move(*run.halving);
      if (positive) {
        repool(lane, u.half(0));
        run.halving = u.half(1);
      } else {
        settle_neg(lane, u.half(1));
        run.halving = u.half(0);
      }
      return;
    }
    const TreeNode& n = lane.tree->nodes[run.node];
    enter(lane, run, positive ? n.pos : n.neg);
  }

  std::string pool_note(const Lane& lane, const TreeNode& n) const {
    std::string s = lane.strat->id.str();
    if (lane.helper) s += " (helper lane " + std::to_string(lane.id) + ")";
    s += ": pool ";
    for (std::size_t i = 0; i < n.pool.size(); ++i) s += (i ? "," : "") + lane.tree->labels[n.pool[i]].name;
    return s;
  }

  // Runs the leaf or loop agenda; true once it is complete.
  bool run_agenda(Lane& lane, Run& run) {
    while (true) {
      if (run.halving) {
        if (run.halving->depth == lane.item_depth) {
          settle_pos_item(lane, *run.halving);
          run.halving.reset();
          continue;
        }
        std::string note = lane.strat->id.str() + ": narrow " + lane.tree->labels[run.halving_label].name +
                           " (second half)";
        issue(lane, run, run.halving->half(1).m, std::move(note), true);
        return false;
      }
      if (run.agenda.empty()) return true;
      auto [l, a] = run.agenda.front();
      run.agenda.pop_front();
      Unit u = std::move(*run.bound[l]);
      run.bound[l].reset();
      switch (a) {
        case Assignment::Neg: settle_neg(lane, u); break;
        case Assignment::Repool: repool(lane, u); break;
        case Assignment::Pos:
          run.halving = std::move(u);
          run.halving_label = l;
          break;
      }
      if (out) return false;
    }
  }

  void finish_run(Lane& lane, Run& run) {
    const int id = run.id;
    lane.runs.erase(std::remove_if(lane.runs.begin(), lane.runs.end(), [&](auto& r) { return r->id == id; }),
                    lane.runs.end());
  }

  void step(Lane& lane, Run& run) {
    if (!run.intro.empty()) {
      if (!introduce(lane, run)) {
        run.st = RunState::Blocked;
        return;
      }
    }
    const TreeNode& n = lane.tree->nodes[run.node];
    switch (n.kind) {
      case NodeKind::PoolTest: {
        std::vector<int> members;
        for (LabelId l : n.pool) members.insert(members.end(), run.bound[l]->m.begin(), run.bound[l]->m.end());
        issue(lane, run, members, pool_note(lane, n), false);
        return;
      }
      case NodeKind::Defer: {
        if (run.defer_result) {
          enter(lane, run, *run.defer_result ? n.pos : n.neg);
          return;
        }
        if (run.deferred) {
          run.st = RunState::Parked;
          return;
        }
        const Unit& u = *run.bound[n.deferred];
        run.deferred = true;
        if (u.all_virtual()) {
          run.defer_result = false;
          return;
        }
        const int hid = helper_for(lane.id, run.node);
        Lane& h = *lanes[hid];
        // the unit is split into the helper's items (one item when depths agree)
        h.waiting[u.first_real()] = run.id;
        h.pending.push_back(u);
        run.st = RunState::Parked;
        return;
      }
      case NodeKind::Leaf:
      case NodeKind::Loop: {
        if (!run.in_agenda) {
          run.in_agenda = true;
          run.agenda.assign(n.assignments.begin(), n.assignments.end());
        }
        if (!run_agenda(lane, run)) return;
        if (n.kind == NodeKind::Leaf) {
          finish_run(lane, run);
          return;
        }
        const int cap = cfg.loop_cap >= 0 ? cfg.loop_cap : n.loop.cap;
        int& taken = run.loops[run.node];
        if (taken < cap) {
          ++taken;
          ++counters.loop_taken;
          emit({EventKind::LoopTaken, -1, Status::Pending, lane.id, {}, false, {}, false});
          const NodeId self = run.node;
          run.node = n.loop.target;
          run.in_agenda = false;
          run.intro.clear();
          const TreeNode& t = lane.tree->nodes[n.loop.target];
          for (LabelId l : t.introductions)
            if (std::find(lane.tree->nodes[self].loop.redraw.begin(), lane.tree->nodes[self].loop.redraw.end(), l) !=
                lane.tree->nodes[self].loop.redraw.end())
              run.intro.push_back(l);
        } else {
          ++counters.loop_aborts;
          emit({EventKind::LoopAbort, -1, Status::Pending, lane.id, {}, false, {}, false});
          enter(lane, run, n.loop.abort);
        }
        return;
      }
    }
  }

  bool steppable(const Lane& lane, const Run& run) const {
    if (run.st == RunState::Ready) return true;
    if (run.st == RunState::Blocked) return has_supply(lane, run.intro.front());
    return false;
  }

  void advance() {
    while (!out) {
      auto order = ordered_lanes();
      bool acted = false;
      for (Lane* lane : order) {
        for (std::size_t i = 0; i < lane->runs.size() && !acted; ++i) {
          Run& r = *lane->runs[i];
          if (steppable(*lane, r)) {
            step(*lane, r);
            acted = true;
          }
        }
        if (acted) break;
      }
      if (acted) continue;
      for (Lane* lane : order) {
        if (can_start(*lane)) {
          start_run(*lane);
          acted = true;
          break;
        }
      }
      if (acted) continue;
      for (Lane* lane : order) {
        for (auto& r : lane->runs) {
          if (r->st == RunState::Blocked) {
            supply_virtual(*lane, *r);
            acted = true;
            break;
          }
        }
        if (acted) break;
      }
      if (acted) continue;
      if (cfg.follow_up && !follow_created && lanes[0]->tree->mixed && lanes[0]->runs.empty() &&
          supply.count(Stratum::Lower) && !supply[Stratum::Lower].empty()) {
        follow_created = true;
        const double y = cfg.risk.y;
        const StrategyId sid = (y > 0.0 && y < 1.0) ? select_best(y) : StrategyId::homogeneous(1);
        add_lane(make_strategy(sid), -1, 0, true);
        continue;
      }
      for (auto& lane : lanes)
        if (!lane->runs.empty()) throw std::logic_error("executor stalled with parked runs");
      return;
    }
  }
};

Executor::Executor(StrategyPtr strategy, EngineConfig config)
    : impl_(std::make_unique<Impl>(std::move(strategy), std::move(config))) {}
Executor::~Executor() = default;
Executor::Executor(Executor&&) noexcept = default;
Executor& Executor::operator=(Executor&&) noexcept = default;

int Executor::add_individual(Stratum stratum, bool urgent) {
  Impl& m = *impl_;
  const int id = static_cast<int>(m.people.size());
  m.people.push_back({stratum, urgent, Status::Pending, 0});
  Supply& s = m.supply[stratum];
  (urgent ? s.urgent : s.normal).push_back(id);
  ++m.unresolved;
  return id;
}

int Executor::population() const { return static_cast<int>(impl_->people.size()); }

std::optional<PendingTest> Executor::next() {
  impl_->advance();
  if (!impl_->out) return std::nullopt;
  return impl_->out->test;
}

bool Executor::has_outstanding() const { return impl_->out.has_value(); }

void Executor::submit(bool positive) {
  Impl& m = *impl_;
  if (!m.out) throw SequencingError("no outstanding test");
  Outstanding o = std::move(*m.out);
  m.out.reset();
  ++m.counters.tests;
  for (int who : o.test.members) ++m.people[who].tested;
  if (m.cfg.record_events) {
    Event e{EventKind::Test, -1, Status::Pending, o.lane, {}, false, o.test.members, positive};
    m.events.push_back(std::move(e));
  }
  Lane& lane = *m.lanes[o.lane];
  for (auto& r : lane.runs) {
    if (r->id == o.run) {
      m.apply(lane, *r, positive, o.halving);
      m.advance();
      return;
    }
  }
  throw std::logic_error("outstanding test lost its run");
}

Status Executor::status(int i) const { return impl_->people.at(i).status; }
int Executor::times_tested(int i) const { return impl_->people.at(i).tested; }
Stratum Executor::stratum(int i) const { return impl_->people.at(i).stratum; }
bool Executor::urgent(int i) const { return impl_->people.at(i).urgent; }
std::size_t Executor::unresolved() const { return impl_->unresolved; }

std::size_t Executor::queued(Stratum s) const {
  auto it = impl_->supply.find(s);
  return it == impl_->supply.end() ? 0 : it->second.size();
}

const EngineCounters& Executor::counters() const { return impl_->counters; }

std::vector<Event> Executor::take_events() {
  std::vector<Event> out;
  out.swap(impl_->events);
  return out;
}

const Strategy& Executor::strategy() const { return *impl_->strategy; }

std::string Executor::fingerprint() const {
  const Impl& m = *impl_;
  std::ostringstream os;
  for (const Indiv& p : m.people) os << static_cast<int>(p.status) << p.tested << ',';
  os << '|';
  for (const auto& [st, s] : m.supply) {
    os << static_cast<int>(st) << ':';
    for (auto* q : {&s.urgent, &s.normal, &s.fifo}) {
      for (int v : *q) os << v << ' ';
      os << ';';
    }
  }
  auto unit = [&](const Unit& u) {
    os << '(';
    for (int v : u.m) os << v << ' ';
    os << ')';
  };
  for (const auto& lane : m.lanes) {
    os << "|L" << lane->id << ':' << lane->strat->id.str() << ':';
    for (auto* q : {&lane->pending, &lane->fifo}) {
      for (const Unit& u : *q) unit(u);
      os << ';';
    }
    for (const auto& r : lane->runs) {
      os << 'r' << r->id << '@' << r->node << 's' << static_cast<int>(r->st);
      for (const auto& b : r->bound)
        if (b) unit(*b);
        else os << '_';
      for (auto [k, v] : r->loops) os << 'l' << k << '=' << v;
    }
  }
  const EngineCounters& c = m.counters;
  os << "|c" << c.tests << ',' << c.skipped_tests << ',' << c.introduction_failures << ',' << c.repool_events << ','
     << c.loop_taken << ',' << c.loop_aborts << ',' << c.runs;
  if (m.out) {
    os << "|o" << m.out->test.seq;
    for (int v : m.out->test.members) os << ' ' << v;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv(os.str())));
  return buf;
}

}  // namespace poolgt
