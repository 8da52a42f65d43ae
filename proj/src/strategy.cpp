#include "poolgt/strategy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

#include "poolgt/errors.hpp"

namespace poolgt {

char assignment_char(Assignment a) {
  switch (a) {
    case Assignment::Pos: return '+';
    case Assignment::Neg: return '-';
    case Assignment::Repool: return 'R';
  }
  return '?';
}

std::string_view stratum_name(Stratum s) {
  switch (s) {
    case Stratum::Default: return "default";
    case Stratum::Upper: return "upper";
    case Stratum::Lower: return "lower";
  }
  return "?";
}

std::string_view node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::PoolTest: return "test";
    case NodeKind::Leaf: return "leaf";
    case NodeKind::Loop: return "loop";
    case NodeKind::Defer: return "defer";
  }
  return "?";
}

LabelId Tree::find_label(std::string_view name) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i].name == name) return static_cast<LabelId>(i);
  return -1;
}

// ---------------------------------------------------------------------------

namespace {

bool valid_a_size(int n) {
  if (n < 1) return false;
  if (n <= 5) return true;
  while (n % 2 == 0) n /= 2;
  return n == 1 || n == 3 || n == 5 || n == 15;
}

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
    throw InvalidStrategy("unrecognised strategy name '" + std::string(whole) + "'");
  return v;
}

}  // namespace

StrategyId StrategyId::homogeneous(int size) {
  if (!valid_a_size(size))
    throw InvalidStrategy("no family member of size " + std::to_string(size));
  StrategyId id;
  id.size = size;
  if (size <= 5) {
    id.family = Family::Basic;
  } else if (size == 15) {
    id.family = Family::Alternative;
    id.alt = AltKind::A15;
  } else {
    id.family = Family::Compound;
  }
  return id;
}

StrategyId StrategyId::of_mixed(MixedKind kind, int arity) {
  StrategyId id;
  id.family = Family::Mixed;
  id.mixed = kind;
  id.size = 0;
  if (kind == MixedKind::M4 && arity < 1) throw InvalidStrategy("M4 arity must be at least 1");
  if (kind == MixedKind::M1Pairs && arity < 1) throw InvalidStrategy("M1P group exponent must be at least 1");
  id.arity = (kind == MixedKind::M4 || kind == MixedKind::M1Pairs) ? arity : 1;
  return id;
}

StrategyId StrategyId::of_alternative(AltKind kind) {
  StrategyId id;
  id.family = Family::Alternative;
  id.alt = kind;
  id.size = kind == AltKind::A15 ? 15 : kind == AltKind::Rec5 ? 5 : 9;
  return id;
}

StrategyId StrategyId::parse(std::string_view name) {
  auto bad = [&] { return InvalidStrategy("unrecognised strategy name '" + std::string(name) + "'"); };
  if (name.size() >= 2 && name[0] == 'A') return homogeneous(parse_int(name.substr(1), name));
  if (name == "M1") return of_mixed(MixedKind::M1);
  if (name == "M2") return of_mixed(MixedKind::M2);
  if (name == "M3") return of_mixed(MixedKind::M3);
  if (name.starts_with("M4:")) return of_mixed(MixedKind::M4, parse_int(name.substr(3), name));
  if (name.starts_with("M1P:")) return of_mixed(MixedKind::M1Pairs, parse_int(name.substr(4), name));
  if (name.starts_with("REC5") || name.starts_with("REC9")) {
    StrategyId id = of_alternative(name[3] == '5' ? AltKind::Rec5 : AltKind::Rec9);
    std::string_view rest = name.substr(4);
    if (rest.empty()) return id;
    if (rest[0] != 'x') throw bad();
    int mult = parse_int(rest.substr(1), name);
    if (mult < 2 || (mult & (mult - 1)) != 0) throw bad();
    id.size *= mult;
    return id;
  }
  throw bad();
}

std::string StrategyId::str() const {
  switch (family) {
    case Family::Basic:
    case Family::Compound:
      return "A" + std::to_string(size);
    case Family::Mixed:
      switch (mixed) {
        case MixedKind::M1: return "M1";
        case MixedKind::M2: return "M2";
        case MixedKind::M3: return "M3";
        case MixedKind::M4: return "M4:" + std::to_string(arity);
        case MixedKind::M1Pairs: return "M1P:" + std::to_string(arity);
      }
      break;
    case Family::Alternative:
      if (alt == AltKind::A15) return "A" + std::to_string(size);
      {
        int base = alt == AltKind::Rec5 ? 5 : 9;
        std::string s = alt == AltKind::Rec5 ? "REC5" : "REC9";
        if (size != base) s += "x" + std::to_string(size / base);
        return s;
      }
  }
  return "?";
}

std::pair<const Tree*, int> Strategy::core() const {
  const Strategy* s = this;
  int depth = 0;
  while (auto* p = std::get_if<Paired>(&s->body)) {
    s = p->inner.get();
    ++depth;
  }
  return {&std::get<Tree>(s->body), depth};
}

bool structurally_equal(const Strategy& a, const Strategy& b) {
  if (!(a.id == b.id) || a.body.index() != b.body.index()) return false;
  if (auto* ta = std::get_if<Tree>(&a.body)) return *ta == std::get<Tree>(b.body);
  const auto& pa = std::get<Paired>(a.body);
  const auto& pb = std::get<Paired>(b.body);
  return pa.inner && pb.inner && structurally_equal(*pa.inner, *pb.inner);
}

// ---------------------------------------------------------------------------
// TreeBuilder

LabelId TreeBuilder::label(const std::string& name, int depth) {
  if (LabelId existing = tree_.find_label(name); existing >= 0) return existing;
  Label l;
  l.name = name;
  l.depth = depth;
  if (tree_.mixed && !name.empty())
    l.stratum = std::isupper(static_cast<unsigned char>(name[0])) ? Stratum::Upper : Stratum::Lower;
  tree_.labels.push_back(std::move(l));
  return static_cast<LabelId>(tree_.labels.size() - 1);
}

std::vector<LabelId> TreeBuilder::labels(std::initializer_list<const char*> names) {
  std::vector<LabelId> out;
  for (const char* n : names) out.push_back(label(n));
  return out;
}

NodeId TreeBuilder::reserve() {
  tree_.nodes.emplace_back();
  return static_cast<NodeId>(tree_.nodes.size() - 1);
}

NodeId TreeBuilder::test(std::vector<LabelId> introductions, std::vector<LabelId> pool, NodeId neg,
                         NodeId pos, NodeId at) {
  TreeNode n;
  n.kind = NodeKind::PoolTest;
  n.introductions = std::move(introductions);
  n.pool = std::move(pool);
  n.neg = neg;
  n.pos = pos;
  if (at == kNoNode) at = reserve();
  tree_.nodes[at] = std::move(n);
  return at;
}

NodeId TreeBuilder::leaf(std::vector<std::pair<LabelId, Assignment>> assignments) {
  NodeId id = reserve();
  tree_.nodes[id].kind = NodeKind::Leaf;
  tree_.nodes[id].assignments = std::move(assignments);
  return id;
}

NodeId TreeBuilder::loop(std::vector<std::pair<LabelId, Assignment>> assignments, NodeId target,
                         std::vector<LabelId> redraw, NodeId abort, int cap) {
  NodeId id = reserve();
  TreeNode& n = tree_.nodes[id];
  n.kind = NodeKind::Loop;
  n.assignments = std::move(assignments);
  n.loop.target = target;
  n.loop.redraw = std::move(redraw);
  n.loop.abort = abort;
  n.loop.cap = cap;
  return id;
}

NodeId TreeBuilder::defer(LabelId label, std::string solver, NodeId neg, NodeId pos) {
  NodeId id = reserve();
  TreeNode& n = tree_.nodes[id];
  n.kind = NodeKind::Defer;
  n.deferred = label;
  n.solver = std::move(solver);
  n.neg = neg;
  n.pos = pos;
  return id;
}

Tree TreeBuilder::finish(NodeId root) {
  tree_.root = root;
  return std::move(tree_);
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(issues.begin(), issues.end(), [&](const auto& i) { return i.code == code; });
}

std::string ValidationReport::str() const {
  std::ostringstream os;
  for (const auto& i : issues) os << i.code << " at " << i.path << ": " << i.message << "\n";
  return os.str();
}

namespace {

struct Walker {
  const Tree& t;
  ValidationReport report;
  std::vector<int> visits;
  std::vector<std::vector<LabelId>> live_at;
  std::vector<NodeId> ancestors;
  // label -> required assignment inside a defer branch
  std::vector<std::pair<LabelId, Assignment>> defer_constraints;

  explicit Walker(const Tree& tree)
      : t(tree), visits(tree.nodes.size(), 0), live_at(tree.nodes.size()) {}

  void issue(std::string code, const std::string& path, std::string msg) {
    report.issues.push_back({std::move(code), path, std::move(msg)});
  }
  std::string name(LabelId l) const {
    return l >= 0 && l < static_cast<LabelId>(t.labels.size()) ? t.labels[l].name : "#" + std::to_string(l);
  }
  bool known(LabelId l) const { return l >= 0 && l < static_cast<LabelId>(t.labels.size()); }
  static bool contains(const std::vector<LabelId>& v, LabelId l) {
    return std::find(v.begin(), v.end(), l) != v.end();
  }

  bool enter(NodeId id, const std::string& path) {
    if (id == kNoNode) {
      issue("MISSING_CHILD", path, "edge has no target node");
      return false;
    }
    if (id < 0 || id >= static_cast<NodeId>(t.nodes.size())) {
      issue("DANGLING", path, "edge points to unknown node " + std::to_string(id));
      return false;
    }
    if (std::find(ancestors.begin(), ancestors.end(), id) != ancestors.end()) {
      issue("CYCLE", path, "node " + std::to_string(id) + " reached again through a tree edge");
      return false;
    }
    if (visits[id]++ > 0) {
      issue("CYCLE", path, "node " + std::to_string(id) + " has more than one parent");
      return false;
    }
    return true;
  }

  void check_assignments(const TreeNode& n, const std::vector<LabelId>& live, const std::string& path,
                         bool must_cover) {
    std::vector<LabelId> seen;
    for (auto [l, a] : n.assignments) {
      if (!known(l)) {
        issue("UNKNOWN_LABEL", path, "assignment to undeclared label " + name(l));
        continue;
      }
      if (!contains(live, l)) issue("LABEL_NOT_LIVE", path, "assignment to label " + name(l) + " which is not live");
      if (contains(seen, l)) issue("LEAF_INCOMPLETE", path, "label " + name(l) + " assigned twice");
      seen.push_back(l);
      for (auto [cl, ca] : defer_constraints)
        if (cl == l && ca != a)
          issue("DEFER_INCONSISTENT", path,
                "label " + name(l) + " must be '" + assignment_char(ca) + "' below its defer outcome");
    }
    if (must_cover)
      for (LabelId l : live)
        if (!contains(seen, l)) issue("LEAF_INCOMPLETE", path, "live label " + name(l) + " left unassigned");
  }

  void walk(NodeId id, std::vector<LabelId> live, const std::string& path) {
    if (!enter(id, path)) return;
    const TreeNode& n = t.nodes[id];
    ancestors.push_back(id);
    switch (n.kind) {
      case NodeKind::PoolTest: {
        for (LabelId l : n.introductions) {
          if (!known(l)) {
            issue("UNKNOWN_LABEL", path, "introduction of undeclared label " + name(l));
            continue;
          }
          if (contains(live, l)) {
            issue("DUPLICATE_INTRODUCTION", path, "label " + name(l) + " is already live");
            continue;
          }
          live.push_back(l);
        }
        live_at[id] = live;
        if (n.pool.empty()) issue("EMPTY_POOL", path, "pool test without members");
        std::vector<LabelId> seen;
        for (LabelId l : n.pool) {
          if (!known(l)) issue("UNKNOWN_LABEL", path, "pool member " + name(l) + " is undeclared");
          else if (!contains(live, l)) issue("LABEL_NOT_LIVE", path, "pool member " + name(l) + " is not live");
          else if (contains(seen, l)) issue("EMPTY_POOL", path, "pool member " + name(l) + " listed twice");
          seen.push_back(l);
        }
        walk(n.neg, live, path + "/-");
        walk(n.pos, live, path + "/+");
        break;
      }
      case NodeKind::Leaf:
        live_at[id] = live;
        check_assignments(n, live, path, true);
        break;
      case NodeKind::Defer: {
        live_at[id] = live;
        if (!known(n.deferred) || !contains(live, n.deferred)) {
          issue("LABEL_NOT_LIVE", path, "deferred label " + name(n.deferred) + " is not live");
        }
        if (n.solver.empty()) issue("DEFER_INCONSISTENT", path, "defer node names no solver");
        else if (n.solver != "best") {
          try {
            StrategyId sid = StrategyId::parse(n.solver);
            if (!sid.is_homogeneous()) issue("DEFER_INCONSISTENT", path, "solver " + n.solver + " is not homogeneous");
          } catch (const InvalidStrategy&) {
            issue("DEFER_INCONSISTENT", path, "unknown solver " + n.solver);
          }
        }
        defer_constraints.emplace_back(n.deferred, Assignment::Neg);
        walk(n.neg, live, path + "/-");
        defer_constraints.back().second = Assignment::Pos;
        walk(n.pos, live, path + "/+");
        defer_constraints.pop_back();
        break;
      }
      case NodeKind::Loop: {
        live_at[id] = live;
        check_assignments(n, live, path, false);
        std::vector<LabelId> rest;
        for (LabelId l : live) {
          bool settled = std::any_of(n.assignments.begin(), n.assignments.end(),
                                     [&](const auto& p) { return p.first == l; });
          if (!settled) rest.push_back(l);
        }
        const NodeId target = n.loop.target;
        bool target_ok = target >= 0 && target < static_cast<NodeId>(t.nodes.size()) &&
                         t.nodes[target].kind == NodeKind::PoolTest &&
                         std::find(ancestors.begin(), ancestors.end(), target) != ancestors.end();
        if (!target_ok) {
          issue("BAD_LOOP_TARGET", path, "loop target " + std::to_string(target) + " is not an ancestor test");
        } else {
          const TreeNode& tn = t.nodes[target];
          for (LabelId l : n.loop.redraw) {
            bool settled = std::any_of(n.assignments.begin(), n.assignments.end(),
                                       [&](const auto& p) { return p.first == l; });
            if (!known(l) || !settled || !contains(tn.introductions, l))
              issue("BAD_REDRAW", path, "redrawn label " + name(l) + " must be settled here and introduced at the target");
          }
          std::vector<LabelId> resumed = rest;
          for (LabelId l : n.loop.redraw) if (!contains(resumed, l)) resumed.push_back(l);
          std::vector<LabelId> expected = live_at[target];
          std::sort(resumed.begin(), resumed.end());
          std::sort(expected.begin(), expected.end());
          if (resumed != expected)
            issue("BAD_LOOP_TARGET", path, "labels live on re-entry do not match those live at the target");
        }
        if (n.loop.cap < 0) issue("BAD_LOOP_TARGET", path, "negative loop cap");
        walk(n.loop.abort, rest, path + "/abort");
        break;
      }
    }
    ancestors.pop_back();
  }
};

}  // namespace

ValidationReport validate(const Tree& tree) {
  Walker w(tree);
  if (tree.nodes.empty()) {
    w.issue("MISSING_CHILD", "root", "tree has no nodes");
    return w.report;
  }
  w.walk(tree.root, {}, "root");
  for (std::size_t i = 0; i < tree.nodes.size(); ++i)
    if (w.visits[i] == 0) w.issue("DANGLING", "node " + std::to_string(i), "node unreachable from the root");
  for (std::size_t i = 0; i < tree.labels.size(); ++i) {
    const Label& l = tree.labels[i];
    if (l.depth < 0 || l.depth > 20) w.issue("UNKNOWN_LABEL", "labels", "label " + l.name + " has bad depth");
    if (tree.mixed && l.stratum == Stratum::Default)
      w.issue("UNKNOWN_LABEL", "labels", "label " + l.name + " has no stratum in a mixed tree");
    if (!tree.mixed && l.stratum != Stratum::Default)
      w.issue("UNKNOWN_LABEL", "labels", "label " + l.name + " has a stratum in a homogeneous tree");
    for (std::size_t j = 0; j < i; ++j)
      if (tree.labels[j].name == l.name) w.issue("UNKNOWN_LABEL", "labels", "label " + l.name + " declared twice");
  }
  return w.report;
}

ValidationReport validate(const Strategy& strategy) {
  if (const Tree* t = std::get_if<Tree>(&strategy.body)) return validate(*t);
  const auto& p = std::get<Paired>(strategy.body);
  if (!p.inner) return {{{"MISSING_CHILD", "paired", "pair wrapper without inner strategy"}}};
  ValidationReport r = validate(*p.inner);
  for (auto& i : r.issues) i.path = "paired/" + i.path;
  if (std::holds_alternative<Tree>(p.inner->body) && std::get<Tree>(p.inner->body).mixed)
    r.issues.push_back({"MIXED_INNER", "paired", "pair wrapper around a mixed-population strategy"});
  return r;
}

void require_valid(const Strategy& strategy) {
  ValidationReport r = validate(strategy);
  if (!r.ok()) throw InvalidStrategy(strategy.id.str() + " fails validation:\n" + r.str());
}

std::vector<std::vector<LabelId>> live_labels(const Tree& tree) {
  Walker w(tree);
  if (!tree.nodes.empty()) w.walk(tree.root, {}, "root");
  return std::move(w.live_at);
}

std::vector<bool> guaranteed_labels(const Tree& tree) {
  std::vector<bool> g(tree.labels.size(), true);
  auto clear = [&](LabelId l) {
    if (l >= 0 && l < static_cast<LabelId>(g.size())) g[l] = false;
  };
  for (const TreeNode& n : tree.nodes) {
    for (auto [l, a] : n.assignments)
      if (a == Assignment::Repool) clear(l);
    // a deferred occupant is settled by a helper run, which may re-pool it
    if (n.kind == NodeKind::Defer) clear(n.deferred);
  }
  return g;
}

std::set<std::string> guaranteed_positions(const Strategy& strategy) {
  auto [tree, depth] = strategy.core();
  std::vector<bool> g = guaranteed_labels(*tree);
  std::set<std::string> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g[i]) continue;
    int d = tree->labels[i].depth + depth;
    out.insert(d == 0 ? tree->labels[i].name : tree->labels[i].name + "[" + std::to_string(1 << d) + "]");
  }
  return out;
}

}  // namespace poolgt
