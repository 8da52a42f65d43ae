#include <mutex>

#include "poolgt/errors.hpp"
#include "poolgt/strategy.hpp"

namespace poolgt {

namespace {

using Assign = std::vector<std::pair<LabelId, Assignment>>;
constexpr Assignment P = Assignment::Pos;
constexpr Assignment N = Assignment::Neg;
constexpr Assignment R = Assignment::Repool;

Assign zip(const std::vector<LabelId>& ls, std::initializer_list<Assignment> as) {
  Assign out;
  auto it = as.begin();
  for (LabelId l : ls) out.emplace_back(l, *it++);
  return out;
}

Assign with(Assign ctx, const std::vector<LabelId>& ls, Assignment a) {
  for (LabelId l : ls) ctx.emplace_back(l, a);
  return ctx;
}

std::vector<LabelId> slice(const std::vector<LabelId>& v, std::size_t from, std::size_t to) {
  return {v.begin() + from, v.begin() + to};
}

StrategyPtr wrap(StrategyId id, Tree t) {
  auto s = std::make_shared<Strategy>();
  s->id = id;
  s->body = std::move(t);
  require_valid(*s);
  return s;
}

// Binary search inside a group known to hold a positive: test the second half;
// positive re-pools the first half, negative clears the second half.
NodeId halve(TreeBuilder& b, const std::vector<LabelId>& g, const Assign& ctx) {
  if (g.size() == 1) return b.leaf(with(ctx, g, P));
  const std::size_t h = g.size() / 2;
  auto first = slice(g, 0, h), second = slice(g, h, g.size());
  NodeId neg = halve(b, first, with(ctx, second, N));
  NodeId pos = halve(b, second, with(ctx, first, R));
  return b.test({}, second, neg, pos);
}

// Peel members off the front of a known-positive group through the helper;
// once `keep` members remain, finish by halving.
NodeId peel(TreeBuilder& b, const std::vector<LabelId>& g, std::size_t keep, const Assign& ctx,
            const std::string& solver) {
  if (g.size() <= keep) return halve(b, g, ctx);
  auto rest = slice(g, 1, g.size());
  NodeId pos = b.leaf(with(with(ctx, {g[0]}, P), rest, R));
  NodeId neg = peel(b, rest, keep, with(ctx, {g[0]}, N), solver);
  return b.defer(g[0], solver, neg, pos);
}

Tree tree_a1() {
  TreeBuilder b;
  auto L = b.labels({"A"});
  return b.finish(b.test(L, L, b.leaf(zip(L, {N})), b.leaf(zip(L, {P}))));
}

Tree tree_a2() {
  TreeBuilder b;
  auto L = b.labels({"A", "B"});
  NodeId a = b.test({}, {L[0]}, b.leaf(zip(L, {N, P})), b.leaf(zip(L, {P, R})));
  return b.finish(b.test(L, L, b.leaf(zip(L, {N, N})), a));
}

Tree tree_a3() {
  TreeBuilder b;
  auto L = b.labels({"A", "B", "C", "D", "E"});
  const LabelId B = L[1], C = L[2], D = L[3], E = L[4];
  auto abcd = slice(L, 0, 4);
  NodeId b1 = b.test({}, {B}, b.leaf(zip(abcd, {P, N, N, N})), b.leaf(zip(abcd, {R, P, N, N})));
  NodeId b2 = b.test({}, {B}, b.leaf(zip(L, {P, N, N, P, R})), b.leaf(zip(L, {R, P, N, P, R})));
  NodeId d = b.test({}, {D}, b.leaf(zip(L, {R, R, P, N, P})), b.leaf(zip(L, {R, R, P, P, R})));
  NodeId c = b.test({}, {C}, b2, d);
  NodeId de = b.test({E}, {D, E}, b.leaf(zip(L, {R, R, P, N, N})), c);
  NodeId cd = b.test({D}, {C, D}, b1, de);
  auto abc = slice(L, 0, 3);
  return b.finish(b.test(abc, abc, b.leaf(zip(abc, {N, N, N})), cd));
}

Tree tree_a4() {
  TreeBuilder b;
  auto L = b.labels({"A", "B", "C", "D"});
  NodeId pos = halve(b, L, {});
  return b.finish(b.test(L, L, b.leaf(zip(L, {N, N, N, N})), pos));
}

Tree tree_a5() {
  TreeBuilder b;
  auto L = b.labels({"A", "B", "C", "D", "E", "F", "G"});
  const LabelId A = L[0], B = L[1], C = L[2], D = L[3], E = L[4], F = L[5], G = L[6];
  auto five = slice(L, 0, 5);
  auto six = slice(L, 0, 6);

  NodeId efg = b.reserve();

  // Loop abort: C alone, then D alone; E is positive if both clear.
  NodeId abort_d = b.test({}, {D}, b.leaf(zip(six, {N, N, N, N, P, R})), b.leaf(zip(six, {N, N, N, P, R, R})));
  NodeId abort = b.test({}, {C}, abort_d, b.leaf(zip(six, {N, N, P, R, R, R})));
  NodeId loop = b.loop({{G, P}}, efg, {G}, abort);

  NodeId f1 = b.test({}, {F}, b.leaf(zip(L, {N, N, P, N, P, N, N})), b.leaf(zip(L, {N, N, P, N, R, P, N})));
  NodeId f2 = b.test({}, {F}, b.leaf(zip(L, {N, N, R, P, P, N, N})), b.leaf(zip(L, {N, N, R, P, R, P, N})));
  NodeId d = b.test({}, {D}, f1, f2);
  NodeId g = b.test({}, {G}, d, loop);
  NodeId cdg = b.test({}, {C, D, G}, b.leaf(zip(L, {N, N, N, N, P, R, N})), g);
  NodeId c = b.test({}, {C}, b.leaf(zip(L, {N, N, N, P, N, N, N})), b.leaf(zip(L, {N, N, P, R, N, N, N})));
  b.test({F, G}, {E, F, G}, c, cdg, efg);

  NodeId bb = b.test({}, {B}, b.leaf(zip(five, {P, N, R, R, R})), b.leaf(zip(five, {R, P, R, R, R})));
  NodeId ab = b.test({}, {A, B}, efg, bb);
  return b.finish(b.test(five, five, b.leaf(zip(five, {N, N, N, N, N})), ab));
}

std::vector<LabelId> letters(TreeBuilder& b, int n, char first = 'A') {
  std::vector<LabelId> out;
  for (int i = 0; i < n; ++i) out.push_back(b.label(std::string(1, static_cast<char>(first + i))));
  return out;
}

}  // namespace

StrategyPtr build_basic(int n) {
  if (n < 1 || n > 5) throw InvalidStrategy("basic strategies are A1..A5, got " + std::to_string(n));
  static Tree (*const makers[])() = {tree_a1, tree_a2, tree_a3, tree_a4, tree_a5};
  return wrap(StrategyId::homogeneous(n), makers[n - 1]());
}

StrategyPtr build_compound(StrategyPtr inner) {
  if (!inner) throw InvalidStrategy("compounding needs an inner strategy");
  if (!inner->id.is_homogeneous() || inner->core().first->mixed)
    throw InvalidStrategy("compounding is defined for homogeneous strategies, got " + inner->id.str());
  StrategyId id = inner->id;
  if (id.family == Family::Alternative && id.alt != AltKind::A15) {
    id.size *= 2;
  } else {
    id = StrategyId::homogeneous(inner->id.size * 2);
  }
  auto s = std::make_shared<Strategy>();
  s->id = id;
  s->body = Paired{std::move(inner)};
  require_valid(*s);
  return s;
}

std::vector<StrategyId> enumerate_family(int max_pool_size, bool improved) {
  std::vector<int> sizes;
  for (int k : {1, 3, 5})
    for (long long s = k; s <= max_pool_size; s *= 2) sizes.push_back(static_cast<int>(s));
  if (improved) {
    for (int& s : sizes) {
      int m = s;
      while (m % 2 == 0 && m > 16) m /= 2;
      if (m == 16) s = s / 16 * 15;
    }
  }
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  std::vector<StrategyId> out;
  for (int s : sizes) out.push_back(StrategyId::homogeneous(s));
  return out;
}

StrategyPtr build_mixed(StrategyId id, const std::string& solver) {
  if (id.family != Family::Mixed) throw InvalidStrategy(id.str() + " is not a mixed strategy");
  if (solver.empty()) throw InvalidStrategy("mixed strategies need a homogeneous sub-solver");
  if (solver != "best") {
    StrategyId sid = StrategyId::parse(solver);
    if (!sid.is_homogeneous()) throw InvalidStrategy("sub-solver " + solver + " is not homogeneous");
  }
  TreeBuilder b(true);
  NodeId root = kNoNode;
  switch (id.mixed) {
    case MixedKind::M1:
    case MixedKind::M1Pairs: {
      LabelId A = b.label("A");
      LabelId lb = b.label("b", id.mixed == MixedKind::M1Pairs ? id.arity : 0);
      std::vector<LabelId> L{A, lb};
      NodeId d = b.defer(lb, solver, b.leaf(zip(L, {P, N})), b.leaf(zip(L, {R, P})));
      root = b.test(L, L, b.leaf(zip(L, {N, N})), d);
      break;
    }
    case MixedKind::M2: {
      auto L = b.labels({"A", "b", "c"});
      const LabelId A = L[0], lb = L[1], c = L[2];
      NodeId bt = b.test({}, {lb}, b.leaf(zip(L, {P, N, P})), b.leaf(zip(L, {P, P, R})));
      NodeId at = b.test({}, {A}, b.leaf(zip(L, {N, P, R})), bt);
      NodeId bc = b.test({c}, {lb, c}, b.leaf(zip(L, {P, N, N})), at);
      root = b.test({A, lb}, {A, lb}, b.leaf(zip({A, lb}, {N, N})), bc);
      break;
    }
    case MixedKind::M3: {
      auto L = b.labels({"A", "b", "c"});
      const LabelId A = L[0], lb = L[1], c = L[2];
      std::vector<LabelId> ab{A, lb};
      NodeId bc = b.reserve();
      NodeId abort = b.test({}, {lb}, b.leaf(zip(ab, {P, N})), b.leaf(zip(ab, {R, P})));
      NodeId loop = b.loop({{c, P}}, bc, {c}, abort);
      NodeId ct = b.test({}, {c}, b.leaf(zip(L, {R, P, N})), loop);
      b.test({c}, {lb, c}, b.leaf(zip(L, {P, N, N})), ct, bc);
      root = b.test(ab, ab, b.leaf(zip(ab, {N, N})), bc);
      break;
    }
    case MixedKind::M4: {
      LabelId A = b.label("A");
      std::vector<LabelId> bs;
      for (int i = 1; i <= id.arity; ++i) bs.push_back(b.label("b" + std::to_string(i)));
      std::vector<LabelId> all{A};
      all.insert(all.end(), bs.begin(), bs.end());
      // Walk b_n down to b_1; every helper outcome settles the remaining members.
      NodeId next = b.leaf(with(with({}, {A}, P), bs, N));
      for (int i = 0; i < id.arity; ++i) {
        Assign pos_ctx = with({}, {A}, R);
        pos_ctx = with(pos_ctx, slice(bs, 0, i), R);
        pos_ctx = with(pos_ctx, {bs[i]}, P);
        pos_ctx = with(pos_ctx, slice(bs, i + 1, bs.size()), N);
        next = b.defer(bs[i], solver, next, b.leaf(pos_ctx));
      }
      root = b.test(all, all, b.leaf(with({}, all, N)), next);
      break;
    }
  }
  StrategyId sid = id;
  return wrap(sid, b.finish(root));
}

SolverTable default_solver_table(AltKind kind) {
  if (kind == AltKind::A15) return {{"subgroup", "A3"}};
  return {{"first", "best"}};
}

StrategyPtr build_alternative(AltKind kind, const SolverTable& table) {
  const char* role = kind == AltKind::A15 ? "subgroup" : "first";
  auto it = table.find(role);
  if (it == table.end() || it->second.empty())
    throw InvalidStrategy(std::string("alternative strategy needs a '") + role + "' sub-strategy");
  const std::string& solver = it->second;
  if (solver != "best") {
    StrategyId sid = StrategyId::parse(solver);
    if (!sid.is_homogeneous()) throw InvalidStrategy("sub-strategy " + solver + " is not homogeneous");
  }
  TreeBuilder b;
  NodeId root = kNoNode;
  if (kind == AltKind::A15) {
    auto L = letters(b, 15);
    auto six = slice(L, 0, 6), nine = slice(L, 6, 15);
    NodeId six_pos = peel(b, six, 4, with({}, nine, R), solver);
    auto four = slice(nine, 0, 4), five = slice(nine, 4, 9);
    Assign ctx = with({}, six, N);
    NodeId four_pos = halve(b, four, with(ctx, five, R));
    NodeId five_pos = peel(b, five, 4, with(ctx, four, N), solver);
    NodeId split9 = b.test({}, four, five_pos, four_pos);
    NodeId split = b.test({}, six, split9, six_pos);
    root = b.test(L, L, b.leaf(with({}, L, N)), split);
  } else {
    const int n = kind == AltKind::Rec5 ? 5 : 9;
    auto L = letters(b, n);
    NodeId pos = peel(b, L, n - 1, {}, solver);
    root = b.test(L, L, b.leaf(with({}, L, N)), pos);
  }
  return wrap(StrategyId::of_alternative(kind), b.finish(root));
}

StrategyPtr make_strategy(const StrategyId& id) {
  static std::mutex mu;
  static std::map<std::string, StrategyPtr> cache;
  const std::string key = id.str();
  {
    std::lock_guard lk(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  StrategyPtr s;
  switch (id.family) {
    case Family::Basic: s = build_basic(id.size); break;
    case Family::Compound: s = build_compound(make_strategy(StrategyId::homogeneous(id.size / 2))); break;
    case Family::Mixed: s = build_mixed(id); break;
    case Family::Alternative: {
      const int base = id.alt == AltKind::A15 ? 15 : id.alt == AltKind::Rec5 ? 5 : 9;
      if (id.size == base) {
        s = build_alternative(id.alt, default_solver_table(id.alt));
      } else {
        StrategyId half = id;
        half.size /= 2;
        s = build_compound(make_strategy(half));
      }
      break;
    }
  }
  std::lock_guard lk(mu);
  return cache.emplace(key, s).first->second;
}

}  // namespace poolgt
