#include "doctest.h"
#include "poolgt/errors.hpp"
#include "poolgt/strategy.hpp"

using namespace poolgt;

namespace {

using Set = std::set<std::string>;

}  // namespace

TEST_CASE("strategy ids parse and print") {
  for (const char* name : {"A1", "A2", "A5", "A6", "A12", "A15", "A16", "A20", "A30", "A1024", "M1", "M2", "M3", "M4:3",
                           "M1P:2", "REC5", "REC9", "REC5x2", "REC9x4"}) {
    CAPTURE(name);
    CHECK(StrategyId::parse(name).str() == name);
  }
  CHECK(StrategyId::parse("A12").family == Family::Compound);
  CHECK(StrategyId::parse("A15").family == Family::Alternative);
  CHECK(StrategyId::parse("A4").family == Family::Basic);
  for (const char* bad : {"", "A", "A0", "A7", "A9", "A11", "B3", "M5", "M4:x", "REC5x3", "REC7", "a3"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(StrategyId::parse(bad), InvalidStrategy);
  }
}

TEST_CASE("every constructed strategy validates") {
  for (const StrategyId& id : enumerate_family(256, false)) {
    CAPTURE(id.str());
    CHECK(validate(*make_strategy(id)).ok());
  }
  for (const StrategyId& id : enumerate_family(256, true)) CHECK(validate(*make_strategy(id)).ok());
  for (const char* name : {"M1", "M2", "M3", "M4:2", "M4:5", "M1P:1", "M1P:6", "REC5", "REC9", "REC5x2"}) {
    CAPTURE(name);
    CHECK(validate(*make_strategy(name)).ok());
  }
}

TEST_CASE("family enumeration") {
  const auto fam = enumerate_family(24, false);
  std::vector<std::string> names;
  for (const auto& id : fam) names.push_back(id.str());
  CHECK(names == std::vector<std::string>{"A1", "A2", "A3", "A4", "A5", "A6", "A8", "A10", "A12", "A16", "A20", "A24"});
  const auto imp = enumerate_family(32, true);
  names.clear();
  for (const auto& id : imp) names.push_back(id.str());
  CHECK(std::find(names.begin(), names.end(), "A15") != names.end());
  CHECK(std::find(names.begin(), names.end(), "A16") == names.end());
  CHECK(std::find(names.begin(), names.end(), "A30") != names.end());
}

TEST_CASE("compound strategies wrap their inner strategy") {
  auto a6 = make_strategy("A6");
  auto [tree, depth] = a6->core();
  CHECK(depth == 1);
  CHECK(tree->labels.size() == 5);
  CHECK(make_strategy("A12")->core().second == 2);
  CHECK(structurally_equal(*make_strategy("A6"), *build_compound(build_basic(3))));
  CHECK_FALSE(structurally_equal(*make_strategy("A6"), *make_strategy("A8")));
}

TEST_CASE("guaranteed positions") {
  CHECK(guaranteed_positions(*make_strategy("A1")) == Set{"A"});
  CHECK(guaranteed_positions(*make_strategy("A2")) == Set{"A"});
  CHECK(guaranteed_positions(*make_strategy("A3")) == Set{"C", "D"});
  CHECK(guaranteed_positions(*make_strategy("A4")) == Set{"D"});
  CHECK(guaranteed_positions(*make_strategy("A8")) == Set{"D[2]"});
  CHECK(guaranteed_positions(*make_strategy("A16")) == Set{"D[4]"});
  CHECK(guaranteed_positions(*make_strategy("M3")) == Set{"b", "c"});
  // Deferred labels are settled by a helper run.
  CHECK(guaranteed_positions(*make_strategy("M1")).empty());
  CHECK(guaranteed_positions(*make_strategy("A15")).empty());
}

TEST_CASE("A4 tree shape") {
  const Tree& t = *make_strategy("A4")->core().first;
  const TreeNode& root = t.nodes[t.root];
  CHECK(root.kind == NodeKind::PoolTest);
  CHECK(root.introductions.size() == 4);
  CHECK(root.pool.size() == 4);
  const TreeNode& pos = t.nodes[root.pos];
  REQUIRE(pos.kind == NodeKind::PoolTest);
  std::vector<std::string> pool;
  for (LabelId l : pos.pool) pool.push_back(t.labels[l].name);
  CHECK(pool == std::vector<std::string>{"C", "D"});
  const TreeNode& neg = t.nodes[root.neg];
  REQUIRE(neg.kind == NodeKind::Leaf);
  for (const auto& [l, a] : neg.assignments) CHECK(a == Assignment::Neg);
}

TEST_CASE("A5 carries a loop back to an ancestor") {
  const Tree& t = *make_strategy("A5")->core().first;
  int loops = 0;
  for (const TreeNode& n : t.nodes) {
    if (n.kind != NodeKind::Loop) continue;
    ++loops;
    CHECK(n.loop.cap == kDefaultLoopCap);
    CHECK(n.loop.redraw.size() == 1);
    CHECK(t.nodes[n.loop.target].kind == NodeKind::PoolTest);
    CHECK(n.loop.abort != kNoNode);
  }
  CHECK(loops == 1);
}

TEST_CASE("validation reports precise codes and paths") {
  SUBCASE("leaf leaves a live label unassigned") {
    TreeBuilder b;
    LabelId A = b.label("A"), B = b.label("B");
    NodeId l = b.leaf({{A, Assignment::Neg}});
    NodeId r = b.leaf({{A, Assignment::Pos}, {B, Assignment::Repool}});
    ValidationReport rep = validate(b.finish(b.test({A, B}, {A, B}, l, r)));
    CHECK(rep.has("LEAF_INCOMPLETE"));
    REQUIRE(rep.issues.size() == 1);
    CHECK(rep.issues[0].path == "root/-");
  }
  SUBCASE("pool member not yet introduced") {
    TreeBuilder b;
    LabelId A = b.label("A"), B = b.label("B");
    NodeId l = b.leaf({{A, Assignment::Neg}});
    NodeId r = b.leaf({{A, Assignment::Pos}});
    CHECK(validate(b.finish(b.test({A}, {A, B}, l, r))).has("LABEL_NOT_LIVE"));
  }
  SUBCASE("label introduced twice") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l1 = b.leaf({{A, Assignment::Neg}});
    NodeId l2 = b.leaf({{A, Assignment::Neg}});
    NodeId l3 = b.leaf({{A, Assignment::Pos}});
    NodeId inner = b.test({A}, {A}, l2, l3);
    CHECK(validate(b.finish(b.test({A}, {A}, l1, inner))).has("DUPLICATE_INTRODUCTION"));
  }
  SUBCASE("empty pool") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l1 = b.leaf({{A, Assignment::Neg}});
    NodeId l2 = b.leaf({{A, Assignment::Pos}});
    CHECK(validate(b.finish(b.test({A}, {}, l1, l2))).has("EMPTY_POOL"));
  }
  SUBCASE("missing and dangling children") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l = b.leaf({{A, Assignment::Neg}});
    CHECK(validate(b.finish(b.test({A}, {A}, l, kNoNode))).has("MISSING_CHILD"));
    TreeBuilder c;
    LabelId C = c.label("A");
    NodeId lc = c.leaf({{C, Assignment::Neg}});
    CHECK(validate(c.finish(c.test({C}, {C}, lc, 42))).has("DANGLING"));
  }
  SUBCASE("tree edge back to an ancestor") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId root = b.reserve();
    NodeId l = b.leaf({{A, Assignment::Neg}});
    b.test({A}, {A}, l, root, root);
    CHECK(validate(b.finish(root)).has("CYCLE"));
  }
  SUBCASE("loop target is not an ancestor") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l = b.leaf({{A, Assignment::Neg}});
    NodeId abort = b.leaf({{A, Assignment::Pos}});
    NodeId lp = b.loop({{A, Assignment::Pos}}, 77, {}, abort);
    CHECK(validate(b.finish(b.test({A}, {A}, l, lp))).has("BAD_LOOP_TARGET"));
  }
  SUBCASE("assignment to an undeclared label") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l = b.leaf({{A, Assignment::Neg}, {7, Assignment::Pos}});
    NodeId r = b.leaf({{A, Assignment::Pos}});
    CHECK(validate(b.finish(b.test({A}, {A}, l, r))).has("UNKNOWN_LABEL"));
  }
  SUBCASE("require_valid throws InvalidStrategy") {
    TreeBuilder b;
    LabelId A = b.label("A");
    NodeId l = b.leaf({});
    NodeId r = b.leaf({{A, Assignment::Pos}});
    Strategy s{StrategyId::homogeneous(1), b.finish(b.test({A}, {A}, l, r))};
    CHECK_THROWS_AS(require_valid(s), InvalidStrategy);
  }
}
