#pragma once

// Decision-tree model of adaptive pool-testing strategies.
//
// A tree is read from the root: a pool-test node introduces fresh
// individuals (bound to labels), tests the union of its pool labels, and
// branches on the outcome. Leaves settle every live label as positive,
// negative, or re-pooled. A loop node settles some labels, redraws others,
// and jumps back to an ancestor. A defer node hands one label's unit to a
// helper strategy running on the stream of such units and branches on the
// status it eventually returns.
//
// Labels stand for units of 2^depth lane items; depth > 0 is how a strategy
// is applied to pairs (or pairs of pairs) of individuals. Compounding wraps a
// strategy instead of expanding its tree.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace poolgt {

enum class Stratum : std::uint8_t { Default, Upper, Lower };
enum class Assignment : std::uint8_t { Pos, Neg, Repool };

char assignment_char(Assignment a);  // '+', '-', 'R'
std::string_view stratum_name(Stratum s);

using LabelId = int;
using NodeId = int;
inline constexpr NodeId kNoNode = -1;
inline constexpr int kDefaultLoopCap = 16;

struct Label {
  std::string name;
  Stratum stratum = Stratum::Default;
  int depth = 0;
  friend bool operator==(const Label&, const Label&) = default;
};

enum class NodeKind : std::uint8_t { PoolTest, Leaf, Loop, Defer };
std::string_view node_kind_name(NodeKind k);

struct LoopEdge {
  NodeId target = kNoNode;
  std::vector<LabelId> redraw;
  int cap = kDefaultLoopCap;
  NodeId abort = kNoNode;  // taken instead of the jump once the cap is reached
  friend bool operator==(const LoopEdge&, const LoopEdge&) = default;
};

struct TreeNode {
  NodeKind kind = NodeKind::Leaf;
  std::vector<LabelId> introductions;  // PoolTest
  std::vector<LabelId> pool;           // PoolTest
  NodeId neg = kNoNode;                // PoolTest, Defer
  NodeId pos = kNoNode;                // PoolTest, Defer
  std::vector<std::pair<LabelId, Assignment>> assignments;  // Leaf, Loop
  LoopEdge loop;                       // Loop
  LabelId deferred = -1;               // Defer
  std::string solver;                  // Defer: strategy name or "best"
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<Label> labels;
  std::vector<TreeNode> nodes;
  NodeId root = 0;
  bool mixed = false;  // label letter case selects the stratum

  LabelId find_label(std::string_view name) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

// ---------------------------------------------------------------------------
// Identifiers. Homogeneous members are named A<n>; n alone determines the
// construction (n <= 5 basic, 15 alternative, otherwise pair-compounded).

enum class Family : std::uint8_t { Basic, Compound, Mixed, Alternative };
enum class MixedKind : std::uint8_t { M1, M2, M3, M4, M1Pairs };
enum class AltKind : std::uint8_t { A15, Rec5, Rec9 };

struct StrategyId {
  Family family = Family::Basic;
  int size = 1;          // A-family pool size
  MixedKind mixed = MixedKind::M1;
  int arity = 1;         // M4:n arity, M1P:n group exponent
  AltKind alt = AltKind::A15;

  static StrategyId homogeneous(int size);  // throws InvalidStrategy for sizes outside the family
  static StrategyId of_mixed(MixedKind kind, int arity = 1);
  static StrategyId of_alternative(AltKind kind);
  // Accepts "A3", "A12", "A15", "M1", "M2", "M3", "M4:3", "M1P:2", "REC5", "REC9".
  static StrategyId parse(std::string_view name);

  bool is_homogeneous() const { return family != Family::Mixed; }
  bool in_a_family() const { return family == Family::Basic || family == Family::Compound ||
                                    (family == Family::Alternative && alt == AltKind::A15); }
  std::string str() const;
  friend bool operator==(const StrategyId&, const StrategyId&) = default;
};

struct Strategy;
using StrategyPtr = std::shared_ptr<const Strategy>;

struct Paired {
  StrategyPtr inner;
};

struct Strategy {
  StrategyId id;
  std::variant<Tree, Paired> body;

  // Innermost tree and how many pair wrappers surround it.
  std::pair<const Tree*, int> core() const;
};

// Structural equality (ids and bodies, recursively through wrappers).
bool structurally_equal(const Strategy& a, const Strategy& b);

// ---------------------------------------------------------------------------
// Constructions.

StrategyPtr build_basic(int n);
StrategyPtr build_compound(StrategyPtr inner);
std::vector<StrategyId> enumerate_family(int max_pool_size, bool improved);
// solver: helper used by defer nodes ("best" picks the cheapest family member at
// the posterior risk of the deferred unit).
StrategyPtr build_mixed(StrategyId id, const std::string& solver = "best");

// Roles: A15 needs "subgroup" (default A3); REC5/REC9 need "first".
using SolverTable = std::map<std::string, std::string>;
StrategyPtr build_alternative(AltKind kind, const SolverTable& table);
SolverTable default_solver_table(AltKind kind);

// Canonical construction for an id (cached; strategies are immutable).
StrategyPtr make_strategy(const StrategyId& id);
inline StrategyPtr make_strategy(std::string_view name) { return make_strategy(StrategyId::parse(name)); }

// ---------------------------------------------------------------------------
// Validation and structural queries.

struct ValidationIssue {
  std::string code;  // LEAF_INCOMPLETE, BAD_LOOP_TARGET, ...
  std::string path;  // e.g. "root/+/-"
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  bool has(std::string_view code) const;
  std::string str() const;
};

ValidationReport validate(const Tree& tree);
ValidationReport validate(const Strategy& strategy);
// Throws InvalidStrategy carrying the report text when validation fails.
void require_valid(const Strategy& strategy);

// Labels live (bound and unsettled) on arrival at each node, after that node's
// own introductions. Only meaningful for valid trees.
std::vector<std::vector<LabelId>> live_labels(const Tree& tree);

// Per-label flag: the label is never re-pooled on any leaf or loop node.
std::vector<bool> guaranteed_labels(const Tree& tree);
// Slots whose occupant always receives a result within the run. Tree labels
// are reported by name; inside pair wrappers the slot is the last member of a
// guaranteed unit, written "B[2]" (1-based member index).
std::set<std::string> guaranteed_positions(const Strategy& strategy);

// Small builder used by the constructions and tests.
class TreeBuilder {
 public:
  explicit TreeBuilder(bool mixed = false) { tree_.mixed = mixed; }

  LabelId label(const std::string& name, int depth = 0);
  std::vector<LabelId> labels(std::initializer_list<const char*> names);
  NodeId reserve();
  NodeId test(std::vector<LabelId> introductions, std::vector<LabelId> pool, NodeId neg, NodeId pos,
              NodeId at = kNoNode);
  NodeId leaf(std::vector<std::pair<LabelId, Assignment>> assignments);
  NodeId loop(std::vector<std::pair<LabelId, Assignment>> assignments, NodeId target,
              std::vector<LabelId> redraw, NodeId abort, int cap = kDefaultLoopCap);
  NodeId defer(LabelId label, std::string solver, NodeId neg, NodeId pos);
  Tree finish(NodeId root);

 private:
  Tree tree_;
};

}  // namespace poolgt
