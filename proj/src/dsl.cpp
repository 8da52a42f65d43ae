#include "poolgt/dsl.hpp"

#include <map>
#include <cctype>

#include "json.hpp"

#include "poolgt/errors.hpp"

namespace poolgt {

using Json = nlohmann::ordered_json;

namespace {

constexpr int kVersion = 1;

Json assignments_json(const Tree& t, const std::vector<std::pair<LabelId, Assignment>>& as) {
  Json out = Json::object();
  for (auto [l, a] : as) out[t.labels.at(l).name] = std::string(1, assignment_char(a));
  return out;
}

Json names(const Tree& t, const std::vector<LabelId>& ls) {
  Json out = Json::array();
  for (LabelId l : ls) out.push_back(t.labels.at(l).name);
  return out;
}

Json tree_json(const Tree& t) {
  Json labels = Json::array();
  for (const Label& l : t.labels) labels.push_back({{"name", l.name}, {"depth", l.depth}});
  Json nodes = Json::array();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const TreeNode& n = t.nodes[i];
    Json j = {{"id", i}, {"kind", node_kind_name(n.kind)}};
    switch (n.kind) {
      case NodeKind::PoolTest:
        j["introductions"] = names(t, n.introductions);
        j["pool"] = names(t, n.pool);
        j["neg"] = n.neg;
        j["pos"] = n.pos;
        break;
      case NodeKind::Leaf:
        j["assignments"] = assignments_json(t, n.assignments);
        break;
      case NodeKind::Loop:
        j["assignments"] = assignments_json(t, n.assignments);
        j["loop_target"] = {{"node", n.loop.target},
                            {"redraw", names(t, n.loop.redraw)},
                            {"cap", n.loop.cap},
                            {"abort", n.loop.abort}};
        break;
      case NodeKind::Defer:
        j["label"] = t.labels.at(n.deferred).name;
        j["solver"] = n.solver;
        j["neg"] = n.neg;
        j["pos"] = n.pos;
        break;
    }
    nodes.push_back(std::move(j));
  }
  return {{"mixed", t.mixed}, {"labels", std::move(labels)}, {"root", t.root}, {"nodes", std::move(nodes)}};
}

Json strategy_json(const Strategy& s) {
  Json j = {{"version", kVersion}, {"id", s.id.str()}};
  if (const Tree* t = std::get_if<Tree>(&s.body)) {
    j["kind"] = "tree";
    Json body = tree_json(*t);
    for (auto& [k, v] : body.items()) j[k] = v;
  } else {
    j["kind"] = "paired";
    j["inner"] = strategy_json(*std::get<Paired>(s.body).inner);
  }
  return j;
}

// --- parsing ---------------------------------------------------------------

struct Reader {
  [[noreturn]] static void fail(const std::string& where, const std::string& what) { throw ParseError(where, what); }

  static const Json& field(const Json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) fail(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
    return *it;
  }
  static std::string str(const Json& j, const std::string& where) {
    if (!j.is_string()) fail(where, "expected a string");
    return j.get<std::string>();
  }
  static long long integer(const Json& j, const std::string& where) {
    if (!j.is_number_integer()) fail(where, "expected an integer");
    return j.get<long long>();
  }
};

Assignment parse_assignment(const Json& j, const std::string& where) {
  std::string s = Reader::str(j, where);
  if (s == "+") return Assignment::Pos;
  if (s == "-") return Assignment::Neg;
  if (s == "R") return Assignment::Repool;
  Reader::fail(where, "status must be \"+\", \"-\" or \"R\", got \"" + s + "\"");
}

Tree parse_tree(const Json& doc, const std::string& at) {
  Tree t;
  const Json& mixed = Reader::field(doc, "mixed", at);
  if (!mixed.is_boolean()) Reader::fail(at + ".mixed", "expected a boolean");
  t.mixed = mixed.get<bool>();

  const Json& labels = Reader::field(doc, "labels", at);
  if (!labels.is_array()) Reader::fail(at + ".labels", "expected an array");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string where = at + ".labels[" + std::to_string(i) + "]";
    Label l;
    l.name = Reader::str(Reader::field(labels[i], "name", where), where + ".name");
    if (l.name.empty() || !std::isalpha(static_cast<unsigned char>(l.name[0])))
      Reader::fail(where + ".name", "label names start with a letter");
    if (t.find_label(l.name) >= 0) Reader::fail(where + ".name", "label '" + l.name + "' declared twice");
    if (labels[i].contains("depth")) {
      long long d = Reader::integer(labels[i]["depth"], where + ".depth");
      if (d < 0 || d > 20) Reader::fail(where + ".depth", "depth out of range");
      l.depth = static_cast<int>(d);
    }
    if (t.mixed)
      l.stratum = std::isupper(static_cast<unsigned char>(l.name[0])) ? Stratum::Upper : Stratum::Lower;
    t.labels.push_back(std::move(l));
  }

  auto label_ref = [&](const Json& j, const std::string& where) {
    std::string name = Reader::str(j, where);
    LabelId id = t.find_label(name);
    if (id < 0) Reader::fail(where, "label '" + name + "' is not declared");
    return id;
  };
  auto label_list = [&](const Json& j, const std::string& where) {
    if (!j.is_array()) Reader::fail(where, "expected an array of label names");
    std::vector<LabelId> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(label_ref(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
  };

  const Json& nodes = Reader::field(doc, "nodes", at);
  if (!nodes.is_array() || nodes.empty()) Reader::fail(at + ".nodes", "expected a nonempty array");
  std::map<long long, NodeId> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::string where = at + ".nodes[" + std::to_string(i) + "]";
    long long id = Reader::integer(Reader::field(nodes[i], "id", where), where + ".id");
    if (!index.emplace(id, static_cast<NodeId>(i)).second) Reader::fail(where + ".id", "duplicate node id");
  }
  auto node_ref = [&](const Json& j, const std::string& where) -> NodeId {
    if (j.is_null()) return kNoNode;
    long long id = Reader::integer(j, where);
    auto it = index.find(id);
    if (it == index.end()) Reader::fail(where, "reference to unknown node " + std::to_string(id));
    return it->second;
  };

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Json& nj = nodes[i];
    std::string where = at + ".nodes[" + std::to_string(i) + "]";
    std::string kind = Reader::str(Reader::field(nj, "kind", where), where + ".kind");
    TreeNode n;
    auto read_assignments = [&] {
      const Json& as = Reader::field(nj, "assignments", where);
      if (!as.is_object()) Reader::fail(where + ".assignments", "expected an object of label statuses");
      for (auto& [name, v] : as.items()) {
        std::string w = where + ".assignments." + name;
        n.assignments.emplace_back(label_ref(Json(name), w), parse_assignment(v, w));
      }
    };
    if (kind == "test") {
      n.kind = NodeKind::PoolTest;
      n.introductions = nj.contains("introductions") ? label_list(nj["introductions"], where + ".introductions")
                                                     : std::vector<LabelId>{};
      n.pool = label_list(Reader::field(nj, "pool", where), where + ".pool");
      n.neg = node_ref(Reader::field(nj, "neg", where), where + ".neg");
      n.pos = node_ref(Reader::field(nj, "pos", where), where + ".pos");
    } else if (kind == "leaf") {
      n.kind = NodeKind::Leaf;
      read_assignments();
    } else if (kind == "loop") {
      n.kind = NodeKind::Loop;
      read_assignments();
      const Json& lt = Reader::field(nj, "loop_target", where);
      std::string lw = where + ".loop_target";
      n.loop.target = node_ref(Reader::field(lt, "node", lw), lw + ".node");
      n.loop.redraw = lt.contains("redraw") ? label_list(lt["redraw"], lw + ".redraw") : std::vector<LabelId>{};
      if (lt.contains("cap")) n.loop.cap = static_cast<int>(Reader::integer(lt["cap"], lw + ".cap"));
      n.loop.abort = node_ref(Reader::field(lt, "abort", lw), lw + ".abort");
    } else if (kind == "defer") {
      n.kind = NodeKind::Defer;
      n.deferred = label_ref(Reader::field(nj, "label", where), where + ".label");
      n.solver = Reader::str(Reader::field(nj, "solver", where), where + ".solver");
      n.neg = node_ref(Reader::field(nj, "neg", where), where + ".neg");
      n.pos = node_ref(Reader::field(nj, "pos", where), where + ".pos");
    } else {
      Reader::fail(where + ".kind", "unknown node kind '" + kind + "'");
    }
    t.nodes.push_back(std::move(n));
  }
  t.root = node_ref(Reader::field(doc, "root", at), at + ".root");
  if (t.root == kNoNode) Reader::fail(at + ".root", "root must name a node");
  return t;
}

StrategyPtr parse_strategy(const Json& doc, const std::string& at) {
  if (!doc.is_object()) Reader::fail(at, "expected an object");
  long long version = Reader::integer(Reader::field(doc, "version", at), at + ".version");
  if (version != kVersion) Reader::fail(at + ".version", "unsupported version " + std::to_string(version));
  auto s = std::make_shared<Strategy>();
  std::string id = Reader::str(Reader::field(doc, "id", at), at + ".id");
  try {
    s->id = StrategyId::parse(id);
  } catch (const InvalidStrategy& e) {
    Reader::fail(at + ".id", e.what());
  }
  std::string kind = Reader::str(Reader::field(doc, "kind", at), at + ".kind");
  if (kind == "tree") {
    s->body = parse_tree(doc, at);
  } else if (kind == "paired") {
    s->body = Paired{parse_strategy(Reader::field(doc, "inner", at), at + ".inner")};
  } else {
    Reader::fail(at + ".kind", "kind must be \"tree\" or \"paired\"");
  }
  return s;
}

}  // namespace

std::string serialize(const Strategy& strategy, int indent) { return strategy_json(strategy).dump(indent); }

StrategyPtr deserialize(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  return parse_strategy(doc, "$");
}

}  // namespace poolgt
