#include "xview/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace xview {

using nlohmann::json;

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Object: return "object";
    case NodeKind::Part: return "part";
    case NodeKind::Action: return "action";
    case NodeKind::Attribute: return "attribute";
  }
  return "object";
}

std::string to_string(Relation relation) {
  switch (relation) {
    case Relation::PartOf: return "part_of";
    case Relation::CanPerform: return "can_perform";
    case Relation::CanHave: return "can_have";
    case Relation::Incompatible: return "incompatible";
  }
  return "part_of";
}

NodeKind node_kind_from_string(const std::string& s) {
  if (s == "object") return NodeKind::Object;
  if (s == "part") return NodeKind::Part;
  if (s == "action") return NodeKind::Action;
  if (s == "attribute") return NodeKind::Attribute;
  throw SchemaViolation("unknown node kind '" + s + "'");
}

Relation relation_from_string(const std::string& s) {
  if (s == "part_of") return Relation::PartOf;
  if (s == "can_perform") return Relation::CanPerform;
  if (s == "can_have") return Relation::CanHave;
  if (s == "incompatible") return Relation::Incompatible;
  throw SchemaViolation("unknown edge relation '" + s + "'");
}

namespace {

bool is_groundable(NodeKind kind) {
  return kind == NodeKind::Object || kind == NodeKind::Part;
}

void check_edge_kinds(const OntologyNode& src, const OntologyNode& dst,
                      Relation relation) {
  const std::string where = "edge " + src.id + " -> " + dst.id;
  switch (relation) {
    case Relation::PartOf:
      if (src.kind != NodeKind::Part || !is_groundable(dst.kind))
        throw SchemaViolation(where + ": part_of must connect a part to an object or part");
      break;
    case Relation::CanPerform:
      if (src.kind != NodeKind::Action || !is_groundable(dst.kind))
        throw SchemaViolation(where + ": can_perform must connect an action to an object or part");
      break;
    case Relation::CanHave:
      if (src.kind != NodeKind::Attribute || !is_groundable(dst.kind))
        throw SchemaViolation(where + ": can_have must connect an attribute to an object or part");
      break;
    case Relation::Incompatible:
      if (src.kind != NodeKind::Action || dst.kind != NodeKind::Action)
        throw SchemaViolation(where + ": incompatible must connect two actions");
      break;
  }
}

}  // namespace

OntologyGraph OntologyGraph::build(std::vector<OntologyNode> nodes,
                                   std::vector<OntologyEdge> edges) {
  OntologyGraph g;
  for (const auto& n : nodes) {
    if (g.index_.count(n.id))
      throw SchemaViolation("duplicate node id '" + n.id + "'");
    g.index_[n.id] = static_cast<int>(g.nodes_.size());
    g.nodes_.push_back(n);
  }

  std::map<std::string, std::string> part_parent;
  std::set<std::tuple<std::string, std::string, Relation>> seen;
  for (auto e : edges) {
    const OntologyNode* src = g.find(e.src);
    const OntologyNode* dst = g.find(e.dst);
    if (!src)
      throw SchemaViolation("edge references unknown node id '" + e.src + "'");
    if (!dst)
      throw SchemaViolation("edge references unknown node id '" + e.dst + "'");
    check_edge_kinds(*src, *dst, e.relation);

    if (e.relation == Relation::Incompatible && e.dst < e.src)
      std::swap(e.src, e.dst);  // stored symmetrically, normalized order
    if (!seen.insert({e.src, e.dst, e.relation}).second) continue;

    switch (e.relation) {
      case Relation::PartOf: {
        auto [it, inserted] = part_parent.emplace(e.src, e.dst);
        if (!inserted)
          throw SchemaViolation("part '" + e.src + "' has more than one part_of parent");
        break;
      }
      case Relation::CanPerform:
        g.actions_of_[e.dst].push_back(e.src);
        break;
      case Relation::CanHave:
        g.attrs_of_[e.dst].push_back(e.src);
        break;
      case Relation::Incompatible:
        g.incompatible_.insert({e.src, e.dst});
        break;
    }
    g.edges_.push_back(e);
  }

  // part_of edges must form a forest
  for (const auto& [start, _] : part_parent) {
    std::set<std::string> path{start};
    std::string cur = start;
    while (true) {
      auto it = part_parent.find(cur);
      if (it == part_parent.end()) break;
      cur = it->second;
      if (!path.insert(cur).second)
        throw SchemaViolation("part_of cycle through '" + cur + "'");
    }
  }

  for (auto& [_, v] : g.actions_of_) std::sort(v.begin(), v.end());
  for (auto& [_, v] : g.attrs_of_) std::sort(v.begin(), v.end());
  return g;
}

bool OntologyGraph::has_node(const std::string& id) const {
  return index_.count(id) != 0;
}

const OntologyNode* OntologyGraph::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const OntologyNode& OntologyGraph::node(const std::string& id) const {
  const OntologyNode* n = find(id);
  if (!n) throw UnknownNodeId("unknown ontology node id '" + id + "'");
  return *n;
}

const std::vector<std::string>& OntologyGraph::actions_of(const std::string& id) const {
  node(id);
  static const std::vector<std::string> kEmpty;
  auto it = actions_of_.find(id);
  return it == actions_of_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& OntologyGraph::attributes_of(const std::string& id) const {
  node(id);
  static const std::vector<std::string> kEmpty;
  auto it = attrs_of_.find(id);
  return it == attrs_of_.end() ? kEmpty : it->second;
}

bool OntologyGraph::incompatible(const std::string& a, const std::string& b) const {
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  return incompatible_.count(key) != 0;
}

std::vector<std::string> OntologyGraph::object_type_ids() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_)
    if (n.kind == NodeKind::Object) out.push_back(n.id);
  std::sort(out.begin(), out.end());
  return out;
}

bool OntologyGraph::operator==(const OntologyGraph& other) const {
  auto key = [](const OntologyGraph& g) {
    std::set<std::tuple<std::string, std::string, std::string>> ns;
    std::set<std::tuple<std::string, std::string, Relation>> es;
    for (const auto& n : g.nodes_) ns.insert({n.id, to_string(n.kind), n.label});
    for (const auto& e : g.edges_) es.insert({e.src, e.dst, e.relation});
    return std::make_pair(ns, es);
  };
  return key(*this) == key(other);
}

namespace {

void require_keys(const json& j, std::initializer_list<const char*> keys,
                  const std::string& context) {
  for (const char* k : keys)
    if (!j.contains(k))
      throw SchemaViolation(context + ": missing field '" + k + "'");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known |= (it.key() == k);
    if (!known)
      throw SchemaViolation(context + ": unknown field '" + it.key() + "'");
  }
}

std::string checked_string(const json& j, const char* key, const std::string& context) {
  if (!j.at(key).is_string())
    throw SchemaViolation(context + ": field '" + std::string(key) + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace

OntologyGraph parse_ontology(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedDocument(std::string("ontology document: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaViolation("ontology document must be an object");
  require_keys(doc, {"nodes", "edges"}, "ontology document");
  if (!doc["nodes"].is_array() || !doc["edges"].is_array())
    throw SchemaViolation("ontology 'nodes' and 'edges' must be arrays");

  std::vector<OntologyNode> nodes;
  for (const auto& jn : doc["nodes"]) {
    if (!jn.is_object()) throw SchemaViolation("node record must be an object");
    require_keys(jn, {"id", "kind", "label"}, "node record");
    OntologyNode n;
    n.id = checked_string(jn, "id", "node record");
    n.kind = node_kind_from_string(checked_string(jn, "kind", "node '" + n.id + "'"));
    n.label = checked_string(jn, "label", "node '" + n.id + "'");
    nodes.push_back(std::move(n));
  }
  std::vector<OntologyEdge> edges;
  for (const auto& je : doc["edges"]) {
    if (!je.is_object()) throw SchemaViolation("edge record must be an object");
    require_keys(je, {"src", "dst", "relation"}, "edge record");
    OntologyEdge e;
    e.src = checked_string(je, "src", "edge record");
    e.dst = checked_string(je, "dst", "edge record");
    e.relation = relation_from_string(checked_string(je, "relation", "edge record"));
    edges.push_back(std::move(e));
  }
  return OntologyGraph::build(std::move(nodes), std::move(edges));
}

OntologyGraph load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedDocument("cannot open ontology file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_ontology(buf.str());
}

std::string serialize_ontology(const OntologyGraph& ontology) {
  json doc;
  doc["nodes"] = json::array();
  doc["edges"] = json::array();
  for (const auto& n : ontology.nodes())
    doc["nodes"].push_back({{"id", n.id}, {"kind", to_string(n.kind)}, {"label", n.label}});
  for (const auto& e : ontology.edges())
    doc["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}});
  return doc.dump(2) + "\n";
}

void save_ontology(const OntologyGraph& ontology, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write ontology file '" + path.string() + "'");
  out << serialize_ontology(ontology);
}

ValidityReport is_valid_parse_graph(const OntologyGraph& ontology,
                                    const GroundedEntity& entity) {
  ValidityReport report;
  auto flag = [&report](std::string msg) {
    report.valid = false;
    report.violations.push_back(std::move(msg));
  };

  if (entity.object_type.empty() && entity.actions.empty() && entity.attributes.empty())
    return report;  // empty parse graph is vacuously valid

  const OntologyNode& type = ontology.node(entity.object_type);
  if (!is_groundable(type.kind))
    flag("'" + type.id + "' is not an object or part node");

  const auto& legal_actions = ontology.actions_of(entity.object_type);
  for (const auto& a : entity.actions) {
    const OntologyNode& n = ontology.node(a);
    if (n.kind != NodeKind::Action) {
      flag("'" + a + "' is not an action node");
      continue;
    }
    if (!std::binary_search(legal_actions.begin(), legal_actions.end(), a))
      flag("action '" + a + "' is not can_perform-legal for '" + entity.object_type + "'");
  }
  for (size_t i = 0; i < entity.actions.size(); ++i)
    for (size_t j = i + 1; j < entity.actions.size(); ++j)
      if (ontology.incompatible(entity.actions[i], entity.actions[j]))
        flag("actions '" + entity.actions[i] + "' and '" + entity.actions[j] +
             "' are incompatible");

  const auto& legal_attrs = ontology.attributes_of(entity.object_type);
  for (const auto& a : entity.attributes) {
    const OntologyNode& n = ontology.node(a);
    if (n.kind != NodeKind::Attribute) {
      flag("'" + a + "' is not an attribute node");
      continue;
    }
    if (!std::binary_search(legal_attrs.begin(), legal_attrs.end(), a))
      flag("attribute '" + a + "' is not can_have-legal for '" + entity.object_type + "'");
  }
  return report;
}

}  // namespace xview
