#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xview/errors.hpp"

namespace xview {

enum class NodeKind { Object, Part, Action, Attribute };
enum class Relation { PartOf, CanPerform, CanHave, Incompatible };

std::string to_string(NodeKind kind);
std::string to_string(Relation relation);
NodeKind node_kind_from_string(const std::string& s);
Relation relation_from_string(const std::string& s);

struct OntologyNode {
  std::string id;
  NodeKind kind = NodeKind::Object;
  std::string label;

  bool operator==(const OntologyNode&) const = default;
};

struct OntologyEdge {
  std::string src;
  std::string dst;
  Relation relation = Relation::PartOf;

  bool operator==(const OntologyEdge&) const = default;
};

/// Grounded nodes of one entity, used for legality checks against the schema.
struct GroundedEntity {
  std::string object_type;
  std::vector<std::string> actions;
  std::vector<std::string> attributes;
};

struct ValidityReport {
  bool valid = true;
  std::vector<std::string> violations;
};

/// Domain schema: objects, parts, actions and attributes plus their
/// relations. Immutable once built; safe for concurrent reads.
class OntologyGraph {
 public:
  OntologyGraph() = default;

  /// Validates all schema invariants. Incompatible edges are normalized to
  /// (min,max) id order and deduplicated, exact duplicate edges dropped.
  static OntologyGraph build(std::vector<OntologyNode> nodes,
                             std::vector<OntologyEdge> edges);

  const std::vector<OntologyNode>& nodes() const { return nodes_; }
  const std::vector<OntologyEdge>& edges() const { return edges_; }

  bool has_node(const std::string& id) const;
  const OntologyNode* find(const std::string& id) const;
  const OntologyNode& node(const std::string& id) const;  // throws UnknownNodeId

  /// Legal actions / attributes of an object or part node, sorted by id.
  const std::vector<std::string>& actions_of(const std::string& id) const;
  const std::vector<std::string>& attributes_of(const std::string& id) const;
  bool incompatible(const std::string& action_a, const std::string& action_b) const;

  /// Ids of all Object-kind nodes, sorted.
  std::vector<std::string> object_type_ids() const;

  bool operator==(const OntologyGraph& other) const;

 private:
  std::vector<OntologyNode> nodes_;
  std::vector<OntologyEdge> edges_;
  std::map<std::string, int> index_;
  std::map<std::string, std::vector<std::string>> actions_of_;
  std::map<std::string, std::vector<std::string>> attrs_of_;
  std::set<std::pair<std::string, std::string>> incompatible_;
};

OntologyGraph parse_ontology(const std::string& text);
OntologyGraph load_ontology(const std::filesystem::path& path);
std::string serialize_ontology(const OntologyGraph& ontology);
void save_ontology(const OntologyGraph& ontology, const std::filesystem::path& path);

/// True iff every grounded node exists, every relation used is an ontology
/// edge, and no two grounded actions are mutually incompatible.
/// Throws UnknownNodeId for ids absent from the ontology.
ValidityReport is_valid_parse_graph(const OntologyGraph& ontology,
                                    const GroundedEntity& entity);

}  // namespace xview
