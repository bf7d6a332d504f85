#pragma once

#include <compare>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace forge {

/// A class name as it appears in one source dataset.
struct DatasetClass {
  std::string dataset;
  std::string name;
  friend auto operator<=>(const DatasetClass&, const DatasetClass&) = default;
};

enum class NodeKind { Concept, Leaf };

/// Concept ids are their labels; leaf ids are "dataset/class".
struct SemanticNode {
  std::string id;
  std::string label;
  NodeKind kind = NodeKind::Concept;
  std::set<std::string> parents;
  std::set<std::string> children;
  std::set<DatasetClass> dataset_refs;
};

/// Leaf to attach under an existing concept.
struct LeafAttachment {
  std::string parent;
  DatasetClass leaf;
};

/// The semantic meta-layer: a DAG of concepts whose terminal nodes are the
/// original class names of the indexed datasets, kept verbatim. A leaf may sit
/// under several concepts.
///
/// Document format, one node per line, hierarchy by indentation:
///
///     built-up
///       residential
///         leaf: EuroSAT/residential buildings
///
/// A concept label seen again under another parent is the same node with an
/// extra parent edge.
class Lattice {
 public:
  /// Throws ParseError on malformed lines and StructureError on cycles or orphan leaves.
  static Lattice parse(std::string_view document);

  const std::map<std::string, SemanticNode>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& roots() const noexcept { return roots_; }

  bool contains(const std::string& id) const { return nodes_.count(id) != 0; }
  /// Throws LookupError for unknown ids.
  const SemanticNode& node(const std::string& id) const;

  /// Transitive closure along parent edges, excluding the node itself.
  std::set<std::string> ancestors(const std::string& id) const;
  /// Leaf ids reachable along child edges; a leaf's descendants are itself.
  std::set<std::string> descendants(const std::string& id) const;

  /// Union over keywords of all leaves under each concept whose label contains
  /// the keyword (case-insensitive). A matching leaf stands for its parent
  /// concepts, so "factory" brings in every industrial leaf.
  /// Throws ValidationError when `keywords` is empty.
  std::set<DatasetClass> expand_query(std::span<const std::string> keywords) const;

  bool has_leaf(const DatasetClass& c) const { return contains(leaf_id(c)); }
  std::set<std::string> leaf_classes(const std::string& dataset) const;

  /// Returns a lattice with extra leaves; existing nodes are never removed or relabelled.
  Lattice with_leaves(std::span<const LeafAttachment> leaves) const;

  static std::string leaf_id(const DatasetClass& c) { return c.dataset + "/" + c.name; }

 private:
  void attach(const std::string& parent, const std::string& child);
  void finalize();

  std::map<std::string, SemanticNode> nodes_;
  std::vector<std::string> roots_;
};

inline Lattice build_lattice(std::string_view document) { return Lattice::parse(document); }

/// The in-repo lattice covering the seven indexed training sets.
const Lattice& default_lattice();
std::string_view default_lattice_document();

Lattice load_lattice(const std::string& path);

}  // namespace forge
