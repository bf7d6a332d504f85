#include "forge/lattice.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "forge/error.hpp"
#include "forge/text.hpp"
#include "default_lattice.inc"

namespace forge {

namespace {

struct Open {
  std::size_t indent;
  std::string id;
  NodeKind kind;
};

}  // namespace

Lattice Lattice::parse(std::string_view doc) {
  Lattice lat;
  std::vector<Open> stack;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= doc.size()) {
    const auto nl = doc.find('\n', pos);
    auto line = doc.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? doc.size() + 1 : nl + 1;
    ++line_no;

    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto indent = line.find_first_not_of(' ');
    if (line[indent] == '\t') throw ParseError("tabs are not allowed for indentation", line_no);

    while (!stack.empty() && stack.back().indent >= indent) stack.pop_back();
    const Open* parent = stack.empty() ? nullptr : &stack.back();
    if (parent && parent->kind == NodeKind::Leaf) throw ParseError("leaf nodes cannot have children", line_no);

    if (body.rfind("leaf:", 0) == 0) {
      const auto ref = text::trim(body.substr(5));
      const auto slash = ref.find('/');
      if (slash == std::string_view::npos || slash == 0 || slash + 1 == ref.size())
        throw ParseError("expected 'leaf: dataset/class'", line_no);
      DatasetClass dc{std::string(text::trim(ref.substr(0, slash))), std::string(text::trim(ref.substr(slash + 1)))};
      if (!parent) throw StructureError("orphan leaf '" + leaf_id(dc) + "' at line " + std::to_string(line_no));
      const auto id = leaf_id(dc);
      auto& node = lat.nodes_[id];
      node.id = id;
      node.label = dc.name;
      node.kind = NodeKind::Leaf;
      node.dataset_refs.insert(dc);
      lat.attach(parent->id, id);
      stack.push_back({indent, id, NodeKind::Leaf});
    } else {
      const std::string label(body);
      if (label.find('/') != std::string::npos)
        throw ParseError("concept labels cannot contain '/'", line_no, label);
      auto [it, inserted] = lat.nodes_.try_emplace(label);
      if (inserted) {
        it->second.id = label;
        it->second.label = label;
        it->second.kind = NodeKind::Concept;
      } else if (it->second.kind != NodeKind::Concept) {
        throw ParseError("'" + label + "' is already a leaf", line_no);
      }
      if (parent) lat.attach(parent->id, label);
      stack.push_back({indent, label, NodeKind::Concept});
    }
  }
  lat.finalize();
  return lat;
}

void Lattice::attach(const std::string& parent, const std::string& child) {
  nodes_.at(parent).children.insert(child);
  nodes_.at(child).parents.insert(parent);
}

void Lattice::finalize() {
  // Cycle detection with an explicit path so the error can name it.
  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> mark;
  for (const auto& [id, _] : nodes_) mark[id] = Mark::White;
  std::vector<std::string> path;

  auto visit = [&](auto&& self, const std::string& id) -> void {
    mark[id] = Mark::Grey;
    path.push_back(id);
    for (const auto& c : nodes_.at(id).children) {
      if (mark[c] == Mark::Grey) {
        std::string cycle;
        auto it = std::find(path.begin(), path.end(), c);
        for (; it != path.end(); ++it) cycle += *it + " -> ";
        throw StructureError("cycle detected: " + cycle + c);
      }
      if (mark[c] == Mark::White) self(self, c);
    }
    path.pop_back();
    mark[id] = Mark::Black;
  };
  for (const auto& [id, _] : nodes_)
    if (mark[id] == Mark::White) visit(visit, id);

  roots_.clear();
  for (const auto& [id, n] : nodes_) {
    if (!n.parents.empty()) continue;
    if (n.kind == NodeKind::Leaf) throw StructureError("orphan leaf '" + id + "'");
    roots_.push_back(id);
  }
}

const SemanticNode& Lattice::node(const std::string& id) const {
  const auto it = nodes_.find(id);
  if (it == nodes_.end()) throw LookupError("unknown lattice node '" + id + "'");
  return it->second;
}

std::set<std::string> Lattice::ancestors(const std::string& id) const {
  std::set<std::string> out;
  std::vector<std::string> todo(node(id).parents.begin(), node(id).parents.end());
  while (!todo.empty()) {
    auto cur = std::move(todo.back());
    todo.pop_back();
    if (!out.insert(cur).second) continue;
    for (const auto& p : nodes_.at(cur).parents) todo.push_back(p);
  }
  return out;
}

std::set<std::string> Lattice::descendants(const std::string& id) const {
  std::set<std::string> out;
  std::set<std::string> seen;
  std::vector<std::string> todo{id};
  node(id);
  while (!todo.empty()) {
    auto cur = std::move(todo.back());
    todo.pop_back();
    if (!seen.insert(cur).second) continue;
    const auto& n = nodes_.at(cur);
    if (n.kind == NodeKind::Leaf) out.insert(cur);
    for (const auto& c : n.children) todo.push_back(c);
  }
  return out;
}

std::set<DatasetClass> Lattice::expand_query(std::span<const std::string> keywords) const {
  if (keywords.empty()) throw ValidationError("expand_query needs at least one keyword");
  std::set<DatasetClass> out;
  for (const auto& kw : keywords) {
    const auto needle = text::lower(kw);
    for (const auto& [id, n] : nodes_) {
      if (text::lower(n.label).find(needle) == std::string::npos) continue;
      const auto concepts = n.kind == NodeKind::Leaf ? n.parents : std::set<std::string>{id};
      for (const auto& c : concepts) {
        for (const auto& leaf : descendants(c)) {
          const auto& refs = nodes_.at(leaf).dataset_refs;
          out.insert(refs.begin(), refs.end());
        }
      }
    }
  }
  return out;
}

std::set<std::string> Lattice::leaf_classes(const std::string& dataset) const {
  std::set<std::string> out;
  for (const auto& [id, n] : nodes_) {
    for (const auto& r : n.dataset_refs)
      if (r.dataset == dataset) out.insert(r.name);
  }
  return out;
}

Lattice Lattice::with_leaves(std::span<const LeafAttachment> leaves) const {
  Lattice out = *this;
  for (const auto& a : leaves) {
    const auto& parent = out.node(a.parent);
    if (parent.kind != NodeKind::Concept) throw StructureError("cannot attach under leaf '" + a.parent + "'");
    const auto id = leaf_id(a.leaf);
    auto [it, inserted] = out.nodes_.try_emplace(id);
    if (inserted) {
      it->second.id = id;
      it->second.label = a.leaf.name;
      it->second.kind = NodeKind::Leaf;
      it->second.dataset_refs.insert(a.leaf);
    }
    out.attach(a.parent, id);
  }
  out.finalize();
  return out;
}

std::string_view default_lattice_document() { return kDefaultLatticeDocument; }

const Lattice& default_lattice() {
  static const Lattice lat = Lattice::parse(kDefaultLatticeDocument);
  return lat;
}

Lattice load_lattice(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open lattice " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Lattice::parse(ss.str());
}

}  // namespace forge
