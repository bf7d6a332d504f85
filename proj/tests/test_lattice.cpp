#include <doctest.h>

#include <random>

#include "forge/error.hpp"
#include "forge/lattice.hpp"
#include "forge/text.hpp"

using namespace forge;

namespace {

void dfs_leaves(const Lattice& l, const std::string& id, std::set<std::string>& out) {
  const auto& n = l.nodes().at(id);
  if (n.kind == NodeKind::Leaf) out.insert(id);
  for (const auto& c : n.children) dfs_leaves(l, c, out);
}

std::set<std::string> oracle_descendants(const Lattice& l, const std::string& id) {
  std::set<std::string> out;
  dfs_leaves(l, id, out);
  return out;
}

bool reaches(const Lattice& l, const std::string& from, const std::string& to) {
  for (const auto& c : l.nodes().at(from).children)
    if (c == to || reaches(l, c, to)) return true;
  return false;
}

std::set<std::string> oracle_ancestors(const Lattice& l, const std::string& id) {
  std::set<std::string> out;
  for (const auto& [other, n] : l.nodes())
    if (other != id && reaches(l, other, id)) out.insert(other);
  return out;
}

// Concepts whose label contains a keyword, plus the parents of leaves whose label does.
std::set<DatasetClass> oracle_expand(const Lattice& l, const std::vector<std::string>& kws) {
  std::set<std::string> concepts;
  for (const auto& kw : kws) {
    for (const auto& [id, n] : l.nodes()) {
      if (!text::icontains(n.label, kw)) continue;
      if (n.kind == NodeKind::Concept)
        concepts.insert(id);
      else
        concepts.insert(n.parents.begin(), n.parents.end());
    }
  }
  std::set<DatasetClass> out;
  for (const auto& c : concepts)
    for (const auto& leaf : oracle_descendants(l, c)) {
      const auto& refs = l.nodes().at(leaf).dataset_refs;
      out.insert(refs.begin(), refs.end());
    }
  return out;
}

std::set<DatasetClass> classes_of(const Lattice& l, const std::set<std::string>& leaves) {
  std::set<DatasetClass> out;
  for (const auto& id : leaves) {
    const auto& refs = l.nodes().at(id).dataset_refs;
    out.insert(refs.begin(), refs.end());
  }
  return out;
}

// Two concept layers; mid concepts and leaves recur under several parents.
std::string random_document(std::mt19937_64& rng) {
  const int roots = 1 + rng() % 3;
  std::string doc;
  for (int r = 0; r < roots; ++r) {
    doc += "root" + std::to_string(r) + "\n";
    const int kids = 1 + rng() % 3;
    for (int k = 0; k < kids; ++k) {
      const auto name = "mid" + std::to_string(rng() % 6);
      doc += "  " + name + "\n";
      const int leaves = rng() % 4;
      for (int f = 0; f < leaves; ++f)
        doc += "    leaf: D" + std::to_string(rng() % 3) + "/cls " + std::to_string(rng() % 10) + "\n";
    }
  }
  return doc;
}

}  // namespace

TEST_CASE("default lattice has the four roots and the built-up layer") {
  const auto& l = default_lattice();
  CHECK(std::set<std::string>(l.roots().begin(), l.roots().end()) ==
        std::set<std::string>{"built-up", "transport means", "object", "natural areas"});
  CHECK(l.node("built-up").children ==
        std::set<std::string>{"residential", "industrial", "facilities", "infrastructure", "construction", "areas"});
  CHECK(l.node("transport means").children == std::set<std::string>{"vehicle", "flying", "vessel"});
  CHECK(l.node("natural areas").children == std::set<std::string>{"air", "land", "water"});
  for (const auto& [id, n] : l.nodes()) {
    CAPTURE(id);
    if (n.kind == NodeKind::Leaf) {
      CHECK(n.children.empty());
      CHECK(n.dataset_refs.size() == 1);
    } else {
      CHECK(n.dataset_refs.empty());
    }
  }
}

TEST_CASE("leaf labels keep dataset class names verbatim") {
  const auto& l = default_lattice();
  CHECK(l.has_leaf({"EuroSAT", "sea & lake"}));
  CHECK(l.has_leaf({"BigEarthNet-v1.0", "Non-irrigated arable land"}));
  CHECK(l.node("EuroSAT/sea & lake").label == "sea & lake");
  CHECK(l.leaf_classes("EuroSAT").size() == 10);
}

TEST_CASE("a leaf may have several parents") {
  const auto& l = default_lattice();
  CHECK(l.node("xView/Damaged Building").parents == std::set<std::string>{"residential", "industrial"});

  const auto two = Lattice::parse(
      "built-up\n  residential\n    leaf: X/damaged building\n  industrial\n    leaf: X/damaged building\n");
  CHECK(two.node("X/damaged building").parents.size() == 2);
}

TEST_CASE("structure errors") {
  CHECK_THROWS_AS(Lattice::parse("a\n  b\nb\n  a\n"), StructureError);
  try {
    Lattice::parse("a\n  b\n    c\nc\n  a\n");
    FAIL("cycle accepted");
  } catch (const StructureError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("a") != std::string::npos);
    CHECK(msg.find("c") != std::string::npos);
  }
  CHECK_THROWS_AS(Lattice::parse("leaf: X/y\n"), StructureError);
  CHECK_THROWS_AS(Lattice::parse("a\n  leaf: X/y\n    b\n"), ParseError);
  CHECK_THROWS_AS(Lattice::parse("a\n  leaf: nodataset\n"), ParseError);
  CHECK_THROWS_AS(Lattice::parse("a\n\tb\n"), ParseError);
}

TEST_CASE("ancestors and descendants") {
  const auto& l = default_lattice();
  CHECK(l.ancestors("residential") == std::set<std::string>{"built-up"});
  CHECK(l.ancestors("EuroSAT/forest") == std::set<std::string>{"land", "natural areas"});
  CHECK(l.descendants("EuroSAT/forest") == std::set<std::string>{"EuroSAT/forest"});
  CHECK(l.descendants("built-up") == oracle_descendants(l, "built-up"));
  CHECK_THROWS_AS(l.ancestors("nope"), LookupError);
  CHECK_THROWS_AS(l.descendants("nope"), LookupError);
}

TEST_CASE("expand_query on the default lattice") {
  const auto& l = default_lattice();
  const std::vector<std::string> built{"built-up"};
  CHECK(l.expand_query(built) == classes_of(l, oracle_descendants(l, "built-up")));

  const std::vector<std::string> none{"zzz-nonexistent"};
  CHECK(l.expand_query(none).empty());
  CHECK_THROWS_AS(l.expand_query(std::span<const std::string>{}), ValidationError);

  const std::vector<std::string> water{"WATER"};
  CHECK(l.expand_query(water).count({"EuroSAT", "river"}));

  const std::vector<LeafAttachment> extra{{"industrial", {"Fixture", "Factory"}}};
  const auto fx = l.with_leaves(extra);
  const std::vector<std::string> kw{"building", "factory"};
  auto want = classes_of(fx, oracle_descendants(fx, "residential"));
  const auto ind = classes_of(fx, oracle_descendants(fx, "industrial"));
  want.insert(ind.begin(), ind.end());
  CHECK(fx.expand_query(kw) == want);
}

TEST_CASE("randomized lattices agree with the DFS oracle") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto doc = random_document(rng);
    CAPTURE(doc);
    const auto l = Lattice::parse(doc);
    for (const auto& [id, n] : l.nodes()) {
      CHECK(l.descendants(id) == oracle_descendants(l, id));
      CHECK(l.ancestors(id) == oracle_ancestors(l, id));
    }
    for (int q = 0; q < 5; ++q) {
      std::vector<std::string> kws;
      const int k = 1 + rng() % 2;
      for (int j = 0; j < k; ++j) {
        const auto pick = rng() % 3;
        kws.push_back(pick == 0 ? "mid" + std::to_string(rng() % 6)
                                : pick == 1 ? "cls " + std::to_string(rng() % 10) : "root");
      }
      CHECK(l.expand_query(kws) == oracle_expand(l, kws));
    }
  }
}

TEST_CASE("with_leaves only grows the lattice") {
  std::mt19937_64 rng(5);
  const auto& base = default_lattice();
  std::vector<std::string> concepts;
  for (const auto& [id, n] : base.nodes())
    if (n.kind == NodeKind::Concept) concepts.push_back(id);
  for (int i = 0; i < 50; ++i) {
    std::vector<LeafAttachment> add;
    const int k = 1 + rng() % 4;
    for (int j = 0; j < k; ++j)
      add.push_back({concepts[rng() % concepts.size()], {"New", "class " + std::to_string(rng() % 20)}});
    const auto grown = base.with_leaves(add);
    for (const auto& [id, n] : base.nodes()) {
      REQUIRE(grown.contains(id));
      CHECK(grown.node(id).label == n.label);
      for (const auto& c : n.children) CHECK(grown.node(id).children.count(c));
    }
    const std::vector<std::string> kw{concepts[rng() % concepts.size()]};
    const auto before = base.expand_query(kw);
    const auto after = grown.expand_query(kw);
    CHECK(std::includes(after.begin(), after.end(), before.begin(), before.end()));
  }
  const std::vector<LeafAttachment> under_leaf{{"EuroSAT/forest", {"New", "x"}}};
  CHECK_THROWS_AS(base.with_leaves(under_leaf), StructureError);
  const std::vector<LeafAttachment> unknown{{"no such concept", {"New", "x"}}};
  CHECK_THROWS_AS(base.with_leaves(unknown), LookupError);
}
