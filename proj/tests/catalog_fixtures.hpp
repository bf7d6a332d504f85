#pragma once

#include <algorithm>
#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "forge/catalog.hpp"
#include "forge/lattice.hpp"

namespace forge::test {

/// Default lattice plus a "Factory" leaf under industrial.
inline Lattice fixture_lattice() {
  const std::vector<LeafAttachment> extra{{"industrial", {"Fixture", "Factory"}}};
  return default_lattice().with_leaves(extra);
}

/// Every (dataset, class) leaf of the lattice, sorted.
inline std::vector<DatasetClass> all_leaf_classes(const Lattice& l) {
  std::vector<DatasetClass> out;
  for (const auto& [id, n] : l.nodes())
    if (n.kind == NodeKind::Leaf) out.insert(out.end(), n.dataset_refs.begin(), n.dataset_refs.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Shards of random entries whose labels are lattice leaves (and the odd stray label).
inline std::vector<CatalogShard> random_shards(std::mt19937_64& rng, const Lattice& l, std::size_t n) {
  const auto leaves = all_leaf_classes(l);
  std::map<std::string, std::vector<CatalogEntry>> by_ds;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pick = leaves[rng() % leaves.size()];
    CatalogEntry e;
    e.path = {pick.dataset + "/a_" + std::to_string(rng() % 4) + ".zip", "f" + std::to_string(i) + ".tif"};
    e.bytes = 1 + rng() % 100000;
    e.genre = static_cast<Genre>(rng() % 3);
    if (rng() % 3) e.timestamp = Timestamp{std::chrono::seconds{1483228800 + std::int64_t(rng() % 94608000)}};
    e.labels.push_back(pick.name);
    if (rng() % 4 == 0) {
      for (const auto& other : leaves)
        if (other.dataset == pick.dataset && other.name != pick.name && rng() % 5 == 0) e.labels.push_back(other.name);
    }
    if (rng() % 50 == 0) e.labels.push_back("stray label");
    e.meta.bands = 1 + rng() % 13;
    e.meta.rows = std::vector<std::uint32_t>{64, 120, 256, 768}[rng() % 4];
    e.meta.cols = e.meta.rows;
    e.meta.dtype_bits = rng() % 2 ? 8 : 16;
    if (rng() % 2) e.meta.epsg = 32600 + rng() % 60;
    if (rng() % 2) e.meta.resolution_m = std::vector<double>{0.3, 0.5, 10, 20}[rng() % 4];
    if (rng() % 4 == 0) e.meta.nodata = 0;
    by_ds[pick.dataset].push_back(std::move(e));
  }
  std::vector<CatalogShard> out;
  for (auto& [ds, entries] : by_ds) {
    const std::size_t per = 1 + rng() % 500;
    auto b = build_index(ds, entries, per);
    for (auto& s : b.shards) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace forge::test
