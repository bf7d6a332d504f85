#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run.

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "forge/catalog.hpp"
#include "forge/fuse.hpp"
#include "forge/lattice.hpp"
#include "forge/raster.hpp"
#include "forge/range_reader.hpp"
#include "support.hpp"

namespace forge::test {

inline std::optional<double> value_of(const CatalogEntry& e, const std::string& f) {
  if (f == "bands") return e.meta.bands;
  if (f == "rows") return e.meta.rows;
  if (f == "cols") return e.meta.cols;
  if (f == "dtype_bits") return e.meta.dtype_bits;
  if (f == "bytes") return double(e.bytes);
  if (f == "epsg") return e.meta.epsg ? std::optional<double>(*e.meta.epsg) : std::nullopt;
  if (f == "resolution_m") return e.meta.resolution_m;
  return e.meta.nodata;
}

// Linear scan over every record, clause by clause.
inline std::vector<CatalogRecord> scan(const std::vector<CatalogRecord>& all, const Lattice& l, const Query& q) {
  std::set<DatasetClass> classes;
  if (!q.keywords.empty()) classes = l.expand_query(q.keywords);
  std::vector<CatalogRecord> out;
  for (const auto& r : all) {
    if (!q.keywords.empty()) {
      bool hit = false;
      for (const auto& lab : r.entry.labels) hit = hit || classes.count({r.dataset, lab});
      if (!hit) continue;
    }
    if (q.dataset && r.dataset != *q.dataset) continue;
    if (q.genre && r.entry.genre != *q.genre) continue;
    if (q.time_range) {
      const auto& t = r.entry.timestamp;
      if (!t || (q.time_range->from && *t < *q.time_range->from) || (q.time_range->to && *t > *q.time_range->to))
        continue;
    }
    bool ok = true;
    for (const auto& p : q.meta_predicates) {
      const auto v = value_of(r.entry, p.field);
      const bool pass = v && (p.op == Comparator::Eq   ? *v == p.value
                              : p.op == Comparator::Lt ? *v < p.value
                              : p.op == Comparator::Gt ? *v > p.value
                              : p.op == Comparator::Le ? *v <= p.value
                                                       : *v >= p.value);
      ok = ok && pass;
    }
    if (ok) out.push_back(r);
  }
  return out;
}

inline Query random_query(std::mt19937_64& rng, const std::vector<std::string>& datasets) {
  static const std::vector<std::string> words = {"building", "factory", "water", "forest", "ship", "vehicle",
                                                 "land",     "crop",    "urban", "zzz",    "Storage", "air"};
  static const std::vector<std::string> fields = {"bands", "rows", "cols", "dtype_bits", "epsg", "resolution_m",
                                                  "nodata", "bytes"};
  Query q;
  do {
    if (rng() % 2) {
      const int k = 1 + rng() % 2;
      for (int i = 0; i < k; ++i) q.keywords.push_back(words[rng() % words.size()]);
    }
    if (rng() % 3 == 0) q.dataset = datasets[rng() % datasets.size()];
    if (rng() % 4 == 0) q.genre = static_cast<Genre>(rng() % 3);
    if (rng() % 4 == 0) {
      TimeRange t;
      const auto a = std::int64_t(1483228800 + rng() % 94608000);
      if (rng() % 2) t.from = Timestamp{std::chrono::seconds{a}};
      if (rng() % 2) t.to = Timestamp{std::chrono::seconds{a + std::int64_t(rng() % 40000000)}};
      q.time_range = t;
    }
    if (rng() % 3 == 0) {
      MetaPredicate p;
      p.field = fields[rng() % fields.size()];
      p.op = static_cast<Comparator>(rng() % 5);
      p.value = p.field == "bytes" ? double(rng() % 100000) : double(rng() % 130);
      q.meta_predicates.push_back(p);
    }
  } while (q.empty());
  return q;
}

// Direct 2-D convolution with a truncated, normalised Gaussian and edge replication.
inline std::vector<double> dense_blur(const RasterPatch& p, std::uint32_t b, double sr, double sc) {
  const int Rr = int(std::ceil(4 * sr)), Rc = int(std::ceil(4 * sc));
  double norm = 0;
  for (int i = -Rr; i <= Rr; ++i)
    for (int j = -Rc; j <= Rc; ++j) norm += std::exp(-0.5 * (i * i / (sr * sr) + j * j / (sc * sc)));
  const int rows = int(p.rows), cols = int(p.cols);
  std::vector<double> out(p.plane());
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double s = 0;
      for (int i = -Rr; i <= Rr; ++i)
        for (int j = -Rc; j <= Rc; ++j) {
          const int rr = std::min(std::max(r + i, 0), rows - 1), cc = std::min(std::max(c + j, 0), cols - 1);
          s += std::exp(-0.5 * (i * i / (sr * sr) + j * j / (sc * sc))) * p.at(b, rr, cc);
        }
      out[std::size_t(r) * cols + c] = s / norm;
    }
  return out;
}

// Bilinear sample of a plane at the centre of output pixel (r, c).
inline double bilinear_at(const std::vector<double>& plane, std::uint32_t in_rows, std::uint32_t in_cols, std::uint32_t out_rows,
              std::uint32_t out_cols, std::uint32_t r, std::uint32_t c) {
  const double y = std::min(std::max((r + 0.5) * in_rows / out_rows - 0.5, 0.0), double(in_rows - 1));
  const double x = std::min(std::max((c + 0.5) * in_cols / out_cols - 0.5, 0.0), double(in_cols - 1));
  const auto y0 = std::uint32_t(y), x0 = std::uint32_t(x);
  const auto y1 = std::min(y0 + 1, in_rows - 1), x1 = std::min(x0 + 1, in_cols - 1);
  const double ty = y - y0, tx = x - x0;
  auto at = [&](std::uint32_t rr, std::uint32_t cc) { return plane[std::size_t(rr) * in_cols + cc]; };
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x1)) + ty * ((1 - tx) * at(y1, x0) + tx * at(y1, x1));
}

inline std::uint8_t mode_oracle(const std::vector<std::uint8_t>& block, std::optional<std::uint8_t> nodata) {
  std::map<std::uint8_t, int> n;
  for (auto v : block)
    if (!nodata || v != *nodata) ++n[v];
  if (n.empty()) return *nodata;
  std::uint8_t best = n.begin()->first;
  for (const auto& [id, k] : n)
    if (k > n[best]) best = id;
  return best;
}

struct Labels {
  std::vector<int> truth, pred;
  std::size_t n = 0;
};

inline Labels random_labels(std::mt19937_64& rng) {
  Labels l;
  l.n = 2 + rng() % 5;
  const std::size_t samples = 1 + rng() % 60;
  const bool skewed = rng() % 2;
  for (std::size_t i = 0; i < samples; ++i) {
    const int t = int(rng() % l.n);
    l.truth.push_back(t);
    l.pred.push_back(skewed && rng() % 3 ? t : int(rng() % l.n));
  }
  return l;
}

// Chance agreement as the fraction of all (i, j) sample pairs whose reference
// label of i equals the predicted label of j.
inline double kappa_oracle(const Labels& l) {
  const double N = double(l.truth.size());
  double agree = 0, pairs = 0;
  for (std::size_t i = 0; i < l.truth.size(); ++i) {
    agree += l.truth[i] == l.pred[i];
    for (std::size_t j = 0; j < l.truth.size(); ++j) pairs += l.truth[i] == l.pred[j];
  }
  const double po = agree / N, pe = pairs / (N * N);
  return pe == 1 ? 0 : (po - pe) / (1 - pe);
}

inline std::vector<std::optional<double>> f1_oracle(const Labels& l) {
  std::vector<std::optional<double>> out;
  for (std::size_t k = 0; k < l.n; ++k) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < l.truth.size(); ++i) {
      const bool t = l.truth[i] == int(k), p = l.pred[i] == int(k);
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    if (tp + fp + fn == 0) out.push_back(std::nullopt);
    else out.push_back(2 * tp / (2 * tp + fp + fn));
  }
  return out;
}

inline std::uint32_t le32(const Bytes& b, std::size_t i) {
  return b[i] | (b[i + 1] << 8) | (b[i + 2] << 16) | (std::uint32_t(b[i + 3]) << 24);
}

// Central directory size from the classic end record, found by a backwards scan.
inline std::uint64_t central_directory_bytes(const Bytes& zip) {
  for (std::size_t i = zip.size() - 22 + 1; i-- > 0;)
    if (le32(zip, i) == 0x06054b50) return le32(zip, i + 12);
  return 0;
}

inline const std::vector<std::pair<std::string, std::size_t>> kEuroSat = {
    {"annual crop", 3000},          {"forest", 3000},        {"herbaceous vegetation", 3000}, {"highway", 2500},
    {"industrial buildings", 2500}, {"pasture", 2000},       {"permanent crop", 2500},
    {"residential buildings", 3000}, {"river", 2500},        {"sea & lake", 3000}};

inline const std::vector<std::pair<std::string, std::size_t>> kBigEarthNet = {
    {"Annual crops associated with permanent crops", 1400},
    {"Broad-leaved forest", 500},
    {"Coniferous forest", 500},
    {"Mixed forest", 500},
    {"Coastal lagoons", 1300},
    {"Sea and ocean", 1300},
    {"Continuous urban fabric", 700},
    {"Discontinuous urban fabric", 700},
    {"Pastures", 900}};

inline std::vector<CatalogEntry> class_entries(const std::string& ds, const std::vector<std::pair<std::string, std::size_t>>& classes,
                                        std::uint32_t size) {
  std::vector<CatalogEntry> out;
  for (const auto& [name, count] : classes)
    for (std::size_t i = 0; i < count; ++i) {
      CatalogEntry e;
      e.path = {ds + "/" + ds + "_0000.zip", name + "/" + name + "_" + std::to_string(i + 1) + ".tif"};
      e.bytes = 1000 + i;
      e.labels = {name};
      e.meta = {13, size, size, 16, 32633, 10.0, std::nullopt};
      out.push_back(std::move(e));
    }
  return out;
}

inline Catalog blend_catalog() {
  std::vector<CatalogShard> shards;
  for (auto& s : build_index("EuroSAT", class_entries("EuroSAT", kEuroSat, 64), 5000).shards) shards.push_back(s);
  auto ben = class_entries("BigEarthNet-v1.0", kBigEarthNet, 120);
  // every third patch also shows pasture, so pools overlap
  for (std::size_t i = 0; i < ben.size(); i += 3)
    if (ben[i].labels.front() != "Pastures") ben[i].labels.push_back("Pastures");
  for (auto& s : build_index("BigEarthNet-v1.0", ben).shards) shards.push_back(s);
  return Catalog::from_shards(std::move(shards));
}

inline FusionRecipe blend_recipe() { return load_recipe((source_dir() / "data" / "recipes" / "eurosat-bigearthnet.recipe").string()); }

}  // namespace forge::test
