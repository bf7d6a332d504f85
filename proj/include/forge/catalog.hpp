#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/lattice.hpp"

namespace forge {

enum class Genre { Image, Mask, Metadata };

std::string to_string(Genre g);
/// Throws ValidationError for unknown names.
Genre parse_genre(std::string_view s);

using Timestamp = std::chrono::sys_seconds;

/// RFC-3339 with second precision; offsets are normalised to UTC.
Timestamp parse_rfc3339(std::string_view s);
std::string format_rfc3339(Timestamp t);

/// Location of one file: an archive plus the member name inside it. An empty
/// archive means a loose file relative to the archive root.
struct ArchivePath {
  std::string archive;
  std::string member;

  std::string str() const { return archive.empty() ? member : archive + "!" + member; }
  friend auto operator<=>(const ArchivePath&, const ArchivePath&) = default;
};

struct RasterMeta {
  std::uint32_t bands = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t dtype_bits = 0;
  std::optional<std::uint32_t> epsg;
  std::optional<double> resolution_m;
  std::optional<double> nodata;
  friend bool operator==(const RasterMeta&, const RasterMeta&) = default;
};

struct CatalogEntry {
  ArchivePath path;
  std::uint64_t bytes = 0;
  Genre genre = Genre::Image;
  std::optional<Timestamp> timestamp;
  std::vector<std::string> labels;
  RasterMeta meta;
  friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

/// Empty when the entry satisfies its own invariants, else the reason.
std::optional<std::string> check_entry(const CatalogEntry& e);

struct CatalogShard {
  std::string dataset;
  std::uint32_t shard_index = 0;
  std::uint32_t shard_count = 0;
  std::vector<CatalogEntry> entries;
  friend bool operator==(const CatalogShard&, const CatalogShard&) = default;
};

inline constexpr std::size_t kDefaultMaxEntriesPerShard = 50'000;

struct Reject {
  std::size_t index;
  std::string reason;
};

struct IndexBuild {
  std::vector<CatalogShard> shards;
  std::vector<Reject> rejects;
};

/// Partitions the accepted entries in input order into ceil(n / max) shards,
/// all full except possibly the last. Invalid entries are reported, not fatal.
IndexBuild build_index(const std::string& dataset, std::span<const CatalogEntry> entries,
                       std::size_t max_entries_per_shard = kDefaultMaxEntriesPerShard);

/// Shard document, `content_public_<k>.json`. Field order is fixed and absent
/// optionals are omitted, so identical shards serialise to identical bytes.
std::string shard_to_json(const CatalogShard& shard);
CatalogShard shard_from_json(std::string_view document);
std::string shard_file_name(std::uint32_t index);

std::string entry_to_json(const CatalogEntry& e);
CatalogEntry entry_from_json(std::string_view document);

struct CatalogRecord {
  std::string dataset;
  CatalogEntry entry;
  friend bool operator==(const CatalogRecord&, const CatalogRecord&) = default;
};

enum class Comparator { Eq, Lt, Gt, Le, Ge };

/// `field` is one of bands, rows, cols, dtype_bits, epsg, resolution_m, nodata, bytes.
struct MetaPredicate {
  std::string field;
  Comparator op = Comparator::Eq;
  double value = 0.0;
};

/// Parses "field<op>value" with op among = < > <= >= (also the unicode forms).
MetaPredicate parse_predicate(std::string_view s);

/// Inclusive bounds; either side may be open.
struct TimeRange {
  std::optional<Timestamp> from;
  std::optional<Timestamp> to;
};

/// Conjunction of clauses; at least one must be present.
struct Query {
  std::vector<std::string> keywords;
  std::optional<std::string> dataset;
  std::optional<Genre> genre;
  std::optional<TimeRange> time_range;
  std::vector<MetaPredicate> meta_predicates;

  bool empty() const {
    return keywords.empty() && !dataset && !genre && !time_range && meta_predicates.empty();
  }
};

/// Evaluates every clause except keywords against one record.
bool matches_filters(const Query& q, const CatalogRecord& r);

struct ClassStats {
  std::uint64_t entries = 0;
  std::uint64_t bytes = 0;
};

struct DatasetStats {
  std::uint64_t entries = 0;
  std::uint64_t bytes = 0;
  std::map<std::string, ClassStats> classes;  // multi-label entries count once per label
};

/// In-memory union of loaded shards, ordered by (dataset, path). Immutable
/// after construction; concurrent queries are safe.
class Catalog {
 public:
  Catalog() = default;

  /// Throws ValidationError on shard_count disagreement, repeated or missing
  /// shard indices, and duplicate paths. When `lattice` is given, labels that
  /// are not leaves of their dataset are reported in `label_warnings()`.
  static Catalog from_shards(std::vector<CatalogShard> shards, const Lattice* lattice = nullptr);

  const std::vector<CatalogRecord>& records() const noexcept { return records_; }
  const std::vector<std::string>& label_warnings() const noexcept { return warnings_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::vector<std::string> datasets() const;

  /// Entries matching all clauses, ordered by (dataset, path). Throws
  /// ValidationError for an empty query or unknown predicate field.
  std::vector<CatalogRecord> query(const Lattice& lattice, const Query& q) const;

  std::map<std::string, DatasetStats> stats() const;

  /// Record for a path; nullptr when absent.
  const CatalogRecord* find(const ArchivePath& p) const;

 private:
  std::vector<CatalogRecord> records_;
  std::vector<std::string> warnings_;
  // (dataset, label) -> record indices, ascending
  std::map<DatasetClass, std::vector<std::size_t>> by_label_;
  std::map<ArchivePath, std::size_t> by_path_;
};

/// Reads shard documents (in parallel up to `workers`) and merges them.
Catalog load_shards(std::span<const std::string> paths, const Lattice* lattice = nullptr, unsigned workers = 1);

/// All `content_public_*.json` files directly inside `dir`, sorted.
std::vector<std::string> find_shard_files(const std::string& dir);

}  // namespace forge
