#include "forge/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {

using ojson = nlohmann::ordered_json;

std::string to_string(Genre g) {
  switch (g) {
    case Genre::Image: return "image";
    case Genre::Mask: return "mask";
    case Genre::Metadata: return "metadata";
  }
  return "image";
}

Genre parse_genre(std::string_view s) {
  if (s == "image") return Genre::Image;
  if (s == "mask") return Genre::Mask;
  if (s == "metadata") return Genre::Metadata;
  throw ValidationError("unknown genre '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// timestamps

Timestamp parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  int y, mo, d, h, mi, sec;
  int consumed = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2d%*1[Tt ]%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6)
    throw ValidationError("not an RFC-3339 timestamp: '" + str + "'");
  std::string_view rest = s.substr(consumed);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && std::isdigit(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  }
  int offset_min = 0;
  if (rest == "Z" || rest == "z") {
  } else if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    const auto oh = text::parse_number<int>(rest.substr(1, 2));
    const auto om = text::parse_number<int>(rest.substr(4, 2));
    if (!oh || !om) throw ValidationError("bad offset in timestamp '" + str + "'");
    offset_min = (*oh * 60 + *om) * (rest[0] == '-' ? -1 : 1);
  } else {
    throw ValidationError("timestamp needs 'Z' or an offset: '" + str + "'");
  }
  const year_month_day ymd{year{y}, month{unsigned(mo)}, day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw ValidationError("invalid date in '" + str + "'");
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_min};
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()), int(hms.hours().count()), int(hms.minutes().count()),
                int(hms.seconds().count()));
  return buf;
}

// ---------------------------------------------------------------------------
// entries and shards

std::optional<std::string> check_entry(const CatalogEntry& e) {
  if (e.path.member.empty()) return "empty member path";
  if (e.bytes == 0) return "bytes must be > 0";
  if (e.genre == Genre::Image && e.meta.bands < 1) return "image entries need at least one band";
  return std::nullopt;
}

IndexBuild build_index(const std::string& dataset, std::span<const CatalogEntry> entries,
                       std::size_t max_entries_per_shard) {
  if (max_entries_per_shard < 1) throw ValidationError("max_entries_per_shard must be >= 1");
  IndexBuild out;
  std::vector<const CatalogEntry*> accepted;
  accepted.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (auto why = check_entry(entries[i]))
      out.rejects.push_back({i, *why});
    else
      accepted.push_back(&entries[i]);
  }
  const std::size_t n = accepted.size();
  const std::size_t count = (n + max_entries_per_shard - 1) / max_entries_per_shard;
  out.shards.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    auto& s = out.shards[k];
    s.dataset = dataset;
    s.shard_index = static_cast<std::uint32_t>(k);
    s.shard_count = static_cast<std::uint32_t>(count);
    const auto begin = k * max_entries_per_shard;
    const auto end = std::min(n, begin + max_entries_per_shard);
    s.entries.reserve(end - begin);
    for (auto i = begin; i < end; ++i) s.entries.push_back(*accepted[i]);
  }
  return out;
}

namespace {

ojson entry_json(const CatalogEntry& e) {
  ojson j;
  j["path"] = {{"archive", e.path.archive}, {"member", e.path.member}};
  j["bytes"] = e.bytes;
  j["genre"] = to_string(e.genre);
  if (e.timestamp) j["timestamp"] = format_rfc3339(*e.timestamp);
  j["labels"] = e.labels;
  ojson m;
  m["bands"] = e.meta.bands;
  m["rows"] = e.meta.rows;
  m["cols"] = e.meta.cols;
  m["dtype_bits"] = e.meta.dtype_bits;
  if (e.meta.epsg) m["epsg"] = *e.meta.epsg;
  if (e.meta.resolution_m) m["resolution_m"] = *e.meta.resolution_m;
  if (e.meta.nodata) m["nodata"] = *e.meta.nodata;
  j["meta"] = std::move(m);
  return j;
}

template <class J>
CatalogEntry entry_of(const J& j) {
  CatalogEntry e;
  const auto& p = j.at("path");
  e.path.archive = p.at("archive").template get<std::string>();
  e.path.member = p.at("member").template get<std::string>();
  e.bytes = j.at("bytes").template get<std::uint64_t>();
  e.genre = parse_genre(j.at("genre").template get<std::string>());
  if (j.contains("timestamp")) e.timestamp = parse_rfc3339(j.at("timestamp").template get<std::string>());
  e.labels = j.at("labels").template get<std::vector<std::string>>();
  const auto& m = j.at("meta");
  e.meta.bands = m.at("bands").template get<std::uint32_t>();
  e.meta.rows = m.at("rows").template get<std::uint32_t>();
  e.meta.cols = m.at("cols").template get<std::uint32_t>();
  e.meta.dtype_bits = m.at("dtype_bits").template get<std::uint32_t>();
  if (m.contains("epsg")) e.meta.epsg = m.at("epsg").template get<std::uint32_t>();
  if (m.contains("resolution_m")) e.meta.resolution_m = m.at("resolution_m").template get<double>();
  if (m.contains("nodata")) e.meta.nodata = m.at("nodata").template get<double>();
  return e;
}

}  // namespace

std::string entry_to_json(const CatalogEntry& e) { return entry_json(e).dump(); }

CatalogEntry entry_from_json(std::string_view document) {
  try {
    return entry_of(nlohmann::json::parse(document));
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("catalog entry: ") + ex.what());
  }
}

std::string shard_to_json(const CatalogShard& shard) {
  // One entry per line.
  std::string out;
  out += "{\"dataset\":" + ojson(shard.dataset).dump();
  out += ",\"shard\":{\"index\":" + std::to_string(shard.shard_index) +
         ",\"of\":" + std::to_string(shard.shard_count) + "}";
  out += ",\"entries\":[";
  for (std::size_t i = 0; i < shard.entries.size(); ++i) {
    out += i ? ",\n" : "\n";
    out += entry_json(shard.entries[i]).dump();
  }
  out += "\n]}\n";
  return out;
}

CatalogShard shard_from_json(std::string_view document) {
  try {
    const auto j = nlohmann::json::parse(document);
    CatalogShard s;
    s.dataset = j.at("dataset").get<std::string>();
    s.shard_index = j.at("shard").at("index").get<std::uint32_t>();
    s.shard_count = j.at("shard").at("of").get<std::uint32_t>();
    const auto& entries = j.at("entries");
    s.entries.reserve(entries.size());
    for (const auto& e : entries) s.entries.push_back(entry_of(e));
    if (s.shard_index >= s.shard_count)
      throw ValidationError("shard index " + std::to_string(s.shard_index) + " out of range for " +
                            std::to_string(s.shard_count) + " shards");
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("shard document: ") + ex.what());
  }
}

std::string shard_file_name(std::uint32_t index) { return "content_public_" + std::to_string(index) + ".json"; }

// ---------------------------------------------------------------------------
// queries

MetaPredicate parse_predicate(std::string_view s) {
  static const std::vector<std::pair<std::string_view, Comparator>> ops = {
      {"<=", Comparator::Le}, {">=", Comparator::Ge}, {"≤", Comparator::Le}, {"≥", Comparator::Ge},
      {"=", Comparator::Eq},  {"<", Comparator::Lt},  {">", Comparator::Gt},
  };
  for (const auto& [tok, op] : ops) {
    const auto pos = s.find(tok);
    if (pos == std::string_view::npos) continue;
    MetaPredicate p;
    p.field = std::string(text::trim(s.substr(0, pos)));
    p.op = op;
    const auto v = text::parse_number<double>(s.substr(pos + tok.size()));
    if (!v || p.field.empty()) break;
    p.value = *v;
    return p;
  }
  throw ValidationError("bad predicate '" + std::string(s) + "' (expected field<op>number)");
}

namespace {

std::optional<double> field_value(const CatalogEntry& e, const std::string& field) {
  if (field == "bands") return e.meta.bands;
  if (field == "rows") return e.meta.rows;
  if (field == "cols") return e.meta.cols;
  if (field == "dtype_bits") return e.meta.dtype_bits;
  if (field == "bytes") return static_cast<double>(e.bytes);
  if (field == "epsg") return e.meta.epsg ? std::optional<double>(*e.meta.epsg) : std::nullopt;
  if (field == "resolution_m") return e.meta.resolution_m;
  if (field == "nodata") return e.meta.nodata;
  throw ValidationError("unknown predicate field '" + field + "'");
}

bool compare(double lhs, Comparator op, double rhs) {
  switch (op) {
    case Comparator::Eq: return lhs == rhs;
    case Comparator::Lt: return lhs < rhs;
    case Comparator::Gt: return lhs > rhs;
    case Comparator::Le: return lhs <= rhs;
    case Comparator::Ge: return lhs >= rhs;
  }
  return false;
}

}  // namespace

bool matches_filters(const Query& q, const CatalogRecord& r) {
  if (q.dataset && r.dataset != *q.dataset) return false;
  if (q.genre && r.entry.genre != *q.genre) return false;
  if (q.time_range) {
    if (!r.entry.timestamp) return false;
    if (q.time_range->from && *r.entry.timestamp < *q.time_range->from) return false;
    if (q.time_range->to && *r.entry.timestamp > *q.time_range->to) return false;
  }
  for (const auto& p : q.meta_predicates) {
    const auto v = field_value(r.entry, p.field);
    if (!v || !compare(*v, p.op, p.value)) return false;
  }
  return true;
}

Catalog Catalog::from_shards(std::vector<CatalogShard> shards, const Lattice* lattice) {
  std::map<std::string, std::vector<const CatalogShard*>> by_dataset;
  for (const auto& s : shards) by_dataset[s.dataset].push_back(&s);
  for (auto& [dataset, group] : by_dataset) {
    const auto count = group.front()->shard_count;
    std::set<std::uint32_t> seen;
    for (const auto* s : group) {
      if (s->shard_count != count)
        throw ValidationError("dataset '" + dataset + "': shard_count mismatch (" + std::to_string(count) +
                              " vs " + std::to_string(s->shard_count) + ")");
      if (!seen.insert(s->shard_index).second)
        throw ValidationError("dataset '" + dataset + "': shard index " + std::to_string(s->shard_index) +
                              " appears twice");
    }
    if (seen.size() != count)
      throw ValidationError("dataset '" + dataset + "': " + std::to_string(seen.size()) + " of " +
                            std::to_string(count) + " shards loaded");
  }

  Catalog cat;
  std::size_t total = 0;
  for (const auto& s : shards) total += s.entries.size();
  cat.records_.reserve(total);
  for (auto& s : shards) {
    for (auto& e : s.entries) cat.records_.push_back({s.dataset, std::move(e)});
  }
  std::sort(cat.records_.begin(), cat.records_.end(), [](const CatalogRecord& a, const CatalogRecord& b) {
    return std::tie(a.dataset, a.entry.path) < std::tie(b.dataset, b.entry.path);
  });

  std::set<DatasetClass> unknown_labels;
  for (std::size_t i = 0; i < cat.records_.size(); ++i) {
    const auto& r = cat.records_[i];
    if (!cat.by_path_.emplace(r.entry.path, i).second)
      throw ValidationError("duplicate path '" + r.entry.path.str() + "'");
    for (const auto& label : r.entry.labels) {
      DatasetClass dc{r.dataset, label};
      auto& postings = cat.by_label_[dc];
      if (postings.empty() || postings.back() != i) postings.push_back(i);
      if (lattice && !lattice->has_leaf(dc)) unknown_labels.insert(dc);
    }
  }
  for (const auto& dc : unknown_labels)
    cat.warnings_.push_back("label '" + dc.name + "' of dataset '" + dc.dataset + "' is not a lattice leaf");
  return cat;
}

std::vector<std::string> Catalog::datasets() const {
  std::vector<std::string> out;
  for (const auto& r : records_)
    if (out.empty() || out.back() != r.dataset) out.push_back(r.dataset);
  return out;
}

std::vector<CatalogRecord> Catalog::query(const Lattice& lattice, const Query& q) const {
  if (q.empty()) throw ValidationError("query needs at least one clause");
  for (const auto& p : q.meta_predicates) field_value(CatalogEntry{}, p.field);

  std::vector<CatalogRecord> out;
  if (q.keywords.empty()) {
    auto begin = records_.begin();
    auto end = records_.end();
    if (q.dataset) {
      auto by_ds = [](const CatalogRecord& r, const std::string& d) { return r.dataset < d; };
      begin = std::lower_bound(records_.begin(), records_.end(), *q.dataset, by_ds);
      end = std::find_if(begin, records_.end(), [&](const CatalogRecord& r) { return r.dataset != *q.dataset; });
    }
    for (auto it = begin; it != end; ++it)
      if (matches_filters(q, *it)) out.push_back(*it);
    return out;
  }

  // Candidate set from the label postings of the expanded classes.
  std::vector<std::size_t> candidates;
  for (const auto& dc : lattice.expand_query(q.keywords)) {
    if (q.dataset && dc.dataset != *q.dataset) continue;
    const auto it = by_label_.find(dc);
    if (it != by_label_.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (auto i : candidates)
    if (matches_filters(q, records_[i])) out.push_back(records_[i]);
  return out;
}

std::map<std::string, DatasetStats> Catalog::stats() const {
  std::map<std::string, DatasetStats> out;
  for (const auto& r : records_) {
    auto& ds = out[r.dataset];
    ++ds.entries;
    ds.bytes += r.entry.bytes;
    for (const auto& l : r.entry.labels) {
      auto& cs = ds.classes[l];
      ++cs.entries;
      cs.bytes += r.entry.bytes;
    }
  }
  return out;
}

const CatalogRecord* Catalog::find(const ArchivePath& p) const {
  const auto it = by_path_.find(p);
  return it == by_path_.end() ? nullptr : &records_[it->second];
}

namespace {

CatalogShard read_shard(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open shard " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return shard_from_json(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace

Catalog load_shards(std::span<const std::string> paths, const Lattice* lattice, unsigned workers) {
  std::vector<CatalogShard> shards(paths.size());
  workers = std::max(1u, workers);
  if (workers == 1 || paths.size() < 2) {
    for (std::size_t i = 0; i < paths.size(); ++i) shards[i] = read_shard(paths[i]);
  } else {
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < std::min<std::size_t>(workers, paths.size()); ++w) {
      jobs.push_back(std::async(std::launch::async, [&] {
        for (std::size_t i; (i = next++) < paths.size();) shards[i] = read_shard(paths[i]);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  return Catalog::from_shards(std::move(shards), lattice);
}

std::vector<std::string> find_shard_files(const std::string& dir) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir);
  for (const auto& de : std::filesystem::directory_iterator(dir)) {
    const auto name = de.path().filename().string();
    if (de.is_regular_file() && name.rfind("content_public_", 0) == 0 && de.path().extension() == ".json")
      out.push_back(de.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace forge
