#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <iostream>
#include <set>

#include "commands.hpp"
#include "forge/archive.hpp"
#include "forge/error.hpp"
#include "forge/raster_io.hpp"
#include "forge/schema.hpp"
#include "forge/text.hpp"

namespace forge::cli {

namespace {

using json = nlohmann::json;

const std::set<std::string> kRasterExt = {".tif", ".tiff", ".png", ".jpg", ".jpeg"};
const std::set<std::string> kMaskDirs = {"gt", "mask", "masks"};

struct Scanned {
  std::string rel;
  std::optional<CatalogEntry> entry;
  std::string reject;
};

struct Sidecar {
  std::vector<std::string> labels;
  std::optional<Timestamp> timestamp;
};

// BigEarthNet writes "2017-06-13 10:10:32" without a zone.
std::optional<Timestamp> parse_loose_time(std::string s) {
  if (s.size() >= 19 && s[10] == ' ') s[10] = 'T';
  if (s.size() == 19) s += "Z";
  try {
    return parse_rfc3339(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<Sidecar> find_sidecar(const fs::path& file) {
  const auto dir = file.parent_path();
  const auto stem = file.stem().string();
  for (const auto& name : {stem + "_labels_metadata.json", dir.filename().string() + "_labels_metadata.json",
                           stem + ".json"}) {
    const auto p = dir / name;
    if (!fs::is_regular_file(p)) continue;
    const auto data = read_file(p);
    const auto j = json::parse(data.begin(), data.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    Sidecar s;
    if (const auto it = j.find("labels"); it != j.end() && it->is_array())
      for (const auto& l : *it)
        if (l.is_string()) s.labels.push_back(l.get<std::string>());
    for (const auto* key : {"acquisition_date", "timestamp"})
      if (const auto it = j.find(key); it != j.end() && it->is_string()) s.timestamp = parse_loose_time(it->get<std::string>());
    return s;
  }
  return std::nullopt;
}

Scanned scan_file(const fs::path& root, const std::string& rel, const DatasetDescriptor& desc) {
  Scanned out{rel, std::nullopt, {}};
  const fs::path path = root / rel;
  Bytes data;
  try {
    data = read_file(path);
  } catch (const Error& e) {
    out.reject = e.what();
    return out;
  }
  if (data.empty()) {
    out.reject = "empty file";
    return out;
  }

  CatalogEntry e;
  e.path = {"", rel};
  e.bytes = data.size();
  const auto ext = text::lower(path.extension().string());
  const auto stem = path.stem().string();
  const bool raster = kRasterExt.count(ext) != 0;
  const bool in_mask_dir = path.has_parent_path() && kMaskDirs.count(text::lower(path.parent_path().filename().string()));
  e.genre = !raster ? Genre::Metadata : (stem.ends_with("_mask") || in_mask_dir) ? Genre::Mask : Genre::Image;

  if (raster) {
    try {
      if (ext == ".jpg" || ext == ".jpeg") {
        const auto h = probe_jpeg(data);
        if (!h) throw FormatError("no JPEG frame header");
        e.meta.bands = h->components;
        e.meta.rows = h->rows;
        e.meta.cols = h->cols;
        e.meta.dtype_bits = h->precision;
      } else {
        // TODO: header-only TIFF/PNG probe; large scenes are decoded in full just for their shape.
        const auto p = decode_raster(data);
        e.meta.bands = p.bands;
        e.meta.rows = p.rows;
        e.meta.cols = p.cols;
        e.meta.dtype_bits = p.dtype_bits;
        e.meta.nodata = p.nodata;
        if (p.georef) {
          e.meta.epsg = p.georef->epsg;
          const auto& t = p.georef->transform.c;
          if (t[2] == 0.0 && t[4] == 0.0 && std::abs(t[1]) == std::abs(t[5])) e.meta.resolution_m = std::abs(t[1]);
        }
        if (e.genre == Genre::Mask) {
          const auto m = decode_mask(data);
          std::set<std::uint8_t> present(m.values.begin(), m.values.end());
          for (const auto v : present)
            if (const auto it = m.class_map.find(v); it != m.class_map.end() && !(m.nodata && v == *m.nodata))
              e.labels.push_back(it->second);
          std::sort(e.labels.begin(), e.labels.end());
        }
      }
    } catch (const Error& err) {
      out.reject = std::string("unreadable raster: ") + err.what();
      return out;
    }
  }

  if (e.genre == Genre::Image) {
    const auto* naming = std::get_if<NamingConvention>(&desc.usage.naming_convention);
    const auto* format = std::get_if<ClassDefinitionFormat>(&desc.scope.class_definition_format);
    if (naming && *naming == NamingConvention::PerClass) {
      if (fs::path(rel).has_parent_path()) e.labels.push_back(fs::path(rel).parent_path().filename().string());
    } else if ((naming && *naming == NamingConvention::PerFile) || (format && *format == ClassDefinitionFormat::JsonTags)) {
      if (const auto side = find_sidecar(path)) {
        e.labels = side->labels;
        e.timestamp = side->timestamp;
      }
    }
  }
  out.entry = std::move(e);
  return out;
}

std::vector<std::string> walk(const fs::path& root) {
  std::vector<std::string> out;
  for (const auto& de : fs::recursive_directory_iterator(root)) {
    if (de.is_directory()) continue;
    out.push_back(fs::relative(de.path(), root).generic_string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string dataset_dir_name(const std::string& dataset) {
  std::string out;
  for (const char c : dataset) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                    c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

int cmd_index(const Config& c, const IndexArgs& a) {
  if (c.catalogs.size() != 1) throw UsageError("index writes to exactly one --catalog directory");
  if (!fs::is_directory(a.dir)) throw UsageError("dataset directory not found: " + a.dir);
  if (a.max_per_shard < 1) throw UsageError("--max-per-shard must be at least 1");
  const auto desc = load_descriptor(a.descriptor);
  const auto root = archive_root(c);
  const auto ds_dir = dataset_dir_name(desc.name);
  Provenance prov(c, "index");
  prov.input(a.descriptor);

  const fs::path src(a.dir);
  const auto files = walk(src);
  std::vector<Scanned> scanned(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < files.size();) scanned[i] = scan_file(src, files[i], desc);
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < c.workers; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();

  std::vector<CatalogEntry> entries;
  std::vector<std::pair<std::string, std::string>> rejects;
  for (auto& s : scanned) {
    if (s.entry) entries.push_back(std::move(*s.entry));
    else rejects.emplace_back(s.rel, s.reject);
  }

  // Entries that fail their own invariants never reach an archive.
  std::vector<CatalogEntry> valid;
  for (auto& e : entries) {
    if (auto why = check_entry(e)) rejects.emplace_back(e.path.member, *why);
    else valid.push_back(std::move(e));
  }

  std::vector<PackInput> inputs;
  for (const auto& e : valid) inputs.push_back({e.path.member, e.bytes});
  const auto plan = pack(inputs, a.archive_bytes ? a.archive_bytes : kDefaultArchiveBytes, ds_dir);
  const fs::path archive_dir = fs::path(root) / ds_dir;
  fs::create_directories(archive_dir);
  const auto written = write_archives(plan, [&](const std::string& m) { return read_file(src / m); }, archive_dir);
  for (const auto& w : written) prov.output(w);
  std::map<std::string, std::string> manifest;
  for (auto& e : valid) {
    e.path.archive = ds_dir + "/" + plan.manifest.at(e.path.member);
    manifest[e.path.member] = e.path.archive;
  }
  write_text(archive_dir / "archives.json", manifest_to_json(manifest));
  prov.output(archive_dir / "archives.json");

  const auto build = build_index(desc.name, valid, a.max_per_shard);
  const fs::path cat_dir = fs::path(c.catalogs.front()) / ds_dir;
  fs::create_directories(cat_dir);
  for (const auto& old : find_shard_files(cat_dir.string())) fs::remove(old);
  for (const auto& shard : build.shards) {
    const auto p = cat_dir / shard_file_name(shard.shard_index);
    write_text(p, shard_to_json(shard));
    prov.output(p);
  }
  write_text(cat_dir / "descriptor.desc", serialize_descriptor(desc));
  prov.output(cat_dir / "descriptor.desc");

  std::sort(rejects.begin(), rejects.end());
  auto rj = nlohmann::ordered_json::array();
  for (const auto& [path, reason] : rejects) rj.push_back({{"path", path}, {"reason", reason}});
  write_text(cat_dir / "rejects.json", rj.dump(2) + "\n");
  prov.output(cat_dir / "rejects.json");
  for (const auto& [path, reason] : rejects) prov.warning("rejected " + path + ": " + reason);
  prov.set("dataset", desc.name);
  prov.set("entries", valid.size());
  prov.set("shards", build.shards.size());
  prov.set("archives", plan.groups.size());
  prov.write(cat_dir / "provenance.json");

  if (plan.has_oversized())
    std::cerr << "warning: some members exceed the archive target and were given archives of their own\n";
  for (const auto& [path, reason] : rejects) std::cerr << "rejected " << path << ": " << reason << "\n";
  std::cout << "indexed " << valid.size() << " entries of " << desc.name << " into " << build.shards.size()
            << " shard(s) and " << plan.groups.size() << " archive(s); " << rejects.size() << " rejected\n";
  return rejects.empty() ? kExitOk : kExitPartial;
}

}  // namespace forge::cli
