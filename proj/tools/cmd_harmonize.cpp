#include <algorithm>
#include <atomic>
#include <future>
#include <iostream>
#include <mutex>

#include "commands.hpp"
#include "forge/archive.hpp"
#include "forge/error.hpp"
#include "forge/harmonize.hpp"
#include "forge/raster_io.hpp"
#include "forge/schema.hpp"
#include "forge/text.hpp"

namespace forge::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::string stem_of(const std::string& member) { return fs::path(member).stem().string(); }
std::string ext_of(const std::string& member) { return text::lower(fs::path(member).extension().string()); }

struct Job {
  CatalogEntry image;
  std::optional<ArchivePath> annotation;
};

// Locates the annotation of each image for the dataset's class definition format.
std::vector<Job> plan_jobs(const std::vector<CatalogEntry>& entries, ClassDefinitionFormat fmt,
                           std::vector<std::string>& notes) {
  std::map<std::string, std::vector<const CatalogEntry*>> by_stem;
  std::vector<const CatalogEntry*> dataset_level;
  const std::string want = fmt == ClassDefinitionFormat::TxtBbox       ? ".txt"
                           : fmt == ClassDefinitionFormat::GeojsonBbox ? ".geojson"
                           : fmt == ClassDefinitionFormat::CsvRle      ? ".csv"
                                                                        : "";
  for (const auto& e : entries) {
    if (fmt == ClassDefinitionFormat::RasterMask) {
      if (e.genre != Genre::Mask) continue;
      auto s = stem_of(e.path.member);
      if (s.ends_with("_mask")) s.resize(s.size() - 5);
      by_stem[s].push_back(&e);
    } else if (e.genre == Genre::Metadata) {
      const auto ext = ext_of(e.path.member);
      if (ext != want && !(want == ".geojson" && ext == ".json")) continue;
      by_stem[stem_of(e.path.member)].push_back(&e);
      dataset_level.push_back(&e);
    }
  }

  std::vector<Job> jobs;
  for (const auto& e : entries) {
    if (e.genre != Genre::Image) continue;
    Job j{e, std::nullopt};
    const auto it = by_stem.find(stem_of(e.path.member));
    if (it != by_stem.end() && it->second.size() == 1) {
      j.annotation = it->second.front()->path;
    } else if (fmt != ClassDefinitionFormat::TxtBbox && fmt != ClassDefinitionFormat::RasterMask &&
               dataset_level.size() == 1) {
      j.annotation = dataset_level.front()->path;
    }
    if (fmt == ClassDefinitionFormat::RasterMask && j.annotation) {
      const auto expected = stem_of(e.path.member) + "_mask";
      if (stem_of(j.annotation->member) == expected &&
          fs::path(j.annotation->member).parent_path() == fs::path(e.path.member).parent_path()) {
        notes.push_back(e.path.str() + ": mask already in place");
        continue;
      }
    }
    jobs.push_back(std::move(j));
  }
  return jobs;
}

std::string find_descriptor(const Config& c, const std::string& ds_dir) {
  for (const auto& dir : c.catalogs) {
    for (const auto& p : {fs::path(dir) / ds_dir / "descriptor.desc", fs::path(dir) / "descriptor.desc"})
      if (fs::is_regular_file(p)) return p.string();
  }
  throw UsageError("no descriptor stored with the catalog for " + ds_dir + "; pass --descriptor");
}

}  // namespace

int cmd_harmonize(const Config& c, const HarmonizeArgs& a) {
  if (c.catalogs.size() != 1) throw UsageError("harmonize updates exactly one --catalog directory");
  if (a.dataset.empty()) throw UsageError("harmonize needs --dataset");
  const auto ds_dir = dataset_dir_name(a.dataset);
  const fs::path cat_dir = fs::path(c.catalogs.front()) / ds_dir;
  if (!fs::is_directory(cat_dir)) throw UsageError("dataset not indexed in this catalog: " + cat_dir.string());
  const auto desc_path = a.descriptor.empty() ? find_descriptor(c, ds_dir) : a.descriptor;
  const auto desc = load_descriptor(desc_path);
  if (desc.name != a.dataset) throw UsageError("descriptor names '" + desc.name + "', not '" + a.dataset + "'");
  const auto root = archive_root(c);
  const ArchiveStore store(root);

  Provenance prov(c, "harmonize");
  prov.input(desc_path);
  const auto shard_files = find_shard_files(cat_dir.string());
  for (const auto& f : shard_files) prov.input(f);
  std::vector<CatalogShard> shards;
  for (const auto& f : shard_files) {
    const auto data = read_file(f);
    shards.push_back(shard_from_json(std::string(data.begin(), data.end())));
  }
  std::vector<CatalogEntry> entries;
  for (auto& s : shards)
    for (auto& e : s.entries) entries.push_back(std::move(e));

  const auto* fmt = std::get_if<ClassDefinitionFormat>(&desc.scope.class_definition_format);
  if (!fmt) throw ValidationError(desc.name + ": unknown class definition format");
  if (*fmt == ClassDefinitionFormat::FilenameLabel || *fmt == ClassDefinitionFormat::JsonTags) {
    std::cout << desc.name << ": " << to_string(*fmt) << " labels apply to whole patches; no masks to produce\n";
    prov.set("masks", 0);
    prov.write(cat_dir / "harmonize.provenance.json");
    return kExitOk;
  }

  // Outputs of an earlier harmonize run are replaced, not stacked.
  const auto mask_prefix = ds_dir + "_masks";
  const auto previous = ds_dir + "/" + mask_prefix + "_";
  std::erase_if(entries, [&](const CatalogEntry& e) { return e.path.archive.rfind(previous, 0) == 0; });

  std::vector<std::string> notes;
  const auto jobs = plan_jobs(entries, *fmt, notes);
  HarmonizeOptions opt;
  opt.include_difficult = !a.skip_difficult;

  std::map<ArchivePath, Bytes> annotation_cache;
  std::mutex cache_mu;
  auto annotation = [&](const ArchivePath& p) {
    {
      std::lock_guard lock(cache_mu);
      if (const auto it = annotation_cache.find(p); it != annotation_cache.end()) return it->second;
    }
    auto data = store.fetch(p.archive, p.member);
    std::lock_guard lock(cache_mu);
    return annotation_cache.emplace(p, std::move(data)).first->second;
  };

  struct Outcome {
    std::optional<HarmonizeResult> result;
    std::string error;
  };
  std::vector<Outcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
      const auto& job = jobs[i];
      try {
        if (!job.annotation) throw LookupError("no annotation found");
        auto o = opt;
        if (job.image.meta.epsg || *fmt == ClassDefinitionFormat::GeojsonBbox) {
          const auto img = store.fetch(job.image.path.archive, job.image.path.member);
          if (sniff_format(img)) o.georef = decode_raster(img).georef;
        }
        outcomes[i].result = harmonize_entry(desc, job.image, annotation(*job.annotation), o);
      } catch (const Error& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < c.workers; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();

  std::vector<PackInput> inputs;
  std::map<std::string, const Bytes*> content;
  std::vector<CatalogEntry> masks;
  std::vector<std::string> failures;
  std::size_t warnings = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& o = outcomes[i];
    if (!o.result) {
      failures.push_back(jobs[i].image.path.str() + ": " + o.error);
      continue;
    }
    for (const auto& w : o.result->warnings) {
      ++warnings;
      prov.warning(w);
      std::cerr << "warning: " << jobs[i].image.path.str() << ": " << w << "\n";
    }
    if (!content.emplace(o.result->mask_entry.path.member, &o.result->encoded).second) {
      failures.push_back(jobs[i].image.path.str() + ": mask name " + o.result->mask_entry.path.member + " is taken");
      continue;
    }
    inputs.push_back({o.result->mask_entry.path.member, o.result->encoded.size()});
    masks.push_back(o.result->mask_entry);
  }
  for (const auto& e : entries)
    if (content.count(e.path.member))
      failures.push_back(e.path.str() + ": already indexed under the mask name; not replaced");
  std::erase_if(masks, [&](const CatalogEntry& m) {
    return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.path.member == m.path.member; });
  });
  std::erase_if(inputs, [&](const PackInput& in) {
    return std::none_of(masks.begin(), masks.end(), [&](const auto& m) { return m.path.member == in.name; });
  });

  const fs::path archive_dir = fs::path(root) / ds_dir;
  for (const auto& de : fs::directory_iterator(archive_dir)) {
    const auto name = de.path().filename().string();
    if (name.rfind(mask_prefix + "_", 0) == 0 && de.path().extension() == ".zip") fs::remove(de.path());
  }
  const auto plan = pack(inputs, kDefaultArchiveBytes, mask_prefix);
  const auto written = write_archives(plan, [&](const std::string& m) { return *content.at(m); }, archive_dir);
  for (const auto& w : written) prov.output(w);
  for (auto& m : masks) m.path.archive = ds_dir + "/" + plan.manifest.at(m.path.member);

  auto manifest_path = archive_dir / "archives.json";
  std::map<std::string, std::string> manifest;
  if (fs::is_regular_file(manifest_path)) {
    const auto data = read_file(manifest_path);
    manifest = manifest_from_json(std::string(data.begin(), data.end()));
  }
  std::erase_if(manifest, [&](const auto& kv) { return kv.second.rfind(previous, 0) == 0; });
  for (const auto& m : masks) manifest[m.path.member] = m.path.archive;
  write_text(manifest_path, manifest_to_json(manifest));
  prov.output(manifest_path);

  entries.insert(entries.end(), masks.begin(), masks.end());
  std::sort(entries.begin(), entries.end(), [](const auto& x, const auto& y) { return x.path < y.path; });
  const auto build = build_index(desc.name, entries, a.max_per_shard);
  for (const auto& old : shard_files) fs::remove(old);
  for (const auto& shard : build.shards) {
    const auto p = cat_dir / shard_file_name(shard.shard_index);
    write_text(p, shard_to_json(shard));
    prov.output(p);
  }

  for (const auto& f : failures) {
    prov.warning("failed " + f);
    std::cerr << "failed " << f << "\n";
  }
  for (const auto& n : notes) std::cerr << "skipped " << n << "\n";
  prov.set("dataset", desc.name);
  prov.set("format", to_string(*fmt));
  prov.set("masks", masks.size());
  prov.write(cat_dir / "harmonize.provenance.json");

  if (c.format == "json")
    std::cout << ojson{{"dataset", desc.name}, {"masks", masks.size()}, {"failed", failures.size()}, {"warnings", warnings}}
                     .dump()
              << "\n";
  else
    std::cout << "harmonized " << masks.size() << " mask(s) for " << desc.name << "; " << failures.size() << " failed, "
              << warnings << " warning(s)\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

}  // namespace forge::cli
