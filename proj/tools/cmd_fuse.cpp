#include <iostream>

#include "commands.hpp"
#include "forge/archive.hpp"
#include "forge/error.hpp"
#include "forge/fuse.hpp"
#include "forge/raster_io.hpp"

namespace forge::cli {

namespace {

using ojson = nlohmann::ordered_json;

FusedDataset load_fused(const std::string& path) {
  const auto data = read_file(path);
  return fused_from_json(std::string(data.begin(), data.end()));
}

std::vector<ExternalLayer> load_externals(const FusionRecipe& r, const std::vector<std::string>& specs,
                                          Provenance& prov) {
  std::map<std::string, std::string> given;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw UsageError("--external expects ID=path, got '" + s + "'");
    if (!given.emplace(s.substr(0, eq), s.substr(eq + 1)).second)
      throw UsageError("--external " + s.substr(0, eq) + " given twice");
  }
  std::vector<ExternalLayer> out;
  for (const auto& src : r.mask_sources) {
    const auto it = given.find(src.id);
    if (it == given.end()) throw UsageError("mask source " + src.id + " needs --external " + src.id + "=<raster>");
    prov.input(it->second);
    auto raster = decode_raster(read_file(it->second));
    if (!raster.georef) throw ValidationError("external raster " + it->second + " has no georeference");
    out.push_back({src, std::move(raster)});
    given.erase(it);
  }
  if (!given.empty()) throw UsageError("--external " + given.begin()->first + " is not a mask source of the recipe");
  return out;
}

void summary(const Config& c, const FusedDataset& d, const fs::path& manifest) {
  std::size_t masks = 0;
  for (const auto& s : d.samples) masks += s.mask ? 1 : 0;
  if (c.format == "json") {
    ojson j{{"manifest", manifest.string()}, {"samples", d.samples.size()}, {"masks", masks}};
    if (d.split) j["split"] = {d.split->train.size(), d.split->val.size(), d.split->test.size()};
    std::cout << j.dump() << "\n";
    return;
  }
  std::cout << d.samples.size() << " sample(s), " << masks << " with masks";
  if (d.split)
    std::cout << "; split " << d.split->train.size() << "/" << d.split->val.size() << "/" << d.split->test.size();
  std::cout << " -> " << manifest.string() << "\n";
}

void add_split(FusedDataset& d, std::uint64_t seed, bool stratify, std::size_t k) {
  auto s = split_80_10_10(d.samples, seed, stratify);
  if (k > 0) s.folds = kfold(d.samples, k, seed).folds;
  d.split = std::move(s);
}

}  // namespace

int cmd_fuse(const Config& c, const FuseArgs& a) {
  if (c.out.empty()) throw UsageError("fuse needs --out <dir>");
  if (a.kfold == 1) throw UsageError("--kfold needs at least 2 folds");
  const auto recipe = load_recipe(a.recipe);
  const auto lattice = load_lattice_for(c);
  const auto catalog = load_catalog(c, lattice);
  Provenance prov(c, "fuse");
  prov.input(a.recipe);
  if (!c.lattice.empty()) prov.input(c.lattice);
  for (const auto& f : catalog_shard_files(c)) prov.input(f);

  auto d = apply_recipe(catalog, lattice, recipe, c.seed);
  if (a.split || a.kfold) add_split(d, c.seed, !a.no_stratify, a.kfold);
  if (recipe.augment) d = augment(d);

  const fs::path out(c.out);
  fs::create_directories(out);
  if (a.materialize) {
    MaterializeOptions opt;
    opt.workers = c.workers;
    opt.sigma = a.sigma;
    opt.externals = load_externals(recipe, a.externals, prov);
    const ArchiveStore store(archive_root(c));
    const auto rep = materialize(d, [&](const ArchivePath& p) { return store.fetch(p.archive, p.member); }, out.string(),
                                 opt);
    for (const auto& w : rep.warnings) {
      prov.warning(w);
      std::cerr << "warning: " << w << "\n";
    }
    prov.set("patches", rep.patches);
    prov.set("masks", rep.masks);
  } else if (!a.externals.empty()) {
    throw UsageError("--external only applies with --materialize");
  }

  const auto manifest = out / "fused.json";
  write_text(manifest, fused_to_json(d));
  prov.output(manifest);
  prov.set("generator", kGeneratorName);
  prov.set("draws", d.draws);
  prov.write(out / "provenance.json");
  summary(c, d, manifest);
  return kExitOk;
}

int cmd_augment(const Config& c, const AugmentArgs& a) {
  if (c.out.empty()) throw UsageError("augment needs --out <file>");
  const auto d = augment(load_fused(a.manifest));
  write_text(c.out, fused_to_json(d));
  Provenance prov(c, "augment");
  prov.input(a.manifest);
  prov.output(c.out);
  prov.set("samples", d.samples.size());
  prov.write(provenance_path_for(c.out, false));
  summary(c, d, c.out);
  return kExitOk;
}

int cmd_split(const Config& c, const SplitArgs& a) {
  if (c.out.empty()) throw UsageError("split needs --out <file>");
  if (a.kfold == 1) throw UsageError("--kfold needs at least 2 folds");
  auto d = load_fused(a.manifest);
  add_split(d, c.seed, !a.no_stratify, a.kfold);
  write_text(c.out, fused_to_json(d));
  Provenance prov(c, "split");
  prov.input(a.manifest);
  prov.output(c.out);
  prov.write(provenance_path_for(c.out, false));
  summary(c, d, c.out);
  return kExitOk;
}

}  // namespace forge::cli
