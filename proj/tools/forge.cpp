#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "forge/error.hpp"

using namespace forge::cli;

namespace {

void common_flags(CLI::App* sub, Config& c) {
  sub->add_option("--catalog", c.catalogs, "Catalog directory (repeatable)");
  sub->add_option("--lattice", c.lattice, "Semantic lattice document (default: built in)");
  sub->add_option("--archive-root", c.archive_root, "Archive root directory or http:// URL (env FORGE_ARCHIVE_ROOT)");
  sub->add_option("--workers", c.workers, "Worker threads")->check(CLI::Range(1u, 1024u));
  sub->add_option_function<std::uint64_t>(
      "--seed",
      [&c](const std::uint64_t& s) {
        c.seed = s;
        c.seed_given = true;
      },
      "Seed for every random draw");
  sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"table", "json"}));
  sub->add_option("--out", c.out, "Output file or directory");
}

void filter_flags(CLI::App* sub, FilterArgs& f) {
  sub->add_option("keywords", f.keywords, "Keywords expanded through the semantic lattice");
  sub->add_option("--dataset", f.dataset, "Restrict to one dataset");
  sub->add_option("--genre", f.genre, "image, mask or metadata");
  sub->add_option("--from", f.from, "Earliest timestamp (RFC 3339 or YYYY-MM-DD)");
  sub->add_option("--to", f.to, "Latest timestamp (RFC 3339 or YYYY-MM-DD)");
  sub->add_option("--where", f.where, "Metadata predicate such as rows>=64 (repeatable)");
}

const char* error_kind(const forge::Error& e) {
  if (dynamic_cast<const forge::ParseError*>(&e)) return "parse";
  if (dynamic_cast<const forge::ValidationError*>(&e)) return "validation";
  if (dynamic_cast<const forge::StructureError*>(&e)) return "structure";
  if (dynamic_cast<const forge::LookupError*>(&e)) return "lookup";
  if (dynamic_cast<const forge::FormatError*>(&e)) return "format";
  if (dynamic_cast<const forge::IoError*>(&e)) return "io";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Catalog, harmonize and fuse satellite-image training sets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FORGE_VERSION);

  Config cfg;
  for (int i = 1; i < argc; ++i) cfg.argv.emplace_back(argv[i]);

  IndexArgs index;
  auto* s_index = app.add_subcommand("index", "Index a dataset directory into shards and archives");
  common_flags(s_index, cfg);
  s_index->add_option("dir", index.dir, "Dataset directory")->required();
  s_index->add_option("--descriptor", index.descriptor, "Dataset descriptor")->required();
  s_index->add_option("--max-per-shard", index.max_per_shard, "Entries per shard");
  s_index->add_option("--archive-bytes", index.archive_bytes, "Target archive size in bytes");

  QueryArgs query;
  auto* s_query = app.add_subcommand("query", "List catalog entries matching a query");
  common_flags(s_query, cfg);
  filter_flags(s_query, query.filter);
  s_query->add_flag("--count", query.count, "Print the number of matches only");

  FetchArgs fetch;
  auto* s_fetch = app.add_subcommand("fetch", "Extract matching files from the archives");
  common_flags(s_fetch, cfg);
  filter_flags(s_fetch, fetch.filter);
  s_fetch->add_option("--path", fetch.paths, "archive!member or loose member path (repeatable)");
  s_fetch->add_flag("--force", fetch.force, "Overwrite existing files");

  HarmonizeArgs harm;
  auto* s_harm = app.add_subcommand("harmonize", "Convert a dataset's annotations into label masks");
  common_flags(s_harm, cfg);
  s_harm->add_option("--dataset", harm.dataset, "Dataset name")->required();
  s_harm->add_option("--descriptor", harm.descriptor, "Descriptor (default: the one stored with the catalog)");
  s_harm->add_option("--max-per-shard", harm.max_per_shard, "Entries per shard");
  s_harm->add_flag("--skip-difficult", harm.skip_difficult, "Leave out boxes flagged difficult");

  FuseArgs fuse;
  auto* s_fuse = app.add_subcommand("fuse", "Assemble a blended training set from a recipe");
  common_flags(s_fuse, cfg);
  s_fuse->add_option("--recipe", fuse.recipe, "Recipe document")->required();
  s_fuse->add_flag("--materialize", fuse.materialize, "Write patches and masks under --out");
  s_fuse->add_option("--external", fuse.externals, "ID=raster for a recipe mask source (repeatable)");
  s_fuse->add_flag("--split", fuse.split, "Add an 80/10/10 split");
  s_fuse->add_flag("--no-stratify", fuse.no_stratify, "Split without stratifying by label");
  s_fuse->add_option("--kfold", fuse.kfold, "Also assign k folds");
  s_fuse->add_option_function<double>("--sigma", [&fuse](const double& s) { fuse.sigma = s; },
                                      "Gaussian sigma for resizing (default: per-axis from the scale)");

  AugmentArgs aug;
  auto* s_aug = app.add_subcommand("augment", "Add rotated and flipped variants to a fused manifest");
  common_flags(s_aug, cfg);
  s_aug->add_option("--manifest", aug.manifest, "Fused manifest")->required();

  SplitArgs split;
  auto* s_split = app.add_subcommand("split", "Assign an 80/10/10 split (and optional folds) to a fused manifest");
  common_flags(s_split, cfg);
  s_split->add_option("--manifest", split.manifest, "Fused manifest")->required();
  s_split->add_option("--kfold", split.kfold, "Also assign k folds");
  s_split->add_flag("--no-stratify", split.no_stratify, "Split without stratifying by label");

  EvaluateArgs eval;
  auto* s_eval = app.add_subcommand("evaluate", "Score predicted label masks against references");
  common_flags(s_eval, cfg);
  s_eval->add_option("--ref", eval.refs, "Reference mask (repeatable, paired with --pred)");
  s_eval->add_option("--pred", eval.preds, "Predicted mask (repeatable)");
  s_eval->add_option("--manifest", eval.manifest, "Fused manifest whose masks are the references");
  s_eval->add_option("--pred-dir", eval.pred_dir, "Directory of predicted masks named like the reference masks");
  s_eval->add_option("--remap", eval.remap, "Class mapping applied to the predictions");
  s_eval->add_option("--factor", eval.factor, "Mode-upscaling factor from prediction to reference grid");
  s_eval->add_option("--exclude", eval.exclude, "Reference class left out of scoring (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*s_index) return cmd_index(cfg, index);
    if (*s_query) return cmd_query(cfg, query);
    if (*s_fetch) return cmd_fetch(cfg, fetch);
    if (*s_harm) return cmd_harmonize(cfg, harm);
    if (*s_fuse) return cmd_fuse(cfg, fuse);
    if (*s_aug) return cmd_augment(cfg, aug);
    if (*s_split) return cmd_split(cfg, split);
    if (*s_eval) return cmd_evaluate(cfg, eval);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const forge::Error& e) {
    std::cerr << "error: " << error_kind(e) << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: unexpected: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
