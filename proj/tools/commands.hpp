#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli_common.hpp"

namespace forge::cli {

struct IndexArgs {
  std::string dir;
  std::string descriptor;
  std::size_t max_per_shard = kDefaultMaxEntriesPerShard;
  std::uint64_t archive_bytes = 0;  // 0: library default
};

struct FilterArgs {
  std::vector<std::string> keywords;
  std::string dataset;
  std::string genre;
  std::string from, to;
  std::vector<std::string> where;
};

struct QueryArgs {
  FilterArgs filter;
  bool count = false;
};

struct FetchArgs {
  FilterArgs filter;
  std::vector<std::string> paths;
  bool force = false;
};

struct HarmonizeArgs {
  std::string dataset;
  std::string descriptor;  // defaults to the copy stored with the catalog
  std::size_t max_per_shard = kDefaultMaxEntriesPerShard;
  bool skip_difficult = false;
};

struct FuseArgs {
  std::string recipe;
  bool materialize = false;
  std::vector<std::string> externals;  // ID=path
  bool split = false;
  bool no_stratify = false;
  std::size_t kfold = 0;
  std::optional<double> sigma;
};

struct AugmentArgs {
  std::string manifest;
};

struct SplitArgs {
  std::string manifest;
  std::size_t kfold = 0;
  bool no_stratify = false;
};

struct EvaluateArgs {
  std::vector<std::string> refs;
  std::vector<std::string> preds;
  std::string manifest;
  std::string pred_dir;
  std::string remap;
  std::uint32_t factor = 1;
  std::vector<std::string> exclude;
};

int cmd_index(const Config& c, const IndexArgs& a);
int cmd_query(const Config& c, const QueryArgs& a);
int cmd_fetch(const Config& c, const FetchArgs& a);
int cmd_harmonize(const Config& c, const HarmonizeArgs& a);
int cmd_fuse(const Config& c, const FuseArgs& a);
int cmd_augment(const Config& c, const AugmentArgs& a);
int cmd_split(const Config& c, const SplitArgs& a);
int cmd_evaluate(const Config& c, const EvaluateArgs& a);

/// Builds the catalog query shared by query and fetch.
Query build_query(const FilterArgs& f);

/// Directory name used for a dataset inside catalogs and archive roots.
std::string dataset_dir_name(const std::string& dataset);

}  // namespace forge::cli
