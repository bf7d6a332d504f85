#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "forge/range_reader.hpp"

namespace forge {

inline constexpr std::uint64_t kDefaultArchiveBytes = std::uint64_t{1} << 30;

struct PackInput {
  std::string name;
  std::uint64_t bytes = 0;
};

struct ArchiveGroup {
  std::string archive;
  std::vector<PackInput> members;  // sorted by name
  std::uint64_t bytes = 0;
  bool oversized = false;  // a single member larger than the target
};

struct PackPlan {
  std::uint64_t target_archive_bytes = kDefaultArchiveBytes;
  std::vector<ArchiveGroup> groups;
  std::map<std::string, std::string> manifest;  // member -> archive

  bool has_oversized() const;
};

/// First-fit-decreasing over (bytes desc, name asc). Archives are named
/// `<prefix>_<NNNN>.zip` in bin-opening order.
PackPlan pack(std::span<const PackInput> files, std::uint64_t target_archive_bytes = kDefaultArchiveBytes,
              const std::string& prefix = "archive");

/// True for formats that are already compressed and should be stored as is.
bool is_precompressed(const std::string& name);

using ContentSource = std::function<Bytes(const std::string& member)>;

/// Writes every group of the plan into `out_dir` and returns the archive paths.
std::vector<std::filesystem::path> write_archives(const PackPlan& plan, const ContentSource& contents,
                                                  const std::filesystem::path& out_dir, bool force_zip64 = false);

std::string manifest_to_json(const std::map<std::string, std::string>& manifest);
std::map<std::string, std::string> manifest_from_json(const std::string& text);

/// Reads members below an archive root (directory or http:// URL). Each
/// archive's directory is read once and cached; safe for concurrent use.
class ArchiveStore {
 public:
  explicit ArchiveStore(std::string root);
  ~ArchiveStore();

  const std::string& root() const noexcept { return root_; }
  /// A member of `archive`, or the loose file `member` when `archive` is empty.
  Bytes fetch(const std::string& archive, const std::string& member) const;

 private:
  struct Impl;
  std::string root_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace forge
