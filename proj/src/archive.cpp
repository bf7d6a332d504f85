#include "forge/archive.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/text.hpp"
#include "forge/zip.hpp"

namespace forge {

bool PackPlan::has_oversized() const {
  return std::any_of(groups.begin(), groups.end(), [](const ArchiveGroup& g) { return g.oversized; });
}

PackPlan pack(std::span<const PackInput> files, std::uint64_t target, const std::string& prefix) {
  if (target == 0) throw ValidationError("target archive size must be positive");
  std::set<std::string> seen;
  for (const auto& f : files)
    if (!seen.insert(f.name).second) throw ValidationError("duplicate member name '" + f.name + "'");

  std::vector<PackInput> order(files.begin(), files.end());
  std::sort(order.begin(), order.end(), [](const PackInput& a, const PackInput& b) {
    return a.bytes != b.bytes ? a.bytes > b.bytes : a.name < b.name;
  });

  PackPlan plan;
  plan.target_archive_bytes = target;
  for (auto& f : order) {
    auto bin = std::find_if(plan.groups.begin(), plan.groups.end(), [&](const ArchiveGroup& g) {
      return !g.oversized && f.bytes <= target - g.bytes;
    });
    if (bin == plan.groups.end()) {
      plan.groups.emplace_back();
      bin = std::prev(plan.groups.end());
      bin->oversized = f.bytes > target;
    }
    bin->bytes += f.bytes;
    bin->members.push_back(std::move(f));
  }

  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    auto& g = plan.groups[i];
    char num[16];
    std::snprintf(num, sizeof num, "%04zu", i);
    g.archive = prefix + "_" + num + ".zip";
    std::sort(g.members.begin(), g.members.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    for (const auto& m : g.members) plan.manifest[m.name] = g.archive;
  }
  return plan;
}

bool is_precompressed(const std::string& name) {
  static const std::set<std::string> exts = {".png", ".jpg", ".jpeg", ".jp2", ".gz",  ".zip",
                                             ".webp", ".bz2", ".xz",  ".zst", ".tgz", ".7z"};
  const auto dot = name.rfind('.');
  if (dot == std::string::npos) return false;
  return exts.count(text::lower(name.substr(dot))) > 0;
}

std::vector<std::filesystem::path> write_archives(const PackPlan& plan, const ContentSource& contents,
                                                  const std::filesystem::path& out_dir, bool force_zip64) {
  for (const auto& g : plan.groups)
    if (g.members.empty()) throw ValidationError("archive " + g.archive + " has no members");
  std::filesystem::create_directories(out_dir);

  std::vector<std::filesystem::path> out;
  for (const auto& g : plan.groups) {
    const auto path = out_dir / g.archive;
    ZipWriter zw(path.string(), force_zip64);
    for (const auto& m : g.members) {
      Bytes data;
      try {
        data = contents(m.name);
      } catch (const std::exception& e) {
        throw IoError(g.archive + ": cannot read member " + m.name + ": " + e.what());
      }
      try {
        zw.add(m.name, data, is_precompressed(m.name) ? ZipMethod::Stored : ZipMethod::Deflated);
      } catch (const IoError& e) {
        throw IoError(g.archive + ": " + e.what());
      }
    }
    zw.close();
    out.push_back(path);
  }
  return out;
}

std::string manifest_to_json(const std::map<std::string, std::string>& manifest) {
  return nlohmann::json(manifest).dump(1) + "\n";
}

std::map<std::string, std::string> manifest_from_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text).get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("archive manifest: ") + e.what());
  }
}

struct ArchiveStore::Impl {
  std::mutex mu;
  std::map<std::string, std::shared_ptr<const ZipArchive>> open;
};

ArchiveStore::ArchiveStore(std::string root) : root_(std::move(root)), impl_(std::make_unique<Impl>()) {}
ArchiveStore::~ArchiveStore() = default;

Bytes ArchiveStore::fetch(const std::string& archive, const std::string& member) const {
  if (archive.empty()) {
    const auto reader = open_reader(resolve_uri(root_, member));
    return reader->read(0, static_cast<std::size_t>(reader->size()));
  }
  std::shared_ptr<const ZipArchive> zip;
  {
    std::lock_guard lock(impl_->mu);
    auto& slot = impl_->open[archive];
    if (!slot) slot = std::make_shared<const ZipArchive>(open_reader(resolve_uri(root_, archive)));
    zip = slot;
  }
  try {
    return zip->read(member);
  } catch (const LookupError& e) {
    throw LookupError(archive + ": no member '" + member + "'");
  }
}

}  // namespace forge
