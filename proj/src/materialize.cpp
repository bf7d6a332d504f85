#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <set>

#include "forge/error.hpp"
#include "forge/fuse.hpp"
#include "forge/raster.hpp"
#include "forge/raster_io.hpp"

namespace forge {

namespace {

namespace fs = std::filesystem;

std::string safe_name(const std::string& id) {
  std::string out;
  for (const char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_' ||
                    c == '.';
    out += ok ? c : '_';
  }
  return out;
}

void write_bytes(const fs::path& p, const Bytes& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("cannot write " + p.string());
}

Variant sample_variant(const FusedSample& s) {
  for (auto it = s.transforms.rbegin(); it != s.transforms.rend(); ++it)
    for (const auto v : kAllVariants)
      if (*it == to_string(v)) return v;
  return Variant::Identity;
}

struct Outcome {
  ArchivePath patch;
  std::optional<ArchivePath> mask;
  std::vector<std::string> warnings;
};

Outcome process(const FusedSample& s, const FusedDataset& d, const std::string& stem, const MemberSource& source,
                const fs::path& out_dir, const MaterializeOptions& opt) {
  Outcome o;
  auto patch = decode_raster(source(s.patch));
  if (!d.bands.empty()) {
    if (!patch.band_names.empty()) patch = select_bands(patch, d.bands);
    else if (patch.bands != d.bands.size())
      throw ValidationError("patch has " + std::to_string(patch.bands) + " unnamed bands; cannot select " +
                            std::to_string(d.bands.size()));
  }
  if (patch.rows != d.rows || patch.cols != d.cols) patch = gaussian_bilinear_resize(patch, d.rows, d.cols, opt.sigma);
  const auto footprint = patch.georef;
  const auto variant = sample_variant(s);
  patch = apply_variant(patch, variant);
  const auto patch_rel = "patches/" + stem + ".tif";
  write_bytes(out_dir / patch_rel, encode_tiff(patch));
  o.patch = {"", patch_rel};

  std::optional<LabelMask> mask;
  if (s.mask) {
    auto m = decode_mask(source(*s.mask));
    if (m.rows != d.rows || m.cols != d.cols) m = nearest_resample(m, d.rows, d.cols);
    mask = std::move(m);
  } else if (!opt.externals.empty()) {
    if (!footprint) {
      o.warnings.push_back(s.id + ": patch has no georeference; no mask produced");
    } else {
      auto pair = three_class_mask(*footprint, d.rows, d.cols, opt.externals);
      for (auto& w : pair.warnings) o.warnings.push_back(s.id + ": " + w);
      mask = std::move(pair.mask);
    }
  }
  if (mask) {
    const auto m = apply_variant(*mask, variant);
    const auto mask_rel = "masks/" + stem + "_mask" + mask_extension(m);
    write_bytes(out_dir / mask_rel, encode_mask(m));
    o.mask = ArchivePath{"", mask_rel};
  }
  return o;
}

}  // namespace

MaterializeReport materialize(FusedDataset& d, const MemberSource& source, const std::string& out_dir,
                              const MaterializeOptions& options) {
  const fs::path root(out_dir);
  fs::create_directories(root / "patches");
  fs::create_directories(root / "masks");

  // File stems are fixed up front so the result does not depend on scheduling.
  std::vector<std::string> stems;
  std::set<std::string> taken;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& sm = d.samples[i];
    auto base = fs::path(sm.source.member).replace_extension().generic_string();
    if (const auto hash = sm.id.rfind('#'); hash != std::string::npos) base += "_" + sm.id.substr(hash + 1);
    auto stem = safe_name(sm.dataset + "/" + base);
    if (!taken.insert(stem).second) {
      stem += "_" + std::to_string(i);
      taken.insert(stem);
    }
    stems.push_back(std::move(stem));
  }

  std::vector<Outcome> outcomes(d.samples.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::optional<std::string> first_error;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= d.samples.size()) return;
      try {
        outcomes[i] = process(d.samples[i], d, stems[i], source, root, options);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = d.samples[i].id + ": " + e.what();
        next = d.samples.size();
      }
    }
  };
  const unsigned n = std::max(1u, options.workers);
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < n; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();
  if (first_error) throw Error("materialize: " + *first_error);

  MaterializeReport rep;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    auto& s = d.samples[i];
    s.patch = outcomes[i].patch;
    s.mask = outcomes[i].mask;
    ++rep.patches;
    if (s.mask) ++rep.masks;
    rep.warnings.insert(rep.warnings.end(), outcomes[i].warnings.begin(), outcomes[i].warnings.end());
  }
  return rep;
}

}  // namespace forge
