// Generates the synthetic mini-dataset used by the end-to-end test and the
// README walkthrough, and perturbed predictions for a fused manifest.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "forge/archive.hpp"
#include "forge/fuse.hpp"
#include "forge/harmonize.hpp"
#include "forge/raster_io.hpp"

namespace fs = std::filesystem;
using namespace forge;

namespace {

constexpr std::uint32_t kEpsg = 32633;
constexpr double kX0 = 500000.0;
constexpr double kY0 = 5000000.0;

const std::vector<std::string> kEuroSatClasses = {
    "annual crop", "forest",   "herbaceous vegetation",  "highway",   "industrial buildings",
    "pasture",     "permanent crop", "residential buildings", "river", "sea & lake"};

const std::vector<std::string> kEuroSatBands = {"B01", "B02", "B03", "B04", "B05", "B06", "B07",
                                                "B08", "B8A", "B09", "B10", "B11", "B12"};
const std::vector<std::string> kBigEarthBands = {"B01", "B02", "B03", "B04", "B05", "B06",
                                                 "B07", "B08", "B8A", "B09", "B11", "B12"};

const std::vector<std::string> kBigEarthClasses = {"Annual crops associated with permanent crops",
                                                   "Broad-leaved forest",
                                                   "Coniferous forest",
                                                   "Mixed forest",
                                                   "Coastal lagoons",
                                                   "Sea and ocean",
                                                   "Continuous urban fabric",
                                                   "Discontinuous urban fabric",
                                                   "Pastures"};

bool is_water(const std::string& c) {
  return c == "river" || c == "sea & lake" || c == "Coastal lagoons" || c == "Sea and ocean";
}
bool is_built(const std::string& c) {
  return c == "industrial buildings" || c == "residential buildings" || c == "Continuous urban fabric" ||
         c == "Discontinuous urban fabric";
}

void write_bytes(const fs::path& p, const Bytes& b) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_text(const fs::path& p, const std::string& s) { write_bytes(p, Bytes(s.begin(), s.end())); }

Bytes read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Georef north_up(double x, double y, double res) { return Georef{Affine{{x, res, 0.0, y, 0.0, -res}}, kEpsg}; }

struct Tile {
  std::string cls;
  double x, y, size;  // upper-left corner and side in metres
};

RasterPatch make_patch(const std::vector<std::string>& bands, std::uint32_t n, const Tile& t, std::size_t class_index,
                       Rng& rng) {
  auto p = RasterPatch::filled(n, n, static_cast<std::uint32_t>(bands.size()));
  p.dtype_bits = 16;
  p.band_names = bands;
  p.georef = north_up(t.x, t.y, t.size / n);
  for (std::uint32_t b = 0; b < p.bands; ++b) {
    const double base = 400.0 + 90.0 * double(class_index) + 35.0 * b;
    for (std::uint32_t r = 0; r < n; ++r)
      for (std::uint32_t c = 0; c < n; ++c)
        p.at(b, r, c) = base + 40.0 * std::sin(0.2 * r + 0.1 * b) + double(rng.below(60));
  }
  return p;
}

// External layers over the whole scene at 20 m.
void write_externals(const fs::path& out, const std::vector<Tile>& tiles, double width, double height) {
  const double res = 20.0;
  const auto cols = static_cast<std::uint32_t>(std::ceil(width / res));
  const auto rows = static_cast<std::uint32_t>(std::ceil(height / res));
  auto gsw = RasterPatch::filled(rows, cols, 1, 1.0);
  auto esm = RasterPatch::filled(rows, cols, 1, 1.0);
  for (auto* p : {&gsw, &esm}) {
    p->dtype_bits = 8;
    p->georef = north_up(kX0, kY0, res);
    p->nodata = 0.0;
  }
  gsw.band_names = {"gsw"};
  esm.band_names = {"esm"};
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const double x = kX0 + (c + 0.5) * res;
      const double y = kY0 - (r + 0.5) * res;
      for (const auto& t : tiles) {
        const double u = (x - t.x) / t.size, v = (t.y - y) / t.size;
        if (u < 0 || u >= 1 || v < 0 || v >= 1) continue;
        if (is_water(t.cls) && v > 0.2) gsw.at(0, r, c) = v > 0.35 ? 3.0 : 2.0;
        if (is_built(t.cls) && (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) < 0.12)
          esm.at(0, r, c) = u < 0.5 ? 255.0 : 250.0;
        // a stream crossing every tile, drawn in both layers so conflicts occur
        if (std::abs(v - 0.1 - 0.05 * std::sin(12.0 * u)) < 0.03) {
          gsw.at(0, r, c) = 3.0;
          if (is_built(t.cls)) esm.at(0, r, c) = 255.0;
        }
      }
    }
  }
  write_bytes(out / "externals" / "gsw.tif", encode_tiff(gsw));
  write_bytes(out / "externals" / "esm.tif", encode_tiff(esm));
}

std::string mini_recipe() {
  return R"(# Miniature of the EuroSAT and BigEarthNet-v1.0 recipe for the bundled synthetic data.
backbone: EuroSAT
size: 64x64
bands: B02, B03, B04, B08
enrich: BigEarthNet-v1.0 | Annual crops associated with permanent crops | 2 | annual crop
enrich: BigEarthNet-v1.0 | Broad-leaved forest, Coniferous forest, Mixed forest | 2 | forest
enrich: BigEarthNet-v1.0 | Coastal lagoons | 2 | water
enrich: BigEarthNet-v1.0 | Sea and ocean | 2 | water
enrich: BigEarthNet-v1.0 | Continuous urban fabric | 1 | built-up
enrich: BigEarthNet-v1.0 | Discontinuous urban fabric | 1 | built-up
mask-source: GSW | water | 2, 3
mask-source: ESM | built-up | 250, 255
remap: industrial buildings -> industrial
remap: residential buildings -> residential
remap: sea & lake -> sea lake
remap: annual crop -> annual crop
remap: permanent crop -> permanent crop
remap: river -> river
remap: herbaceous vegetation -> herbaceous vegetation
remap: highway -> highway
remap: pasture -> pasture
remap: forest -> forest
remap: water -> water
remap: built-up -> built-up
augment: no
)";
}

// A 10-class EuroSAT-style map at 3x the resolution of a FROM-GLC-style reference.
void write_agreement_pair(const fs::path& out, Rng& rng) {
  const std::vector<std::string> fine_names = {"annual crop", "forest", "herbaceous vegetation", "highway", "industrial",
                                               "pasture", "permanent crop", "residential", "river", "sea lake"};
  const std::vector<std::string> coarse_names = {"cropland", "forest", "grassland, shrubland", "impervious surface",
                                                 "water, wetland", "tundra", "bareland", "snow/ice"};
  const std::map<std::string, std::string> to_coarse = {
      {"annual crop", "cropland"},           {"permanent crop", "cropland"},
      {"forest", "forest"},                  {"herbaceous vegetation", "grassland, shrubland"},
      {"pasture", "grassland, shrubland"},   {"highway", "impervious surface"},
      {"industrial", "impervious surface"},  {"residential", "impervious surface"},
      {"river", "water, wetland"},           {"sea lake", "water, wetland"}};
  const std::uint32_t n = 16, f = 3;
  auto coarse = LabelMask::zeros(n, n);
  auto fine = LabelMask::zeros(n * f, n * f);
  for (std::uint8_t i = 0; i < coarse_names.size(); ++i) coarse.class_map[i + 1] = coarse_names[i];
  for (std::uint8_t i = 0; i < fine_names.size(); ++i) fine.class_map[i + 1] = fine_names[i];
  for (std::uint32_t r = 0; r < n * f; ++r)
    for (std::uint32_t c = 0; c < n * f; ++c) fine.at(r, c) = static_cast<std::uint8_t>(1 + ((r / 5 + c / 7) % 10));
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < n; ++c) {
      const auto name = fine.class_map.at(fine.at(r * f + 1, c * f + 1));
      std::uint8_t id = 0;
      for (const auto& [k, v] : coarse.class_map)
        if (v == to_coarse.at(name)) id = k;
      const auto roll = rng.below(10);
      if (roll == 0) id = static_cast<std::uint8_t>(1 + rng.below(8));  // includes the excluded classes
      coarse.at(r, c) = id;
    }
  write_bytes(out / "agreement" / "fine.png", encode_mask(fine));
  write_bytes(out / "agreement" / "coarse.png", encode_mask(coarse));
}

void write_airbus(const fs::path& out, Rng& rng) {
  const std::uint32_t n = 96;
  std::string csv = "ImageId,EncodedPixels\n";
  for (int i = 0; i < 8; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%08x.png", 0x1000 + i * 37);
    auto p = RasterPatch::filled(n, n, 3);
    p.dtype_bits = 8;
    for (auto& v : p.values) v = double(60 + rng.below(40));
    write_bytes(out / "src" / "Airbus-Ship" / "train_v2" / name, encode_png(p));
    const int ships = i % 3;
    if (ships == 0) csv += std::string(name) + ",\n";
    for (int s = 0; s < ships; ++s) {
      auto m = LabelMask::zeros(n, n);
      const auto r0 = static_cast<std::uint32_t>(10 + rng.below(60)), c0 = static_cast<std::uint32_t>(10 + rng.below(60));
      for (std::uint32_t r = r0; r < r0 + 6 + s * 4; ++r)
        for (std::uint32_t c = c0; c < c0 + 14; ++c) m.at(r, c) = 1;
      csv += std::string(name) + "," + format_rle(encode_rle(m)) + "\n";
    }
  }
  write_text(out / "src" / "Airbus-Ship" / "train_ship_segmentations_v2.csv", csv);
}

int make_dataset(const fs::path& out, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 1));
  std::vector<Tile> tiles;

  // EuroSAT: 10 classes x 6 patches of 64x64 at 10 m, on a 10 x 6 grid with 700 m pitch.
  for (std::size_t k = 0; k < kEuroSatClasses.size(); ++k)
    for (int i = 0; i < 6; ++i) {
      const Tile t{kEuroSatClasses[k], kX0 + 700.0 * double(k) + 20.0, kY0 - 700.0 * i - 20.0, 640.0};
      tiles.push_back(t);
      const auto patch = make_patch(kEuroSatBands, 64, t, k, rng);
      const auto& cls = kEuroSatClasses[k];
      write_bytes(out / "src" / "EuroSAT" / cls / (cls + "_" + std::to_string(i + 1) + ".tif"), encode_tiff(patch));
    }

  // BigEarthNet: 9 classes x 3 patches of 120x120 at 10 m, below the EuroSAT block with 1300 m pitch.
  for (std::size_t k = 0; k < kBigEarthClasses.size(); ++k)
    for (int i = 0; i < 3; ++i) {
      const Tile t{kBigEarthClasses[k], kX0 + 1300.0 * double(k) + 50.0, kY0 - 4300.0 - 1300.0 * i, 1200.0};
      tiles.push_back(t);
      char id[64];
      std::snprintf(id, sizeof id, "S2A_MSIL2A_20170613T101031_%02zu_%02d", k, i);
      const auto patch = make_patch(kBigEarthBands, 120, t, k, rng);
      const auto dir = out / "src" / "BigEarthNet-v1.0" / id;
      write_bytes(dir / (std::string(id) + ".tif"), encode_tiff(patch));
      nlohmann::ordered_json meta;
      std::vector<std::string> labels = {t.cls};
      if (k == 1 && i == 0) labels.push_back("Mixed forest");
      meta["labels"] = labels;
      meta["acquisition_date"] = "2017-06-13 10:10:31";
      write_text(dir / (std::string(id) + "_labels_metadata.json"), meta.dump(2) + "\n");
    }

  write_externals(out, tiles, 1300.0 * double(kBigEarthClasses.size()) + 200.0, 4300.0 + 1300.0 * 3 + 200.0);
  write_airbus(out, rng);
  write_agreement_pair(out, rng);
  write_text(out / "mini.recipe", mini_recipe());
  std::cout << "synthetic dataset written to " << out.string() << "\n";
  return 0;
}

// Copies every reference mask of a fused manifest with a deterministic share of pixels relabelled.
int make_predictions(const fs::path& manifest, const fs::path& out, std::uint64_t seed, std::uint32_t flip_per_mille) {
  const auto text = read_bytes(manifest);
  const auto d = fused_from_json(std::string(text.begin(), text.end()));
  const ArchiveStore store(fs::absolute(manifest).parent_path().string());
  std::size_t written = 0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    if (!s.mask) continue;
    auto m = decode_mask(store.fetch(s.mask->archive, s.mask->member));
    std::vector<std::uint8_t> ids;
    for (const auto& [id, name] : m.class_map) ids.push_back(id);
    Rng rng(mix_seed(seed, i));
    if (!ids.empty())
      for (auto& v : m.values)
        if (rng.below(1000) < flip_per_mille) v = ids[rng.below(ids.size())];
    write_bytes(out / fs::path(s.mask->member).filename(), encode_mask(m));
    ++written;
  }
  std::cout << written << " prediction(s) written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic fixtures for the forge pipeline"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  std::string out;

  auto* ds = app.add_subcommand("dataset", "Write the synthetic mini-dataset");
  ds->add_option("out", out, "Output directory")->required();
  ds->add_option("--seed", seed, "Seed");

  std::string manifest;
  std::uint32_t flip = 100;
  auto* pr = app.add_subcommand("predict", "Write perturbed copies of a fused manifest's masks");
  pr->add_option("--manifest", manifest, "Materialised fused manifest")->required();
  pr->add_option("out", out, "Output directory")->required();
  pr->add_option("--seed", seed, "Seed");
  pr->add_option("--flip", flip, "Relabelled pixels per thousand")->check(CLI::Range(0u, 1000u));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ds) return make_dataset(out, seed);
    return make_predictions(manifest, out, seed, flip);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
