#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/catalog.hpp"
#include "forge/grid.hpp"
#include "forge/lattice.hpp"
#include "forge/metrics.hpp"
#include "forge/range_reader.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// randomness

/// SplitMix64 finaliser, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// mt19937_64 with portable bounded draws (rejection sampling), so the same
/// seed gives the same sequence on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Uniform in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

inline constexpr const char* kGeneratorName = "mt19937_64";

// ---------------------------------------------------------------------------
// recipes

struct Enrichment {
  std::string dataset;
  std::vector<std::string> classes;
  std::size_t count = 0;
  std::string target;
  std::optional<std::uint64_t> seed;
  friend bool operator==(const Enrichment&, const Enrichment&) = default;
};

enum class MaskSemantics { Water, BuiltUp };

std::string to_string(MaskSemantics s);

/// An external raster layer and the values that flag its class.
struct MaskSource {
  std::string id;
  MaskSemantics semantics = MaskSemantics::Water;
  std::vector<double> positive_values;
  friend bool operator==(const MaskSource&, const MaskSource&) = default;
};

struct FusionRecipe {
  std::string backbone;
  std::vector<Enrichment> enrichments;
  std::vector<MaskSource> mask_sources;
  ClassMapping remap;  // empty means identity
  bool augment = false;
  std::vector<std::string> bands;  // empty keeps all
  std::optional<std::uint32_t> rows, cols;
  friend bool operator==(const FusionRecipe&, const FusionRecipe&) = default;
};

/// Line-oriented recipe document:
///
///   backbone: EuroSAT
///   size: 64x64
///   bands: B02, B03, B04, B08
///   enrich: <dataset> | <class>, <class> | <count> | <target> [| <seed>]
///   mask-source: <id> | water|built-up | <value>, <value>
///   remap: <class> -> <class>
///   augment: yes|no
///
/// List items may be double-quoted when they contain commas.
FusionRecipe parse_recipe(std::string_view text);
std::string serialize_recipe(const FusionRecipe& r);
FusionRecipe load_recipe(const std::string& path);

/// `a, b -> target` lines; the target is taken verbatim. `#` starts a comment.
ClassMapping parse_class_mapping(std::string_view text);
ClassMapping load_class_mapping(const std::string& path);

// ---------------------------------------------------------------------------
// fused datasets

struct FusedSample {
  std::string id;
  std::string dataset;
  ArchivePath patch;
  std::optional<ArchivePath> mask;
  std::vector<std::string> labels;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  // provenance
  ArchivePath source;
  std::vector<std::string> source_labels;
  std::string origin;  // "backbone" or "enrichment <k>"
  std::vector<std::string> transforms;
  friend bool operator==(const FusedSample&, const FusedSample&) = default;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<std::string> train, val, test;
  std::vector<std::vector<std::string>> folds;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

struct FusedDataset {
  std::string backbone;
  std::uint64_t seed = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::string> bands;
  std::vector<std::string> draws;  // one line per enrichment: seed, pool and drawn sizes
  std::vector<FusedSample> samples;
  std::optional<SplitAssignment> split;
  friend bool operator==(const FusedDataset&, const FusedDataset&) = default;
};

/// Backbone images plus, for each enrichment in order, `count` images drawn
/// uniformly without replacement from the entries of `dataset` carrying any
/// of `classes` and not drawn before. Throws LookupError for classes that
/// are not lattice leaves and ValidationError when a pool is too small or a
/// label is left unmapped by a non-empty remap.
FusedDataset apply_recipe(const Catalog& catalog, const Lattice& lattice, const FusionRecipe& recipe,
                          std::uint64_t seed);

/// Pointwise substitution. Throws ValidationError naming unmapped labels.
std::vector<std::string> remap_classes(std::span<const std::string> labels, const ClassMapping& mapping);
/// Renames classes of a mask; classes that merge share the smallest new id,
/// and id 0 stays 0.
LabelMask remap_classes(const LabelMask& mask, const ClassMapping& mapping);

enum class Variant { Identity, Rot90, Rot180, Rot270, FlipLR, FlipUD };

inline constexpr std::array<Variant, 6> kAllVariants = {Variant::Identity, Variant::Rot90,  Variant::Rot180,
                                                        Variant::Rot270,   Variant::FlipLR, Variant::FlipUD};

std::string to_string(Variant v);
Variant parse_variant(std::string_view s);

/// Rotations are counter-clockwise. Square inputs only for rotations.
LabelMask apply_variant(const LabelMask& m, Variant v);
RasterPatch apply_variant(const RasterPatch& p, Variant v);

/// Six variants per sample, in kAllVariants order. The identity keeps the
/// sample id; the others get `#<variant>` appended. A split, when present,
/// carries over to the variants. Throws ValidationError on non-square samples.
FusedDataset augment(const FusedDataset& d);

/// Largest-remainder 80/10/10 per stratum (the first label). Throws
/// ValidationError naming a stratum with fewer than 10 samples when stratifying.
SplitAssignment split_80_10_10(std::span<const FusedSample> samples, std::uint64_t seed, bool stratify = true);

/// k folds whose sizes differ by at most one.
SplitAssignment kfold(std::span<const FusedSample> samples, std::size_t k, std::uint64_t seed);

/// Three-class ids used in combined masks.
inline constexpr std::uint8_t kClassOther = 0;
inline constexpr std::uint8_t kClassWater = 1;
inline constexpr std::uint8_t kClassBuiltUp = 2;

std::map<std::uint8_t, std::string> three_class_map();

struct ExternalLayer {
  MaskSource source;
  RasterPatch raster;  // georeferenced
};

struct MaskPair {
  LabelMask mask;
  std::vector<std::string> warnings;
};

/// Clips every layer to the footprint (nearest) and combines them: water
/// where a water layer flags water, built-up where a built-up layer flags it,
/// water on conflict, other elsewhere. Uncovered pixels count as other and
/// raise a coverage warning.
MaskPair three_class_mask(const Georef& footprint, std::uint32_t rows, std::uint32_t cols,
                          std::span<const ExternalLayer> layers);

std::string fused_to_json(const FusedDataset& d);
FusedDataset fused_from_json(std::string_view text);

// ---------------------------------------------------------------------------
// materialisation

using MemberSource = std::function<Bytes(const ArchivePath&)>;

struct MaterializeOptions {
  std::vector<ExternalLayer> externals;
  unsigned workers = 1;
  std::optional<double> sigma;
};

struct MaterializeReport {
  std::size_t patches = 0;
  std::size_t masks = 0;
  std::vector<std::string> warnings;
};

/// Writes every sample's patch (band selection, resize, variant) as GeoTIFF
/// under `out_dir/patches` and its mask under `out_dir/masks`, then points the
/// sample's refs at those loose files. Masks come from the sample's mask ref
/// (nearest-resampled) or, when external layers are given, from
/// three_class_mask on the patch footprint.
MaterializeReport materialize(FusedDataset& d, const MemberSource& source, const std::string& out_dir,
                              const MaterializeOptions& options = {});

}  // namespace forge
