#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/catalog.hpp"
#include "forge/grid.hpp"
#include "forge/range_reader.hpp"
#include "forge/schema.hpp"

namespace forge {

struct PixelPoint {
  double x = 0;  // column axis, pixel-corner coordinates
  double y = 0;  // row axis
};

/// Oriented box from a DOTA-style txt line.
struct ObbAnnotation {
  std::array<PixelPoint, 4> vertices;
  std::string class_name;
  bool difficult = false;
};

/// Axis-aligned box in the raster's map coordinates.
struct GeoBoxAnnotation {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  std::uint32_t class_id = 0;
};

struct RleRun {
  std::uint64_t start = 0;  // 1-indexed, column-major
  std::uint64_t length = 0;
  friend bool operator==(const RleRun&, const RleRun&) = default;
};

struct RleAnnotation {
  std::vector<RleRun> runs;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  friend bool operator==(const RleAnnotation&, const RleAnnotation&) = default;
};

/// Column-major, 1-indexed runs set to 1. Throws ValidationError naming the
/// run index on unsorted, overlapping or out-of-range runs.
LabelMask decode_rle(const RleAnnotation& a);
/// Maximal runs of a binary (0/1) mask. Throws ValidationError otherwise.
RleAnnotation encode_rle(const LabelMask& m);

/// "start length start length ..." as found in the EncodedPixels column.
RleAnnotation parse_rle(std::string_view encoded, std::uint32_t rows, std::uint32_t cols);
std::string format_rle(const RleAnnotation& a);

struct Rasterized {
  LabelMask mask;
  std::vector<std::string> warnings;
};

/// Fills each quadrilateral with its class id using the pixel-centre rule
/// (even-odd, half-open on the upper edge). Later annotations overwrite
/// earlier ones. `class_map` maps id to name; every class must be present, matched
/// ignoring case and treating `-` and `_` as spaces.
Rasterized rasterize_obb(std::span<const ObbAnnotation> anns, std::uint32_t rows, std::uint32_t cols,
                         const std::map<std::uint8_t, std::string>& class_map);

/// Boxes are taken through the inverse transform into pixel space and filled
/// as in rasterize_obb. The mask inherits `georef`.
Rasterized geoboxes_to_mask(std::span<const GeoBoxAnnotation> anns, std::uint32_t rows, std::uint32_t cols,
                            const Georef& georef, const std::map<std::uint8_t, std::string>& class_map);

/// DOTA txt: `x1 y1 x2 y2 x3 y3 x4 y4 class [difficulty]` per line. Leading
/// `imagesource:` and `gsd:` lines are skipped.
std::vector<ObbAnnotation> parse_dota(std::string_view text);

/// Feature collection with bbox geometries. The box is the feature's `bbox`
/// member or the bounds of its geometry coordinates; the class id comes from
/// `properties.type_id` or `properties.class_id`. When `image_id` is given,
/// only features whose `properties.image_id` equals it are kept.
std::vector<GeoBoxAnnotation> parse_geojson_boxes(std::string_view text,
                                                  const std::optional<std::string>& image_id = std::nullopt);

/// `ImageId,EncodedPixels` rows grouped by image; rows with empty pixels
/// contribute no runs.
std::map<std::string, std::vector<std::string>> parse_rle_csv(std::string_view text);

struct HarmonizeOptions {
  /// Class names in id order (id = position + 1); defaults to the
  /// descriptor's class names.
  std::vector<std::string> class_names;
  bool include_difficult = true;
  /// Georeference of the image, needed for geojson boxes.
  std::optional<Georef> georef;
};

struct HarmonizeResult {
  LabelMask mask;
  CatalogEntry mask_entry;
  Bytes encoded;
  std::vector<std::string> warnings;
};

/// `<stem>_mask` with the mask container extension.
std::string mask_member_name(const std::string& image_member, const LabelMask& m);

/// Converts one image's raw annotation according to the dataset's class
/// definition format and describes the result as a new mask entry.
HarmonizeResult harmonize_entry(const DatasetDescriptor& dataset, const CatalogEntry& entry, const Bytes& raw,
                                const HarmonizeOptions& options = {});

}  // namespace forge
