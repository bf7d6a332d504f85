#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace forge {

/// Pixel-to-map transform in the GDAL geotransform layout:
///   x = c[0] + col * c[1] + row * c[2]
///   y = c[3] + col * c[4] + row * c[5]
/// where (col, row) address pixel corners, so a pixel centre is at (col + 0.5, row + 0.5).
struct Affine {
  std::array<double, 6> c{0.0, 1.0, 0.0, 0.0, 0.0, 1.0};

  std::pair<double, double> apply(double col, double row) const {
    return {c[0] + col * c[1] + row * c[2], c[3] + col * c[4] + row * c[5]};
  }
  /// Throws ValidationError for a singular transform.
  Affine inverse() const;
  /// Transform of the same footprint resampled to a grid scaled by (row_scale, col_scale)
  /// in pixel count, e.g. 120->64 gives 120/64 larger pixels.
  Affine rescaled(double row_factor, double col_factor) const;

  friend bool operator==(const Affine&, const Affine&) = default;
};

struct Georef {
  Affine transform;
  std::optional<std::uint32_t> epsg;
  friend bool operator==(const Georef&, const Georef&) = default;
};

/// Single-band 8-bit class-id grid. Id 0 is background; every other id that
/// occurs must be named in `class_map`.
struct LabelMask {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> values;  // row-major
  std::map<std::uint8_t, std::string> class_map;
  std::optional<std::uint8_t> nodata;
  std::optional<Georef> georef;

  static LabelMask zeros(std::uint32_t rows, std::uint32_t cols) {
    LabelMask m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(std::size_t(rows) * cols, 0);
    return m;
  }

  std::uint8_t& at(std::uint32_t r, std::uint32_t c) { return values[std::size_t(r) * cols + c]; }
  std::uint8_t at(std::uint32_t r, std::uint32_t c) const { return values[std::size_t(r) * cols + c]; }

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// Multi-band numeric grid, stored band-sequential.
struct RasterPatch {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t bands = 0;
  std::vector<double> values;
  std::uint32_t dtype_bits = 16;
  std::optional<double> nodata;
  std::optional<Georef> georef;
  std::vector<std::string> band_names;

  static RasterPatch filled(std::uint32_t rows, std::uint32_t cols, std::uint32_t bands, double v = 0.0) {
    RasterPatch p;
    p.rows = rows;
    p.cols = cols;
    p.bands = bands;
    p.values.assign(std::size_t(rows) * cols * bands, v);
    return p;
  }

  std::size_t plane() const { return std::size_t(rows) * cols; }
  double& at(std::uint32_t b, std::uint32_t r, std::uint32_t c) { return values[b * plane() + std::size_t(r) * cols + c]; }
  double at(std::uint32_t b, std::uint32_t r, std::uint32_t c) const {
    return values[b * plane() + std::size_t(r) * cols + c];
  }
  std::span<double> band(std::uint32_t b) { return {values.data() + b * plane(), plane()}; }
  std::span<const double> band(std::uint32_t b) const { return {values.data() + b * plane(), plane()}; }

  bool is_nodata(double v) const { return nodata && v == *nodata; }

  friend bool operator==(const RasterPatch&, const RasterPatch&) = default;
};

}  // namespace forge
