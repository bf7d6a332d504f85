#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "forge/grid.hpp"
#include "forge/range_reader.hpp"

namespace forge {

enum class ImageFormat { Tiff, Png };

std::optional<ImageFormat> sniff_format(const Bytes& data);

struct JpegHeader {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t components = 0;
  std::uint32_t precision = 0;
};

/// Frame header of a JPEG stream (first SOFn marker). Pixel data is not decoded.
std::optional<JpegHeader> probe_jpeg(const Bytes& data);

/// Uncompressed, band-sequential TIFF. 8 and 16 bit patches are written as
/// unsigned integers, 32 bit as float. Georeferenced patches carry GeoTIFF
/// tags (pixel scale + tiepoint, or a full model transformation when rotated,
/// and the EPSG code). Band names, class map and nodata ride along as JSON in
/// ImageDescription; nodata is also written as GDAL_NODATA.
Bytes encode_tiff(const RasterPatch& p);
/// Reads strip-organised, uncompressed TIFFs of either byte order.
RasterPatch decode_tiff(const Bytes& data);

/// Gray, gray+alpha, RGB or RGBA PNG from a 1-4 band patch at 8 or 16 bits.
/// Metadata goes in a `forge` tEXt chunk.
Bytes encode_png(const RasterPatch& p);
RasterPatch decode_png(const Bytes& data);

RasterPatch decode_raster(const Bytes& data);

/// Masks are single-band 8 bit: GeoTIFF when georeferenced, PNG otherwise.
Bytes encode_mask(const LabelMask& m);
LabelMask decode_mask(const Bytes& data);
std::string mask_extension(const LabelMask& m);

RasterPatch mask_to_patch(const LabelMask& m);
/// Throws ValidationError when the patch is not a single band of integers in 0..255.
LabelMask patch_to_mask(const RasterPatch& p);

/// Encoded class map, e.g. {"1":"water"}; kept separate so masks in other
/// containers can reuse it.
std::string class_map_to_json(const std::map<std::uint8_t, std::string>& m);
std::map<std::uint8_t, std::string> class_map_from_json(const std::string& text);

}  // namespace forge
