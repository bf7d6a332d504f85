#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forge/grid.hpp"

namespace forge {

/// Default anti-aliasing sigma for a downsize along one axis: half the
/// reduction factor (0.9375 for 120 -> 64).
double default_sigma(std::uint32_t in, std::uint32_t out);

/// Separable Gaussian blur (kernel truncated at ceil(4 sigma), edge-replicate
/// padding, nodata excluded from normalisation) followed by bilinear sampling
/// at output pixel centres. Without `sigma` each axis uses default_sigma.
RasterPatch gaussian_bilinear_resize(const RasterPatch& p, std::uint32_t out_rows, std::uint32_t out_cols,
                                     std::optional<double> sigma = std::nullopt);

/// The blur stage alone, exposed for testing and reuse.
RasterPatch gaussian_blur(const RasterPatch& p, double sigma_rows, double sigma_cols);

/// Normalised 1-D kernel of radius ceil(4 sigma); {1} when sigma is 0.
std::vector<double> gaussian_kernel(double sigma);

/// Every output pixel takes the label of the input pixel whose centre is nearest.
LabelMask nearest_resample(const LabelMask& m, std::uint32_t out_rows, std::uint32_t out_cols);

/// Each factor x factor block becomes its most frequent label; ties go to the
/// smallest id and nodata is not counted. Ragged edges are padded with nodata.
/// A block with nothing but nodata yields nodata.
LabelMask mode_upscale(const LabelMask& m, std::uint32_t factor);

/// Bands reordered to `names`. Throws LookupError naming the first unknown band.
RasterPatch select_bands(const RasterPatch& p, std::span<const std::string> names);

enum class Resampling { Nearest, Bilinear };

struct ClipResult {
  RasterPatch patch;
  std::vector<std::string> warnings;
};

/// Samples `source` on the footprint grid (same CRS only). Pixels whose centre
/// falls outside the source take the source nodata value, or 0 when the source
/// declares none; the result always declares that nodata value.
ClipResult clip_to_footprint(const RasterPatch& source, const Georef& footprint, std::uint32_t rows,
                             std::uint32_t cols, Resampling method);

struct BandStats {
  std::string name;
  std::size_t count = 0;  // valid pixels
  double min = 0, max = 0, mean = 0, stddev = 0;
};

std::vector<BandStats> band_stats(const RasterPatch& p);

}  // namespace forge
