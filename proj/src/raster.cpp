#include "forge/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "forge/error.hpp"

namespace forge {

Affine Affine::inverse() const {
  const double det = c[1] * c[5] - c[2] * c[4];
  if (det == 0.0 || !std::isfinite(det)) throw ValidationError("affine transform is singular");
  Affine inv;
  inv.c[1] = c[5] / det;
  inv.c[2] = -c[2] / det;
  inv.c[4] = -c[4] / det;
  inv.c[5] = c[1] / det;
  inv.c[0] = -(inv.c[1] * c[0] + inv.c[2] * c[3]);
  inv.c[3] = -(inv.c[4] * c[0] + inv.c[5] * c[3]);
  return inv;
}

Affine Affine::rescaled(double row_factor, double col_factor) const {
  Affine out = *this;
  out.c[1] *= col_factor;
  out.c[4] *= col_factor;
  out.c[2] *= row_factor;
  out.c[5] *= row_factor;
  return out;
}

namespace {

void check_dims(std::uint32_t rows, std::uint32_t cols) {
  if (rows == 0 || cols == 0) throw ValidationError("raster dimensions must be positive");
}

std::optional<Georef> rescale_georef(const std::optional<Georef>& g, double row_factor, double col_factor) {
  if (!g) return std::nullopt;
  return Georef{g->transform.rescaled(row_factor, col_factor), g->epsg};
}

// Weighted mean of (value, weight) pairs anchored at a reference value so that
// constant input reproduces exactly.
struct Acc {
  double ref = 0, sum = 0, weight = 0;
  bool anchored = false;
  void anchor(double v) {
    ref = v;
    anchored = true;
  }
  void add(double v, double w) {
    if (w <= 0) return;
    if (!anchored) {
      ref = v;
      anchored = true;
    }
    sum += w * (v - ref);
    weight += w;
  }
  double value() const { return ref + sum / weight; }
};

struct Sample {
  std::size_t lo, hi;
  double t;
};

// Output centre o maps to continuous source index (o + 0.5) * in / out - 0.5.
std::vector<Sample> bilinear_taps(std::uint32_t in, std::uint32_t out) {
  std::vector<Sample> taps(out);
  const double scale = double(in) / double(out);
  for (std::uint32_t o = 0; o < out; ++o) {
    double x = (o + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, double(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(x));
    const auto hi = std::min<std::size_t>(lo + 1, in - 1);
    taps[o] = {lo, hi, x - double(lo)};
  }
  return taps;
}

double lerp(double a, double b, double t) { return t == 0.0 ? a : a + t * (b - a); }

}  // namespace

double default_sigma(std::uint32_t in, std::uint32_t out) {
  check_dims(in, out);
  return 0.5 * double(in) / double(out);
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ValidationError("sigma must be a finite non-negative number");
  if (sigma == 0) return {1.0};
  const auto radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  for (auto& v : k) v /= total;
  return k;
}

RasterPatch gaussian_blur(const RasterPatch& p, double sigma_rows, double sigma_cols) {
  check_dims(p.rows, p.cols);
  const auto kr = gaussian_kernel(sigma_rows);
  const auto kc = gaussian_kernel(sigma_cols);
  const int rr = static_cast<int>(kr.size() / 2);
  const int rc = static_cast<int>(kc.size() / 2);
  const int rows = static_cast<int>(p.rows);
  const int cols = static_cast<int>(p.cols);

  RasterPatch out = p;
  std::vector<double> hv(p.plane()), hw(p.plane());
  for (std::uint32_t b = 0; b < p.bands; ++b) {
    const auto src = p.band(b);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        Acc acc;
        const double centre = src[std::size_t(r) * cols + c];
        if (!p.is_nodata(centre)) acc.anchor(centre);
        for (int j = -rc; j <= rc; ++j) {
          const int cc = std::clamp(c + j, 0, cols - 1);
          const double v = src[std::size_t(r) * cols + cc];
          if (!p.is_nodata(v)) acc.add(v, kc[j + rc]);
        }
        const auto i = std::size_t(r) * cols + c;
        hw[i] = acc.weight;
        hv[i] = acc.weight > 0 ? acc.value() : 0.0;
      }
    }
    auto dst = out.band(b);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        Acc acc;
        const auto centre = std::size_t(r) * cols + c;
        if (hw[centre] > 0) acc.anchor(hv[centre]);
        for (int j = -rr; j <= rr; ++j) {
          const auto i = std::size_t(std::clamp(r + j, 0, rows - 1)) * cols + c;
          acc.add(hv[i], kr[j + rr] * hw[i]);
        }
        dst[centre] = acc.weight > 0 ? acc.value() : *p.nodata;
      }
    }
  }
  return out;
}

RasterPatch gaussian_bilinear_resize(const RasterPatch& p, std::uint32_t out_rows, std::uint32_t out_cols,
                                     std::optional<double> sigma) {
  check_dims(p.rows, p.cols);
  check_dims(out_rows, out_cols);
  if (out_rows > p.rows || out_cols > p.cols)
    throw ValidationError("gaussian_bilinear_resize only downsizes (" + std::to_string(p.rows) + "x" +
                          std::to_string(p.cols) + " -> " + std::to_string(out_rows) + "x" +
                          std::to_string(out_cols) + ")");
  const auto blurred = gaussian_blur(p, sigma.value_or(default_sigma(p.rows, out_rows)),
                                     sigma.value_or(default_sigma(p.cols, out_cols)));
  const auto ty = bilinear_taps(p.rows, out_rows);
  const auto tx = bilinear_taps(p.cols, out_cols);

  RasterPatch out = RasterPatch::filled(out_rows, out_cols, p.bands);
  out.dtype_bits = p.dtype_bits;
  out.nodata = p.nodata;
  out.band_names = p.band_names;
  out.georef = rescale_georef(p.georef, double(p.rows) / out_rows, double(p.cols) / out_cols);

  for (std::uint32_t b = 0; b < p.bands; ++b) {
    const auto src = blurred.band(b);
    auto dst = out.band(b);
    for (std::uint32_t r = 0; r < out_rows; ++r) {
      const auto& y = ty[r];
      for (std::uint32_t c = 0; c < out_cols; ++c) {
        const auto& x = tx[c];
        const double a = src[y.lo * p.cols + x.lo], bb = src[y.lo * p.cols + x.hi];
        const double cc = src[y.hi * p.cols + x.lo], d = src[y.hi * p.cols + x.hi];
        const bool all_valid = !(p.is_nodata(a) || p.is_nodata(bb) || p.is_nodata(cc) || p.is_nodata(d));
        if (all_valid) {
          dst[std::size_t(r) * out_cols + c] = lerp(lerp(a, bb, x.t), lerp(cc, d, x.t), y.t);
          continue;
        }
        Acc acc;
        const std::array<std::pair<double, double>, 4> taps = {{{a, (1 - x.t) * (1 - y.t)},
                                                                 {bb, x.t * (1 - y.t)},
                                                                 {cc, (1 - x.t) * y.t},
                                                                 {d, x.t * y.t}}};
        for (const auto& [v, w] : taps)
          if (!p.is_nodata(v)) acc.add(v, w);
        dst[std::size_t(r) * out_cols + c] = acc.weight > 0 ? acc.value() : *p.nodata;
      }
    }
  }
  return out;
}

LabelMask nearest_resample(const LabelMask& m, std::uint32_t out_rows, std::uint32_t out_cols) {
  check_dims(m.rows, m.cols);
  check_dims(out_rows, out_cols);
  auto index = [](std::uint32_t o, std::uint32_t in, std::uint32_t out) {
    return static_cast<std::uint32_t>(((2 * std::uint64_t(o) + 1) * in) / (2 * std::uint64_t(out)));
  };
  LabelMask out = LabelMask::zeros(out_rows, out_cols);
  out.class_map = m.class_map;
  out.nodata = m.nodata;
  out.georef = rescale_georef(m.georef, double(m.rows) / out_rows, double(m.cols) / out_cols);
  for (std::uint32_t r = 0; r < out_rows; ++r) {
    const auto sr = index(r, m.rows, out_rows);
    for (std::uint32_t c = 0; c < out_cols; ++c) out.at(r, c) = m.at(sr, index(c, m.cols, out_cols));
  }
  return out;
}

LabelMask mode_upscale(const LabelMask& m, std::uint32_t factor) {
  if (factor < 1) throw ValidationError("mode_upscale factor must be at least 1");
  check_dims(m.rows, m.cols);
  const std::uint32_t rows = (m.rows + factor - 1) / factor;
  const std::uint32_t cols = (m.cols + factor - 1) / factor;
  LabelMask out = LabelMask::zeros(rows, cols);
  out.class_map = m.class_map;
  out.nodata = m.nodata;
  out.georef = rescale_georef(m.georef, factor, factor);

  std::array<std::uint32_t, 256> counts{};
  for (std::uint32_t br = 0; br < rows; ++br) {
    for (std::uint32_t bc = 0; bc < cols; ++bc) {
      counts.fill(0);
      const auto r_end = std::min(m.rows, (br + 1) * factor);
      const auto c_end = std::min(m.cols, (bc + 1) * factor);
      for (auto r = br * factor; r < r_end; ++r)
        for (auto c = bc * factor; c < c_end; ++c) {
          const auto v = m.at(r, c);
          if (m.nodata && v == *m.nodata) continue;
          ++counts[v];
        }
      int best = -1;
      for (int id = 0; id < 256; ++id)
        if (counts[id] > 0 && (best < 0 || counts[id] > counts[best])) best = id;
      out.at(br, bc) = best < 0 ? *m.nodata : static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

RasterPatch select_bands(const RasterPatch& p, std::span<const std::string> names) {
  std::vector<std::uint32_t> idx;
  for (const auto& n : names) {
    const auto it = std::find(p.band_names.begin(), p.band_names.end(), n);
    if (it == p.band_names.end()) throw LookupError("unknown band '" + n + "'");
    idx.push_back(static_cast<std::uint32_t>(it - p.band_names.begin()));
  }
  RasterPatch out = p;
  out.bands = static_cast<std::uint32_t>(idx.size());
  out.band_names.assign(names.begin(), names.end());
  out.values.resize(out.plane() * out.bands);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto src = p.band(idx[k]);
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(k * out.plane()));
  }
  return out;
}

ClipResult clip_to_footprint(const RasterPatch& source, const Georef& footprint, std::uint32_t rows,
                             std::uint32_t cols, Resampling method) {
  check_dims(rows, cols);
  check_dims(source.rows, source.cols);
  if (!source.georef) throw ValidationError("clip_to_footprint: source has no georeference");
  if (source.georef->epsg != footprint.epsg) {
    auto code = [](const std::optional<std::uint32_t>& e) { return e ? "EPSG:" + std::to_string(*e) : "unknown"; };
    throw ValidationError("clip_to_footprint: CRS mismatch (" + code(source.georef->epsg) + " vs " +
                          code(footprint.epsg) + "); reprojection is not supported");
  }
  const double fill = source.nodata.value_or(0.0);
  ClipResult res;
  auto& out = res.patch;
  out = RasterPatch::filled(rows, cols, source.bands, fill);
  out.dtype_bits = source.dtype_bits;
  out.nodata = fill;
  out.band_names = source.band_names;
  out.georef = footprint;

  const auto to_src = source.georef->transform.inverse();
  auto snap = [](double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
  };
  std::size_t covered = 0;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const auto [x, y] = footprint.transform.apply(c + 0.5, r + 0.5);
      const auto [sc, sr] = to_src.apply(x, y);
      if (!(sc >= 0 && sr >= 0 && sc < source.cols && sr < source.rows)) continue;
      ++covered;
      if (method == Resampling::Nearest) {
        const auto ic = static_cast<std::uint32_t>(sc);
        const auto ir = static_cast<std::uint32_t>(sr);
        for (std::uint32_t b = 0; b < source.bands; ++b) out.at(b, r, c) = source.at(b, ir, ic);
        continue;
      }
      const double u = std::clamp(snap(sc - 0.5), 0.0, double(source.cols - 1));
      const double v = std::clamp(snap(sr - 0.5), 0.0, double(source.rows - 1));
      const auto c0 = static_cast<std::uint32_t>(u), r0 = static_cast<std::uint32_t>(v);
      const auto c1 = std::min(c0 + 1, source.cols - 1), r1 = std::min(r0 + 1, source.rows - 1);
      const double tx = u - c0, ty = v - r0;
      for (std::uint32_t b = 0; b < source.bands; ++b) {
        const double a = source.at(b, r0, c0), bb = source.at(b, r0, c1);
        const double cc = source.at(b, r1, c0), d = source.at(b, r1, c1);
        if (!(source.is_nodata(a) || source.is_nodata(bb) || source.is_nodata(cc) || source.is_nodata(d))) {
          out.at(b, r, c) = lerp(lerp(a, bb, tx), lerp(cc, d, tx), ty);
          continue;
        }
        Acc acc;
        const std::array<std::pair<double, double>, 4> taps = {
            {{a, (1 - tx) * (1 - ty)}, {bb, tx * (1 - ty)}, {cc, (1 - tx) * ty}, {d, tx * ty}}};
        for (const auto& [val, w] : taps)
          if (!source.is_nodata(val)) acc.add(val, w);
        out.at(b, r, c) = acc.weight > 0 ? acc.value() : fill;
      }
    }
  }
  if (covered == 0) res.warnings.push_back("footprint does not intersect the source extent; output is all nodata");
  else if (covered < std::size_t(rows) * cols)
    res.warnings.push_back("footprint only partly covered by the source (" + std::to_string(covered) + " of " +
                           std::to_string(std::size_t(rows) * cols) + " pixels)");
  return res;
}

std::vector<BandStats> band_stats(const RasterPatch& p) {
  std::vector<BandStats> out;
  for (std::uint32_t b = 0; b < p.bands; ++b) {
    BandStats s;
    s.name = b < p.band_names.size() ? p.band_names[b] : "band" + std::to_string(b + 1);
    double sum = 0, sq = 0;
    for (const double v : p.band(b)) {
      if (p.is_nodata(v)) continue;
      if (s.count == 0) s.min = s.max = v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      sum += v;
      ++s.count;
    }
    if (s.count > 0) {
      s.mean = sum / s.count;
      for (const double v : p.band(b))
        if (!p.is_nodata(v)) sq += (v - s.mean) * (v - s.mean);
      s.stddev = std::sqrt(sq / s.count);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace forge
