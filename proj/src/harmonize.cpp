#include "forge/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/raster_io.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

using json = nlohmann::json;

double polygon_area(std::span<const PixelPoint> pts) {
  double a = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

// Even-odd scanline fill at pixel centres. Returns the number of pixels written.
std::size_t fill_polygon(LabelMask& m, std::span<const PixelPoint> pts, std::uint8_t id) {
  double min_y = pts[0].y, max_y = pts[0].y;
  for (const auto& p : pts) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const long r_begin = std::max(0L, static_cast<long>(std::ceil(min_y - 0.5)));
  const long r_end = std::min(static_cast<long>(m.rows), static_cast<long>(std::ceil(max_y - 0.5)));
  std::size_t written = 0;
  std::vector<double> xs;
  for (long r = r_begin; r < r_end; ++r) {
    const double yc = r + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      const auto& q = pts[(i + 1) % pts.size()];
      if ((p.y <= yc && yc < q.y) || (q.y <= yc && yc < p.y)) xs.push_back(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const long c_begin = std::max(0L, static_cast<long>(std::ceil(xs[k] - 0.5)));
      const long c_end = std::min(static_cast<long>(m.cols), static_cast<long>(std::ceil(xs[k + 1] - 0.5)));
      for (long c = c_begin; c < c_end; ++c) {
        m.at(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)) = id;
        ++written;
      }
    }
  }
  return written;
}

bool outside_canvas(std::span<const PixelPoint> pts, std::uint32_t rows, std::uint32_t cols) {
  double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  return max_x <= 0 || max_y <= 0 || min_x >= cols || min_y >= rows;
}

void place(Rasterized& out, std::span<const PixelPoint> pts, std::uint8_t id, std::size_t index) {
  const auto tag = "annotation " + std::to_string(index) + ": ";
  if (!(polygon_area(pts) > 0)) {
    out.warnings.push_back(tag + "degenerate polygon (zero area) skipped");
    return;
  }
  if (outside_canvas(pts, out.mask.rows, out.mask.cols)) {
    out.warnings.push_back(tag + "polygon lies entirely outside the canvas");
    return;
  }
  fill_polygon(out.mask, pts, id);
}

// "storage-tank", "storage_tank" and "Storage Tank" name the same class.
std::string class_key(std::string_view name) {
  auto k = text::lower(name);
  std::replace(k.begin(), k.end(), '-', ' ');
  std::replace(k.begin(), k.end(), '_', ' ');
  return k;
}

std::string basename(const std::string& member) {
  const auto slash = member.find_last_of('/');
  return slash == std::string::npos ? member : member.substr(slash + 1);
}

std::string strip_extension(const std::string& member) {
  const auto slash = member.find_last_of('/');
  const auto dot = member.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return member;
  return member.substr(0, dot);
}

std::uint32_t json_id(const json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto n = v.get<long long>();
    if (n >= 0) return static_cast<std::uint32_t>(n);
  } else if (v.is_string()) {
    if (const auto n = text::parse_number<std::uint32_t>(text::trim(v.get<std::string>()))) return *n;
  }
  throw ParseError("class id is not a non-negative integer: " + v.dump());
}

void collect_points(const json& coords, std::vector<std::pair<double, double>>& out) {
  if (!coords.is_array()) return;
  if (coords.size() >= 2 && coords[0].is_number() && coords[1].is_number()) {
    out.emplace_back(coords[0].get<double>(), coords[1].get<double>());
    return;
  }
  for (const auto& c : coords) collect_points(c, out);
}

}  // namespace

LabelMask decode_rle(const RleAnnotation& a) {
  LabelMask m = LabelMask::zeros(a.rows, a.cols);
  const std::uint64_t n = std::uint64_t(a.rows) * a.cols;
  std::uint64_t next_free = 1;
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const auto& run = a.runs[i];
    const auto tag = "rle run " + std::to_string(i) + ": ";
    if (run.start < 1) throw ValidationError(tag + "start must be 1 or more");
    if (run.length == 0) throw ValidationError(tag + "length must be positive");
    if (run.start < next_free) throw ValidationError(tag + "overlaps or precedes the previous run");
    if (run.length > n || run.start > n - run.length + 1)
      throw ValidationError(tag + "ends past pixel " + std::to_string(n));
    for (std::uint64_t k = run.start - 1; k < run.start - 1 + run.length; ++k) {
      const auto col = static_cast<std::uint32_t>(k / a.rows);
      const auto row = static_cast<std::uint32_t>(k % a.rows);
      m.at(row, col) = 1;
    }
    next_free = run.start + run.length;
  }
  return m;
}

RleAnnotation encode_rle(const LabelMask& m) {
  RleAnnotation a;
  a.rows = m.rows;
  a.cols = m.cols;
  const std::uint64_t n = std::uint64_t(m.rows) * m.cols;
  std::uint64_t run_start = 0;
  bool in_run = false;
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto v = m.at(static_cast<std::uint32_t>(k % m.rows), static_cast<std::uint32_t>(k / m.rows));
    if (v > 1) throw ValidationError("encode_rle needs a binary mask, found value " + std::to_string(v));
    if (v == 1 && !in_run) {
      run_start = k;
      in_run = true;
    } else if (v == 0 && in_run) {
      a.runs.push_back({run_start + 1, k - run_start});
      in_run = false;
    }
  }
  if (in_run) a.runs.push_back({run_start + 1, n - run_start});
  return a;
}

RleAnnotation parse_rle(std::string_view encoded, std::uint32_t rows, std::uint32_t cols) {
  RleAnnotation a;
  a.rows = rows;
  a.cols = cols;
  std::vector<std::uint64_t> nums;
  for (const auto tok : text::split(text::trim(encoded), ' ')) {
    if (tok.empty()) continue;
    const auto v = text::parse_number<std::uint64_t>(tok);
    if (!v) throw ParseError("rle: '" + std::string(tok) + "' is not a count");
    nums.push_back(*v);
  }
  if (nums.size() % 2) throw ParseError("rle: odd number of values");
  for (std::size_t i = 0; i < nums.size(); i += 2) a.runs.push_back({nums[i], nums[i + 1]});
  return a;
}

std::string format_rle(const RleAnnotation& a) {
  std::string out;
  for (const auto& r : a.runs) {
    if (!out.empty()) out += ' ';
    out += std::to_string(r.start) + ' ' + std::to_string(r.length);
  }
  return out;
}

Rasterized rasterize_obb(std::span<const ObbAnnotation> anns, std::uint32_t rows, std::uint32_t cols,
                         const std::map<std::uint8_t, std::string>& class_map) {
  if (rows == 0 || cols == 0) throw ValidationError("mask dimensions must be positive");
  std::map<std::string, std::uint8_t> ids;
  for (const auto& [id, name] : class_map) ids.emplace(class_key(name), id);
  Rasterized out{LabelMask::zeros(rows, cols), {}};
  out.mask.class_map = class_map;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const auto it = ids.find(class_key(anns[i].class_name));
    if (it == ids.end()) throw ValidationError("class '" + anns[i].class_name + "' is not in the class map");
    place(out, anns[i].vertices, it->second, i);
  }
  return out;
}

Rasterized geoboxes_to_mask(std::span<const GeoBoxAnnotation> anns, std::uint32_t rows, std::uint32_t cols,
                            const Georef& georef, const std::map<std::uint8_t, std::string>& class_map) {
  if (rows == 0 || cols == 0) throw ValidationError("mask dimensions must be positive");
  const auto to_pixel = georef.transform.inverse();
  Rasterized out{LabelMask::zeros(rows, cols), {}};
  out.mask.class_map = class_map;
  out.mask.georef = georef;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const auto& b = anns[i];
    if (b.class_id == 0 || b.class_id > 255)
      throw ValidationError("class id " + std::to_string(b.class_id) + " does not fit an 8-bit mask");
    if (!class_map.count(static_cast<std::uint8_t>(b.class_id)))
      throw ValidationError("class id " + std::to_string(b.class_id) + " is not in the class map");
    std::array<PixelPoint, 4> pts;
    const std::array<std::pair<double, double>, 4> corners = {
        {{b.min_x, b.min_y}, {b.max_x, b.min_y}, {b.max_x, b.max_y}, {b.min_x, b.max_y}}};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto [c, r] = to_pixel.apply(corners[k].first, corners[k].second);
      pts[k] = {c, r};
    }
    place(out, pts, static_cast<std::uint8_t>(b.class_id), i);
  }
  return out;
}

std::vector<ObbAnnotation> parse_dota(std::string_view doc) {
  std::vector<ObbAnnotation> out;
  std::size_t line_no = 0;
  for (const auto raw : text::split(doc, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    if (line.rfind("imagesource:", 0) == 0 || line.rfind("gsd:", 0) == 0) continue;
    std::vector<std::string_view> tok;
    for (const auto t : text::split(line, ' '))
      if (!t.empty()) tok.push_back(t);
    if (tok.size() != 9 && tok.size() != 10)
      throw ParseError("expected 8 coordinates, a class and an optional difficulty", line_no);
    ObbAnnotation a;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto x = text::parse_number<double>(tok[2 * k]);
      const auto y = text::parse_number<double>(tok[2 * k + 1]);
      if (!x || !y) throw ParseError("coordinate is not a number", line_no);
      a.vertices[k] = {*x, *y};
    }
    a.class_name = std::string(tok[8]);
    if (tok.size() == 10) {
      const auto d = text::parse_number<int>(tok[9]);
      if (!d || (*d != 0 && *d != 1)) throw ParseError("difficulty must be 0 or 1", line_no);
      a.difficult = *d == 1;
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<GeoBoxAnnotation> parse_geojson_boxes(std::string_view doc, const std::optional<std::string>& image_id) {
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("geojson: ") + e.what());
  }
  if (!j.is_object() || !j.contains("features") || !j["features"].is_array())
    throw ParseError("geojson: expected a FeatureCollection with a features array");
  std::vector<GeoBoxAnnotation> out;
  std::size_t index = 0;
  for (const auto& f : j["features"]) {
    const auto tag = "geojson feature " + std::to_string(index++) + ": ";
    const auto& props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : json::object();
    if (image_id && props.contains("image_id") && props["image_id"].is_string() &&
        props["image_id"].get<std::string>() != *image_id)
      continue;
    GeoBoxAnnotation b;
    try {
      if (props.contains("type_id")) b.class_id = json_id(props["type_id"]);
      else if (props.contains("class_id")) b.class_id = json_id(props["class_id"]);
      else throw ParseError("no type_id or class_id property");
    } catch (const ParseError& e) {
      throw ParseError(tag + e.what());
    }
    if (f.contains("bbox") && f["bbox"].is_array() && f["bbox"].size() >= 4) {
      const auto& bb = f["bbox"];
      const std::size_t half = bb.size() / 2;
      b.min_x = bb[0].get<double>();
      b.min_y = bb[1].get<double>();
      b.max_x = bb[half].get<double>();
      b.max_y = bb[half + 1].get<double>();
    } else {
      std::vector<std::pair<double, double>> pts;
      if (f.contains("geometry") && f["geometry"].is_object() && f["geometry"].contains("coordinates"))
        collect_points(f["geometry"]["coordinates"], pts);
      if (pts.empty()) throw ParseError(tag + "no bbox and no geometry coordinates");
      b.min_x = b.max_x = pts[0].first;
      b.min_y = b.max_y = pts[0].second;
      for (const auto& [x, y] : pts) {
        b.min_x = std::min(b.min_x, x);
        b.max_x = std::max(b.max_x, x);
        b.min_y = std::min(b.min_y, y);
        b.max_y = std::max(b.max_y, y);
      }
    }
    out.push_back(b);
  }
  return out;
}

std::map<std::string, std::vector<std::string>> parse_rle_csv(std::string_view doc) {
  std::map<std::string, std::vector<std::string>> out;
  std::size_t line_no = 0;
  std::optional<std::size_t> id_col, px_col;
  for (const auto raw : text::split(doc, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    const auto cells = text::split_trimmed(line, ',');
    if (!id_col) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == "ImageId") id_col = i;
        if (cells[i] == "EncodedPixels") px_col = i;
      }
      if (!id_col || !px_col) throw ParseError("csv header must name ImageId and EncodedPixels", line_no);
      continue;
    }
    if (cells.size() <= std::max(*id_col, *px_col) && cells.size() != *id_col + 1)
      throw ParseError("too few columns", line_no);
    auto& runs = out[cells[*id_col]];
    if (*px_col < cells.size() && !cells[*px_col].empty()) runs.push_back(cells[*px_col]);
  }
  if (!id_col) throw ParseError("csv has no header");
  return out;
}

std::string mask_member_name(const std::string& image_member, const LabelMask& m) {
  return strip_extension(image_member) + "_mask" + mask_extension(m);
}

namespace {

std::map<std::uint8_t, std::string> id_map(const std::vector<std::string>& names) {
  if (names.size() > 255) throw ValidationError("at most 255 classes fit an 8-bit mask");
  std::map<std::uint8_t, std::string> out;
  for (std::size_t i = 0; i < names.size(); ++i) out[static_cast<std::uint8_t>(i + 1)] = names[i];
  return out;
}

Rasterized convert(ClassDefinitionFormat fmt, const CatalogEntry& entry, const Bytes& raw,
                   const std::vector<std::string>& names, const HarmonizeOptions& opt) {
  const std::string_view doc(reinterpret_cast<const char*>(raw.data()), raw.size());
  const auto rows = entry.meta.rows, cols = entry.meta.cols;
  switch (fmt) {
    case ClassDefinitionFormat::TxtBbox: {
      auto anns = parse_dota(doc);
      if (!opt.include_difficult) std::erase_if(anns, [](const ObbAnnotation& a) { return a.difficult; });
      auto out = rasterize_obb(anns, rows, cols, id_map(names));
      out.mask.georef = opt.georef;
      return out;
    }
    case ClassDefinitionFormat::GeojsonBbox: {
      if (!opt.georef) throw ValidationError("geojson boxes need the image georeference");
      const auto boxes = parse_geojson_boxes(doc, basename(entry.path.member));
      std::map<std::uint8_t, std::string> cmap;
      for (const auto& b : boxes) {
        if (b.class_id == 0 || b.class_id > 255) continue;  // rejected by geoboxes_to_mask
        cmap[static_cast<std::uint8_t>(b.class_id)] =
            b.class_id <= names.size() ? names[b.class_id - 1] : "type " + std::to_string(b.class_id);
      }
      return geoboxes_to_mask(boxes, rows, cols, *opt.georef, cmap);
    }
    case ClassDefinitionFormat::CsvRle: {
      const auto table = parse_rle_csv(doc);
      Rasterized out{LabelMask::zeros(rows, cols), {}};
      out.mask.class_map = {{1, names.empty() ? std::string("ship") : names.front()}};
      out.mask.georef = opt.georef;
      const auto it = table.find(basename(entry.path.member));
      if (it == table.end()) {
        out.warnings.push_back("no csv rows for " + basename(entry.path.member));
        return out;
      }
      for (const auto& enc : it->second) {
        const auto m = decode_rle(parse_rle(enc, rows, cols));
        for (std::size_t i = 0; i < m.values.size(); ++i) out.mask.values[i] |= m.values[i];
      }
      return out;
    }
    case ClassDefinitionFormat::RasterMask: {
      Rasterized out{decode_mask(raw), {}};
      if ((rows && out.mask.rows != rows) || (cols && out.mask.cols != cols))
        throw ValidationError("mask is " + std::to_string(out.mask.rows) + "x" + std::to_string(out.mask.cols) +
                              ", image is " + std::to_string(rows) + "x" + std::to_string(cols));
      if (out.mask.class_map.empty()) {
        const auto all = id_map(names);
        for (const auto v : out.mask.values)
          if (v != 0 && all.count(v)) out.mask.class_map[v] = all.at(v);
      }
      if (!out.mask.georef) out.mask.georef = opt.georef;
      return out;
    }
    case ClassDefinitionFormat::FilenameLabel:
    case ClassDefinitionFormat::JsonTags:
      throw ValidationError("patch-level labels (" + to_string(fmt) + ") have no mask conversion");
  }
  throw ValidationError("unknown class definition format");
}

}  // namespace

HarmonizeResult harmonize_entry(const DatasetDescriptor& dataset, const CatalogEntry& entry, const Bytes& raw,
                                const HarmonizeOptions& options) {
  const auto ctx = dataset.name + " " + entry.path.str() + ": ";
  if (entry.genre != Genre::Image) throw ValidationError(ctx + "only image entries can be harmonized");
  const auto* fmt = std::get_if<ClassDefinitionFormat>(&dataset.scope.class_definition_format);
  if (!fmt)
    throw ValidationError(ctx + "unknown class definition format '" +
                          std::get<Other>(dataset.scope.class_definition_format).text + "'");
  if ((entry.meta.rows == 0 || entry.meta.cols == 0) && *fmt != ClassDefinitionFormat::RasterMask)
    throw ValidationError(ctx + "entry has no image dimensions");
  const auto names = !options.class_names.empty() ? options.class_names
                                                   : dataset.usage.class_names.value_or(std::vector<std::string>{});

  Rasterized conv;
  try {
    conv = convert(*fmt, entry, raw, names, options);
  } catch (const ParseError& e) {
    throw ParseError(ctx + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + e.what());
  } catch (const FormatError& e) {
    throw FormatError(ctx + e.what());
  }

  HarmonizeResult res;
  res.mask = std::move(conv.mask);
  res.warnings = std::move(conv.warnings);
  res.encoded = encode_mask(res.mask);

  std::set<std::string> present;
  for (const auto v : res.mask.values)
    if (v != 0 && !(res.mask.nodata && v == *res.mask.nodata)) {
      const auto it = res.mask.class_map.find(v);
      present.insert(it == res.mask.class_map.end() ? std::to_string(v) : it->second);
    }
  auto& me = res.mask_entry;
  me.path = {"", mask_member_name(entry.path.member, res.mask)};
  me.bytes = res.encoded.size();
  me.genre = Genre::Mask;
  me.timestamp = entry.timestamp;
  me.labels.assign(present.begin(), present.end());
  me.meta.bands = 1;
  me.meta.rows = res.mask.rows;
  me.meta.cols = res.mask.cols;
  me.meta.dtype_bits = 8;
  me.meta.epsg = res.mask.georef ? res.mask.georef->epsg : entry.meta.epsg;
  me.meta.resolution_m = entry.meta.resolution_m;
  if (res.mask.nodata) me.meta.nodata = *res.mask.nodata;
  return res;
}

}  // namespace forge
