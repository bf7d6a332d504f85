#include "forge/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstring>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

using json = nlohmann::json;

constexpr const char* kMetaKey = "forge";

std::string metadata_json(const RasterPatch& p, const std::map<std::uint8_t, std::string>* class_map) {
  json j = json::object();
  j["band_names"] = p.band_names;
  if (class_map && !class_map->empty()) j["class_map"] = json::parse(class_map_to_json(*class_map));
  if (p.nodata) j["nodata"] = *p.nodata;
  return j.dump();
}

struct Metadata {
  std::vector<std::string> band_names;
  std::map<std::uint8_t, std::string> class_map;
  std::optional<double> nodata;
};

Metadata parse_metadata(const std::string& text) {
  Metadata m;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception&) {
    return m;  // foreign description text
  }
  if (!j.is_object()) return m;
  try {
    if (j.contains("band_names")) m.band_names = j["band_names"].get<std::vector<std::string>>();
    if (j.contains("class_map")) m.class_map = class_map_from_json(j["class_map"].dump());
    if (j.contains("nodata")) m.nodata = j["nodata"].get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("raster metadata: ") + e.what());
  }
  return m;
}

double clamp_to_dtype(double v, std::uint32_t bits) {
  const double hi = bits == 8 ? 255.0 : 65535.0;
  if (!std::isfinite(v)) return 0.0;
  return std::clamp(std::round(v), 0.0, hi);
}

void check_encodable(const RasterPatch& p) {
  if (p.rows == 0 || p.cols == 0 || p.bands == 0) throw ValidationError("cannot encode an empty raster");
  if (p.values.size() != p.plane() * p.bands) throw ValidationError("raster value count does not match its shape");
  if (p.dtype_bits != 8 && p.dtype_bits != 16 && p.dtype_bits != 32)
    throw ValidationError("unsupported dtype_bits " + std::to_string(p.dtype_bits));
}

// ---------------------------------------------------------------------------
// TIFF

enum TiffType : std::uint16_t { kAscii = 2, kShort = 3, kLong = 4, kDouble = 12 };

struct TagOut {
  std::uint16_t id;
  std::uint16_t type;
  std::uint32_t count;
  Bytes value;
};

void put16(Bytes& b, std::uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back(v >> 8);
}
void put32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}
void put64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

TagOut shorts(std::uint16_t id, const std::vector<std::uint16_t>& v) {
  TagOut t{id, kShort, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put16(t.value, x);
  return t;
}
TagOut longs(std::uint16_t id, const std::vector<std::uint32_t>& v) {
  TagOut t{id, kLong, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put32(t.value, x);
  return t;
}
TagOut doubles(std::uint16_t id, const std::vector<double>& v) {
  TagOut t{id, kDouble, static_cast<std::uint32_t>(v.size()), {}};
  for (auto x : v) put64(t.value, std::bit_cast<std::uint64_t>(x));
  return t;
}
TagOut ascii(std::uint16_t id, const std::string& s) {
  TagOut t{id, kAscii, static_cast<std::uint32_t>(s.size() + 1), Bytes(s.begin(), s.end())};
  t.value.push_back(0);
  return t;
}

class TiffIn {
 public:
  explicit TiffIn(const Bytes& d) : d_(d) {
    if (d.size() < 8) throw FormatError("tiff: truncated header");
    if (d[0] == 'I' && d[1] == 'I') le_ = true;
    else if (d[0] == 'M' && d[1] == 'M') le_ = false;
    else throw FormatError("tiff: bad byte-order mark");
    if (u16(2) != 42) throw FormatError("tiff: bad magic (BigTIFF is not supported)");
  }
  std::uint64_t u(std::size_t at, int n) const {
    if (at + n > d_.size()) throw FormatError("tiff: offset out of range");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const std::uint64_t byte = d_[at + (le_ ? i : n - 1 - i)];
      v |= byte << (8 * i);
    }
    return v;
  }
  std::uint16_t u16(std::size_t at) const { return static_cast<std::uint16_t>(u(at, 2)); }
  std::uint32_t u32(std::size_t at) const { return static_cast<std::uint32_t>(u(at, 4)); }
  const Bytes& data() const { return d_; }
  bool little_endian() const { return le_; }

 private:
  const Bytes& d_;
  bool le_ = true;
};

struct TagIn {
  std::uint16_t type = 0;
  std::uint32_t count = 0;
  std::size_t at = 0;  // position of the value bytes
};

int type_size(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
  }
}

std::vector<double> tag_numbers(const TiffIn& in, const TagIn& t) {
  std::vector<double> out;
  const int sz = type_size(t.type);
  for (std::uint32_t i = 0; i < t.count; ++i) {
    const auto at = t.at + std::size_t(i) * sz;
    switch (t.type) {
      case 1: out.push_back(double(in.u(at, 1))); break;
      case 3: out.push_back(double(in.u16(at))); break;
      case 4: out.push_back(double(in.u32(at))); break;
      case 12: out.push_back(std::bit_cast<double>(in.u(at, 8))); break;
      case 11: out.push_back(double(std::bit_cast<float>(in.u32(at)))); break;
      case 5: {
        const double den = in.u32(at + 4);
        out.push_back(den == 0 ? 0 : in.u32(at) / den);
        break;
      }
      default: throw FormatError("tiff: unsupported tag type " + std::to_string(t.type));
    }
  }
  return out;
}

std::string tag_string(const TiffIn& in, const TagIn& t) {
  if (t.at + t.count > in.data().size()) throw FormatError("tiff: string tag out of range");
  std::string s(reinterpret_cast<const char*>(in.data().data() + t.at), t.count);
  while (!s.empty() && s.back() == '\0') s.pop_back();
  return s;
}

}  // namespace

std::optional<ImageFormat> sniff_format(const Bytes& d) {
  static const std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (d.size() >= 8 && std::memcmp(d.data(), png_sig, 8) == 0) return ImageFormat::Png;
  if (d.size() >= 4 && ((d[0] == 'I' && d[1] == 'I' && d[2] == 42 && d[3] == 0) ||
                        (d[0] == 'M' && d[1] == 'M' && d[2] == 0 && d[3] == 42)))
    return ImageFormat::Tiff;
  return std::nullopt;
}

std::optional<JpegHeader> probe_jpeg(const Bytes& d) {
  if (d.size() < 4 || d[0] != 0xFF || d[1] != 0xD8) return std::nullopt;
  std::size_t pos = 2;
  while (pos + 4 <= d.size()) {
    if (d[pos] != 0xFF) return std::nullopt;
    const std::uint8_t marker = d[pos + 1];
    if (marker == 0xFF) {
      ++pos;
      continue;
    }
    if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
      pos += 2;
      continue;
    }
    const std::size_t len = (std::size_t(d[pos + 2]) << 8) | d[pos + 3];
    if (len < 2 || pos + 2 + len > d.size()) return std::nullopt;
    // SOF0..SOF15 except DHT (C4), JPG (C8) and DAC (CC)
    if (marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC) {
      if (len < 8) return std::nullopt;
      const auto* f = d.data() + pos + 4;
      JpegHeader h;
      h.precision = f[0];
      h.rows = (std::uint32_t(f[1]) << 8) | f[2];
      h.cols = (std::uint32_t(f[3]) << 8) | f[4];
      h.components = f[5];
      return h;
    }
    if (marker == 0xDA || marker == 0xD9) return std::nullopt;
    pos += 2 + len;
  }
  return std::nullopt;
}

namespace {

Bytes encode_tiff_impl(const RasterPatch& p, const std::map<std::uint8_t, std::string>* class_map) {
  check_encodable(p);
  const std::uint32_t bps = p.dtype_bits;
  const std::size_t bytes_per = bps / 8;
  const std::size_t strip = p.plane() * bytes_per;
  if (strip * p.bands > 0xFFFF0000u) throw ValidationError("raster too large for a classic TIFF");

  Bytes out = {'I', 'I', 42, 0, 0, 0, 0, 0};
  std::vector<std::uint32_t> offsets, counts;
  for (std::uint32_t b = 0; b < p.bands; ++b) {
    offsets.push_back(static_cast<std::uint32_t>(out.size()));
    counts.push_back(static_cast<std::uint32_t>(strip));
    for (const double v : p.band(b)) {
      if (bps == 8) out.push_back(static_cast<std::uint8_t>(clamp_to_dtype(v, 8)));
      else if (bps == 16) put16(out, static_cast<std::uint16_t>(clamp_to_dtype(v, 16)));
      else put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  if (out.size() % 2) out.push_back(0);

  std::vector<TagOut> tags;
  tags.push_back(longs(256, {p.cols}));
  tags.push_back(longs(257, {p.rows}));
  tags.push_back(shorts(258, std::vector<std::uint16_t>(p.bands, static_cast<std::uint16_t>(bps))));
  tags.push_back(shorts(259, {1}));
  tags.push_back(shorts(262, {1}));
  tags.push_back(ascii(270, metadata_json(p, class_map)));
  tags.push_back(longs(273, offsets));
  tags.push_back(shorts(277, {static_cast<std::uint16_t>(p.bands)}));
  tags.push_back(longs(278, {p.rows}));
  tags.push_back(longs(279, counts));
  tags.push_back(shorts(284, {static_cast<std::uint16_t>(p.bands == 1 ? 1 : 2)}));
  tags.push_back(shorts(339, std::vector<std::uint16_t>(p.bands, bps == 32 ? 3 : 1)));
  if (p.georef) {
    const auto& c = p.georef->transform.c;
    if (c[2] == 0 && c[4] == 0) {
      tags.push_back(doubles(33550, {c[1], -c[5], 0.0}));
      tags.push_back(doubles(33922, {0, 0, 0, c[0], c[3], 0}));
    } else {
      tags.push_back(doubles(34264, {c[1], c[2], 0, c[0], c[4], c[5], 0, c[3], 0, 0, 0, 0, 0, 0, 0, 1}));
    }
    std::vector<std::uint16_t> keys;
    auto key = [&](std::uint16_t id, std::uint16_t v) { keys.insert(keys.end(), {id, 0, 1, v}); };
    const auto epsg = p.georef->epsg;
    const bool geographic = epsg && *epsg >= 4000 && *epsg < 5000;
    key(1024, geographic ? 2 : 1);
    key(1025, 1);
    if (epsg) key(geographic ? 2048 : 3072, static_cast<std::uint16_t>(*epsg));
    std::vector<std::uint16_t> dir = {1, 1, 0, static_cast<std::uint16_t>(keys.size() / 4)};
    dir.insert(dir.end(), keys.begin(), keys.end());
    tags.push_back(shorts(34735, dir));
  }
  if (p.nodata) tags.push_back(ascii(42113, text::format_double(*p.nodata)));

  const std::size_t ifd_at = out.size();
  const std::size_t ifd_size = 2 + 12 * tags.size() + 4;
  std::size_t extra_at = ifd_at + ifd_size;
  Bytes ifd, extra;
  put16(ifd, static_cast<std::uint16_t>(tags.size()));
  for (const auto& t : tags) {
    put16(ifd, t.id);
    put16(ifd, t.type);
    put32(ifd, t.count);
    if (t.value.size() <= 4) {
      Bytes v = t.value;
      v.resize(4, 0);
      ifd.insert(ifd.end(), v.begin(), v.end());
    } else {
      put32(ifd, static_cast<std::uint32_t>(extra_at + extra.size()));
      extra.insert(extra.end(), t.value.begin(), t.value.end());
      if (extra.size() % 2) extra.push_back(0);
    }
  }
  put32(ifd, 0);
  out.insert(out.end(), ifd.begin(), ifd.end());
  out.insert(out.end(), extra.begin(), extra.end());
  const auto at = static_cast<std::uint32_t>(ifd_at);
  for (int i = 0; i < 4; ++i) out[4 + i] = (at >> (8 * i)) & 0xFF;
  return out;
}

struct Decoded {
  RasterPatch patch;
  Metadata meta;
};

Decoded decode_tiff_impl(const Bytes& data) {
  TiffIn in(data);
  const std::size_t ifd = in.u32(4);
  const std::size_t n = in.u16(ifd);
  std::map<std::uint16_t, TagIn> tags;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = ifd + 2 + 12 * i;
    TagIn t;
    const auto id = in.u16(e);
    t.type = in.u16(e + 2);
    t.count = in.u32(e + 4);
    const auto sz = std::size_t(type_size(t.type)) * t.count;
    t.at = sz <= 4 ? e + 8 : in.u32(e + 8);
    if (t.at + sz > data.size()) throw FormatError("tiff: tag " + std::to_string(id) + " out of range");
    tags[id] = t;
  }
  auto need = [&](std::uint16_t id) -> const TagIn& {
    const auto it = tags.find(id);
    if (it == tags.end()) throw FormatError("tiff: missing required tag " + std::to_string(id));
    return it->second;
  };
  auto number = [&](std::uint16_t id, double fallback) {
    const auto it = tags.find(id);
    return it == tags.end() ? fallback : tag_numbers(in, it->second).at(0);
  };

  if (tags.count(322)) throw FormatError("tiff: tiled images are not supported");
  if (number(259, 1) != 1) throw FormatError("tiff: compressed images are not supported");
  const auto cols = static_cast<std::uint32_t>(tag_numbers(in, need(256)).at(0));
  const auto rows = static_cast<std::uint32_t>(tag_numbers(in, need(257)).at(0));
  const auto spp = static_cast<std::uint32_t>(number(277, 1));
  const auto planar = static_cast<int>(number(284, 1));
  const auto bits = tags.count(258) ? tag_numbers(in, tags[258]) : std::vector<double>{1};
  const auto fmt = tags.count(339) ? tag_numbers(in, tags[339]) : std::vector<double>{1};
  const auto bps = static_cast<std::uint32_t>(bits.at(0));
  const int sf = static_cast<int>(fmt.at(0));
  if (rows == 0 || cols == 0 || spp == 0) throw FormatError("tiff: empty image");
  if (bps != 8 && bps != 16 && bps != 32 && !(bps == 64 && sf == 3))
    throw FormatError("tiff: unsupported bits per sample " + std::to_string(bps));
  const auto offsets = tag_numbers(in, need(273));
  const auto counts = tag_numbers(in, need(279));
  if (offsets.size() != counts.size()) throw FormatError("tiff: strip tables disagree");
  const auto rows_per_strip = static_cast<std::uint32_t>(std::min<double>(number(278, rows), rows));

  Decoded out;
  auto& p = out.patch;
  p = RasterPatch::filled(rows, cols, spp);
  p.dtype_bits = std::min<std::uint32_t>(bps, 32);
  const std::size_t bytes_per = bps / 8;

  // Gather the raw sample stream in file order, then scatter by layout.
  Bytes raw;
  raw.reserve(p.values.size() * bytes_per);
  for (std::size_t s = 0; s < offsets.size(); ++s) {
    const auto off = static_cast<std::size_t>(offsets[s]);
    const auto len = static_cast<std::size_t>(counts[s]);
    if (off + len > data.size()) throw FormatError("tiff: strip out of range");
    raw.insert(raw.end(), data.begin() + static_cast<std::ptrdiff_t>(off),
               data.begin() + static_cast<std::ptrdiff_t>(off + len));
  }
  if (rows_per_strip == 0) throw FormatError("tiff: zero rows per strip");
  if (raw.size() < p.values.size() * bytes_per) throw FormatError("tiff: pixel data truncated");

  auto sample = [&](std::size_t k) -> double {
    const auto at = k * bytes_per;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bytes_per; ++i)
      v |= std::uint64_t(raw[at + (in.little_endian() ? i : bytes_per - 1 - i)]) << (8 * i);
    if (sf == 3) return bps == 32 ? double(std::bit_cast<float>(static_cast<std::uint32_t>(v))) : std::bit_cast<double>(v);
    if (sf == 2) {
      if (bps == 8) return double(static_cast<std::int8_t>(v));
      if (bps == 16) return double(static_cast<std::int16_t>(v));
      return double(static_cast<std::int32_t>(v));
    }
    return double(v);
  };
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c)
      for (std::uint32_t b = 0; b < spp; ++b) {
        const std::size_t k = planar == 2 ? (std::size_t(b) * rows + r) * cols + c
                                          : (std::size_t(r) * cols + c) * spp + b;
        p.at(b, r, c) = sample(k);
      }

  if (tags.count(270)) out.meta = parse_metadata(tag_string(in, tags[270]));
  p.band_names = out.meta.band_names;
  p.nodata = out.meta.nodata;
  if (!p.nodata && tags.count(42113)) p.nodata = text::parse_number<double>(text::trim(tag_string(in, tags[42113])));

  std::optional<Affine> tf;
  if (tags.count(34264)) {
    const auto m = tag_numbers(in, tags[34264]);
    if (m.size() < 16) throw FormatError("tiff: short model transformation");
    tf = Affine{{m[3], m[0], m[1], m[7], m[4], m[5]}};
  } else if (tags.count(33550) && tags.count(33922)) {
    const auto s = tag_numbers(in, tags[33550]);
    const auto t = tag_numbers(in, tags[33922]);
    if (s.size() < 2 || t.size() < 6) throw FormatError("tiff: short georeferencing tags");
    tf = Affine{{t[3] - t[0] * s[0], s[0], 0, t[4] + t[1] * s[1], 0, -s[1]}};
  }
  if (tf) {
    Georef g{*tf, std::nullopt};
    if (tags.count(34735)) {
      const auto k = tag_numbers(in, tags[34735]);
      for (std::size_t i = 4; i + 3 < k.size(); i += 4)
        if ((k[i] == 3072 || k[i] == 2048) && k[i + 1] == 0) g.epsg = static_cast<std::uint32_t>(k[i + 3]);
    }
    p.georef = g;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG

struct PngWriteBuf {
  Bytes* out;
};

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<PngWriteBuf*>(png_get_io_ptr(png));
  buf->out->insert(buf->out->end(), data, data + len);
}
void png_flush_cb(png_structp) {}

struct PngReadBuf {
  const Bytes* in;
  std::size_t pos;
};

void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<PngReadBuf*>(png_get_io_ptr(png));
  if (buf->pos + len > buf->in->size()) png_error(png, "unexpected end of data");
  std::memcpy(data, buf->in->data() + buf->pos, len);
  buf->pos += len;
}

struct PngError {
  char message[256] = {};
};

void png_error_cb(png_structp png, png_const_charp msg) {
  auto* err = static_cast<PngError*>(png_get_error_ptr(png));
  std::snprintf(err->message, sizeof err->message, "%s", msg);
  png_longjmp(png, 1);
}
void png_warning_cb(png_structp, png_const_charp) {}

Bytes encode_png_impl(const RasterPatch& p, const std::map<std::uint8_t, std::string>* class_map) {
  check_encodable(p);
  if (p.bands > 4) throw ValidationError("png holds at most 4 bands");
  if (p.dtype_bits == 32) throw ValidationError("png cannot hold 32 bit samples");
  const int depth = p.dtype_bits == 8 ? 8 : 16;
  static const int color[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                              PNG_COLOR_TYPE_RGB_ALPHA};
  const std::size_t row_bytes = std::size_t(p.cols) * p.bands * (depth / 8);
  Bytes pixels(row_bytes * p.rows);
  for (std::uint32_t r = 0; r < p.rows; ++r)
    for (std::uint32_t c = 0; c < p.cols; ++c)
      for (std::uint32_t b = 0; b < p.bands; ++b) {
        const auto v = static_cast<std::uint32_t>(clamp_to_dtype(p.at(b, r, c), p.dtype_bits));
        const auto at = r * row_bytes + (std::size_t(c) * p.bands + b) * (depth / 8);
        if (depth == 8) pixels[at] = static_cast<std::uint8_t>(v);
        else {
          pixels[at] = static_cast<std::uint8_t>(v >> 8);
          pixels[at + 1] = static_cast<std::uint8_t>(v & 0xFF);
        }
      }
  std::vector<png_bytep> row_ptrs(p.rows);
  for (std::uint32_t r = 0; r < p.rows; ++r) row_ptrs[r] = pixels.data() + r * row_bytes;
  const std::string meta = metadata_json(p, class_map);

  Bytes out;
  PngWriteBuf wbuf{&out};
  PngError err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw Error("png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(std::string("png encode: ") + err.message);
  }
  png_set_write_fn(png, &wbuf, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, p.cols, p.rows, depth, color[p.bands - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_text txt{};
  txt.compression = PNG_TEXT_COMPRESSION_NONE;
  txt.key = const_cast<char*>(kMetaKey);
  txt.text = const_cast<char*>(meta.c_str());
  txt.text_length = meta.size();
  png_set_text(png, info, &txt, 1);
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Decoded decode_png_impl(const Bytes& data) {
  PngReadBuf rbuf{&data, 0};
  PngError err;
  Decoded out;
  Bytes pixels;
  std::vector<png_bytep> row_ptrs;
  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0, channels = 0;
  std::string meta;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb, png_warning_cb);
  if (!png) throw Error("png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(std::string("png decode: ") + err.message);
  }
  png_set_read_fn(png, &rbuf, png_read_cb);
  png_set_crc_action(png, PNG_CRC_ERROR_QUIT, PNG_CRC_ERROR_QUIT);
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &depth, &color, nullptr, nullptr, nullptr);
  if (depth < 8) png_set_packing(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  pixels.resize(row_bytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) row_ptrs[r] = pixels.data() + r * row_bytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, info);
  png_textp texts = nullptr;
  int n_text = 0;
  png_get_text(png, info, &texts, &n_text);
  for (int i = 0; i < n_text; ++i)
    if (std::strcmp(texts[i].key, kMetaKey) == 0) meta.assign(texts[i].text, texts[i].text_length);
  png_destroy_read_struct(&png, &info, nullptr);

  auto& p = out.patch;
  p = RasterPatch::filled(height, width, static_cast<std::uint32_t>(channels));
  p.dtype_bits = depth == 16 ? 16 : 8;
  for (png_uint_32 r = 0; r < height; ++r)
    for (png_uint_32 c = 0; c < width; ++c)
      for (int b = 0; b < channels; ++b) {
        const auto at = r * row_bytes + (std::size_t(c) * channels + b) * (depth / 8);
        p.at(b, r, c) = depth == 16 ? double((pixels[at] << 8) | pixels[at + 1]) : double(pixels[at]);
      }
  out.meta = parse_metadata(meta);
  p.band_names = out.meta.band_names;
  p.nodata = out.meta.nodata;
  return out;
}

Decoded decode_any(const Bytes& data) {
  const auto fmt = sniff_format(data);
  if (!fmt) throw FormatError("unrecognised raster container (expected TIFF or PNG)");
  return *fmt == ImageFormat::Tiff ? decode_tiff_impl(data) : decode_png_impl(data);
}

}  // namespace

Bytes encode_tiff(const RasterPatch& p) { return encode_tiff_impl(p, nullptr); }
RasterPatch decode_tiff(const Bytes& data) { return decode_tiff_impl(data).patch; }
Bytes encode_png(const RasterPatch& p) { return encode_png_impl(p, nullptr); }
RasterPatch decode_png(const Bytes& data) { return decode_png_impl(data).patch; }
RasterPatch decode_raster(const Bytes& data) { return decode_any(data).patch; }

RasterPatch mask_to_patch(const LabelMask& m) {
  RasterPatch p = RasterPatch::filled(m.rows, m.cols, 1);
  p.dtype_bits = 8;
  std::transform(m.values.begin(), m.values.end(), p.values.begin(), [](std::uint8_t v) { return double(v); });
  if (m.nodata) p.nodata = double(*m.nodata);
  p.georef = m.georef;
  p.band_names = {"class"};
  return p;
}

LabelMask patch_to_mask(const RasterPatch& p) {
  if (p.bands != 1) throw ValidationError("a label mask needs exactly one band, got " + std::to_string(p.bands));
  LabelMask m = LabelMask::zeros(p.rows, p.cols);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const double v = p.values[i];
    if (!(v >= 0 && v <= 255 && v == std::floor(v))) throw ValidationError("label value out of 0..255 range");
    m.values[i] = static_cast<std::uint8_t>(v);
  }
  if (p.nodata) {
    if (!(*p.nodata >= 0 && *p.nodata <= 255)) throw ValidationError("mask nodata out of 0..255 range");
    m.nodata = static_cast<std::uint8_t>(*p.nodata);
  }
  m.georef = p.georef;
  return m;
}

Bytes encode_mask(const LabelMask& m) {
  const auto p = mask_to_patch(m);
  return m.georef ? encode_tiff_impl(p, &m.class_map) : encode_png_impl(p, &m.class_map);
}

LabelMask decode_mask(const Bytes& data) {
  auto d = decode_any(data);
  auto m = patch_to_mask(d.patch);
  m.class_map = std::move(d.meta.class_map);
  return m;
}

std::string mask_extension(const LabelMask& m) { return m.georef ? ".tif" : ".png"; }

std::string class_map_to_json(const std::map<std::uint8_t, std::string>& m) {
  json j = json::object();
  for (const auto& [id, name] : m) j[std::to_string(id)] = name;
  return j.dump();
}

std::map<std::uint8_t, std::string> class_map_from_json(const std::string& text) {
  std::map<std::uint8_t, std::string> out;
  try {
    const auto doc = json::parse(text);
    if (!doc.is_object()) throw FormatError("class map must be a JSON object");
    for (const auto& [k, v] : doc.items()) {
      const auto id = text::parse_number<int>(k);
      if (!id || *id < 0 || *id > 255) throw FormatError("class map key '" + k + "' is not an id in 0..255");
      out[static_cast<std::uint8_t>(*id)] = v.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("class map: ") + e.what());
  }
  return out;
}

}  // namespace forge
