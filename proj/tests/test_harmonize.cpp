#include <doctest.h>

#include <random>

#include "forge/error.hpp"
#include "forge/harmonize.hpp"
#include "forge/raster_io.hpp"
#include "support.hpp"

using namespace forge;
using namespace forge::test;

namespace {

LabelMask random_binary(std::mt19937_64& rng, std::uint32_t rows, std::uint32_t cols) {
  auto m = LabelMask::zeros(rows, cols);
  // runs of random length so both long and single-pixel runs occur
  const auto density = rng() % 5;
  std::uint8_t v = rng() % 2;
  for (auto& x : m.values) {
    if (rng() % 8 == 0) v = (rng() % 5 < density) ? 1 : 0;
    x = v;
  }
  return m;
}

// Crossing-number test at the pixel centre, same half-open edge rule.
bool inside(const std::array<PixelPoint, 4>& q, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = 3; i < 4; j = i++) {
    const auto& p = q[i];
    const auto& r = q[j];
    if ((p.y > y) != (r.y > y) && x >= p.x + (y - p.y) * (r.x - p.x) / (r.y - p.y)) in = !in;
  }
  return in;
}

double shoelace(const std::array<PixelPoint, 4>& q) {
  double a = 0;
  for (std::size_t i = 0; i < 4; ++i) a += q[i].x * q[(i + 1) % 4].y - q[(i + 1) % 4].x * q[i].y;
  return a / 2;
}

LabelMask obb_oracle(const std::vector<ObbAnnotation>& anns, std::uint32_t rows, std::uint32_t cols,
                     const std::map<std::string, std::uint8_t>& ids) {
  auto m = LabelMask::zeros(rows, cols);
  for (const auto& a : anns) {
    if (shoelace(a.vertices) == 0) continue;
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c)
        if (inside(a.vertices, c + 0.5, r + 0.5)) m.at(r, c) = ids.at(a.class_name);
  }
  return m;
}

DatasetDescriptor descriptor(const std::string& file) {
  return load_descriptor((source_dir() / "data" / "descriptors" / file).string());
}

CatalogEntry image_entry(const std::string& member, std::uint32_t rows, std::uint32_t cols) {
  CatalogEntry e;
  e.path = {"ds/ds_0000.zip", member};
  e.bytes = 100;
  e.meta.bands = 3;
  e.meta.rows = rows;
  e.meta.cols = cols;
  e.meta.dtype_bits = 8;
  e.meta.resolution_m = 0.5;
  e.timestamp = parse_rfc3339("2020-01-02T03:04:05Z");
  return e;
}

Bytes as_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("rle round-trips random masks") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto m = random_binary(rng, 64, 64);
    const auto enc = encode_rle(m);
    CHECK(decode_rle(enc) == m);
    CHECK(parse_rle(format_rle(enc), 64, 64) == enc);
    for (std::size_t k = 1; k < enc.runs.size(); ++k)
      CHECK(enc.runs[k].start > enc.runs[k - 1].start + enc.runs[k - 1].length);
  }
}

TEST_CASE("rle is column-major and 1-indexed") {
  const auto full = decode_rle({{{1, 589824}}, 768, 768});
  CHECK(std::all_of(full.values.begin(), full.values.end(), [](auto v) { return v == 1; }));

  const auto m = decode_rle({{{2, 2}, {6, 1}}, 3, 2});
  // column 0 holds pixels 1..3, column 1 holds 4..6
  CHECK(m.values == std::vector<std::uint8_t>{0, 0, 1, 0, 1, 1});
  CHECK(encode_rle(LabelMask::zeros(3, 3)).runs.empty());
}

TEST_CASE("rle errors") {
  CHECK_THROWS_AS(decode_rle({{{0, 1}}, 2, 2}), ValidationError);
  CHECK_THROWS_AS(decode_rle({{{1, 0}}, 2, 2}), ValidationError);
  CHECK_THROWS_AS(decode_rle({{{1, 2}, {2, 1}}, 2, 2}), ValidationError);
  CHECK_THROWS_AS(decode_rle({{{3, 1}, {1, 1}}, 2, 2}), ValidationError);
  CHECK_THROWS_AS(decode_rle({{{4, 2}}, 2, 2}), ValidationError);
  CHECK_THROWS_WITH_AS(decode_rle({{{1, 1}, {2, 9}}, 2, 2}), doctest::Contains("run 1"), ValidationError);
  CHECK_THROWS_AS(parse_rle("1 2 3", 2, 2), ParseError);
  CHECK_THROWS_AS(parse_rle("1 x", 2, 2), ParseError);
  CHECK(parse_rle("  ", 2, 2).runs.empty());
  auto m = LabelMask::zeros(2, 2);
  m.values[0] = 2;
  CHECK_THROWS_AS(encode_rle(m), ValidationError);
}

TEST_CASE("oriented boxes match a point-in-polygon oracle") {
  std::mt19937_64 rng(12);
  const std::map<std::uint8_t, std::string> cmap{{1, "a"}, {2, "b"}, {3, "c"}};
  const std::map<std::string, std::uint8_t> ids{{"a", 1}, {"b", 2}, {"c", 3}};
  std::uniform_real_distribution<double> coord(-8, 48);
  for (int round = 0; round < 300; ++round) {
    const std::uint32_t rows = 1 + rng() % 40, cols = 1 + rng() % 40;
    std::vector<ObbAnnotation> anns(rng() % 6);
    for (auto& a : anns) {
      for (auto& v : a.vertices) {
        // quarter-pixel grid puts some edges exactly on pixel centres
        v = {std::round(coord(rng) * 4) / 4, std::round(coord(rng) * 4) / 4};
      }
      a.class_name = std::string(1, char('a' + rng() % 3));
    }
    const auto got = rasterize_obb(anns, rows, cols, cmap);
    auto want = obb_oracle(anns, rows, cols, ids);
    want.class_map = cmap;
    CHECK(got.mask == want);
  }
}

TEST_CASE("oriented box warnings and class lookup") {
  const std::map<std::uint8_t, std::string> cmap{{1, "storage tank"}};
  std::vector<ObbAnnotation> anns(3);
  anns[0] = {{{{1, 1}, {3, 1}, {3, 3}, {1, 3}}}, "Storage-Tank", false};
  anns[1] = {{{{1, 1}, {2, 2}, {3, 3}, {4, 4}}}, "storage_tank", false};
  anns[2] = {{{{10, 10}, {12, 10}, {12, 12}, {10, 12}}}, "storage tank", false};
  const auto out = rasterize_obb(anns, 5, 5, cmap);
  CHECK(std::count(out.mask.values.begin(), out.mask.values.end(), 1) == 4);
  REQUIRE(out.warnings.size() == 2);
  CHECK(out.warnings[0].find("annotation 1") != std::string::npos);
  CHECK(out.warnings[1].find("outside") != std::string::npos);
  anns[0].class_name = "plane";
  CHECK_THROWS_AS(rasterize_obb(anns, 5, 5, cmap), ValidationError);
  CHECK_THROWS_AS(rasterize_obb({}, 0, 5, cmap), ValidationError);
}

TEST_CASE("dota text") {
  const auto anns = parse_dota(
      "imagesource:GoogleEarth\ngsd:0.146\n"
      "1 2 3 4 5 6 7 8 small-vehicle 1\n"
      "\n"
      "1.5 2 3 4 5 6 7 8.25 plane\n");
  REQUIRE(anns.size() == 2);
  CHECK(anns[0].class_name == "small-vehicle");
  CHECK(anns[0].difficult);
  CHECK(anns[1].vertices[3].y == 8.25);
  CHECK_FALSE(anns[1].difficult);
  try {
    parse_dota("1 2 3 4 5 6 7 8 plane\n1 2 3 plane\n");
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_dota("1 2 3 4 5 6 7 z plane"), ParseError);
  CHECK_THROWS_AS(parse_dota("1 2 3 4 5 6 7 8 plane 2"), ParseError);
}

TEST_CASE("geojson boxes") {
  const std::string doc = R"({"type":"FeatureCollection","features":[
    {"bbox":[1020,1950,1050,1980],"properties":{"type_id":"18","image_id":"a.tif"}},
    {"geometry":{"type":"Polygon","coordinates":[[[1000,1990],[1010,1990],[1010,2000],[1000,1990]]]},
     "properties":{"class_id":5,"image_id":"a.tif"}},
    {"bbox":[0,0,1,1],"properties":{"type_id":1,"image_id":"b.tif"}}]})";
  const auto all = parse_geojson_boxes(doc);
  CHECK(all.size() == 3);
  const auto boxes = parse_geojson_boxes(doc, std::string("a.tif"));
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0].class_id == 18);
  CHECK(boxes[1].class_id == 5);
  CHECK(boxes[1].min_x == 1000);
  CHECK(boxes[1].max_y == 2000);

  const Georef g{Affine{{1000, 10, 0, 2000, 0, -10}}, 32633};
  const auto out = geoboxes_to_mask(boxes, 8, 8, g, {{18, "building"}, {5, "car"}});
  CHECK(out.mask.georef == g);
  for (std::uint32_t r = 0; r < 8; ++r)
    for (std::uint32_t c = 0; c < 8; ++c) {
      const bool b18 = r >= 2 && r < 5 && c >= 2 && c < 5;
      const bool b5 = r == 0 && c == 0;
      CHECK(out.mask.at(r, c) == (b5 ? 5 : b18 ? 18 : 0));
    }
  CHECK_THROWS_AS(geoboxes_to_mask(boxes, 8, 8, g, {{18, "building"}}), ValidationError);
  CHECK_THROWS_AS(parse_geojson_boxes(R"({"features":[{"bbox":[0,0,1,1]}]})"), ParseError);
  CHECK_THROWS_AS(parse_geojson_boxes(R"({"features":[{"properties":{"type_id":-1},"bbox":[0,0,1,1]}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_geojson_boxes("[]"), ParseError);
  CHECK_THROWS_AS(parse_geojson_boxes("{"), ParseError);
}

TEST_CASE("rle csv") {
  const auto t = parse_rle_csv("ImageId,EncodedPixels\na.jpg,1 2\na.jpg,5 1\nb.jpg,\nc.jpg\n");
  CHECK(t.at("a.jpg") == std::vector<std::string>{"1 2", "5 1"});
  CHECK(t.at("b.jpg").empty());
  CHECK(t.at("c.jpg").empty());
  CHECK_THROWS_AS(parse_rle_csv("Id,Pixels\n"), ParseError);
  CHECK_THROWS_AS(parse_rle_csv(""), ParseError);
}

TEST_CASE("mask member names") {
  auto m = LabelMask::zeros(1, 1);
  CHECK(mask_member_name("P0001.png", m) == "P0001_mask.png");
  CHECK(mask_member_name("a.v2/img", m) == "a.v2/img_mask.png");
  m.georef = Georef{};
  CHECK(mask_member_name("tiles/x.tif", m) == "tiles/x_mask.tif");
}

TEST_CASE("harmonize txt boxes") {
  const auto d = descriptor("dota.desc");
  const auto e = image_entry("images/P0001.png", 6, 6);
  const auto raw = as_bytes("gsd:0.1\n0 0 3 0 3 3 0 3 plane 0\n3 3 6 3 6 6 3 6 storage-tank 1\n");
  const auto res = harmonize_entry(d, e, raw);
  CHECK(res.mask.at(0, 0) == 1);
  CHECK(res.mask.at(5, 5) == 3);
  CHECK(decode_mask(res.encoded) == res.mask);
  CHECK(res.mask_entry.path.member == "images/P0001_mask.png");
  CHECK(res.mask_entry.genre == Genre::Mask);
  CHECK(res.mask_entry.labels == std::vector<std::string>{"plane", "storage tank"});
  CHECK(res.mask_entry.bytes == res.encoded.size());
  CHECK(res.mask_entry.meta.bands == 1);
  CHECK(res.mask_entry.meta.dtype_bits == 8);
  CHECK(res.mask_entry.timestamp == e.timestamp);
  CHECK(res.mask_entry.meta.resolution_m == 0.5);
  CHECK_FALSE(check_entry(res.mask_entry));

  HarmonizeOptions no_difficult;
  no_difficult.include_difficult = false;
  CHECK(harmonize_entry(d, e, raw, no_difficult).mask.at(5, 5) == 0);
  CHECK_THROWS_AS(harmonize_entry(d, e, as_bytes("1 2 3")), ParseError);
}

TEST_CASE("harmonize geojson boxes") {
  const auto d = descriptor("xview.desc");
  const auto e = image_entry("imgs/a.tif", 8, 8);
  const auto raw = as_bytes(R"({"features":[
    {"bbox":[1020,1950,1050,1980],"properties":{"type_id":18,"image_id":"a.tif"}},
    {"bbox":[1000,1990,1010,2000],"properties":{"type_id":7,"image_id":"z.tif"}}]})");
  CHECK_THROWS_AS(harmonize_entry(d, e, raw), ValidationError);
  HarmonizeOptions o;
  o.georef = Georef{Affine{{1000, 10, 0, 2000, 0, -10}}, 32633};
  const auto res = harmonize_entry(d, e, raw, o);
  CHECK(res.mask.class_map == std::map<std::uint8_t, std::string>{{18, "type 18"}});
  CHECK(res.mask_entry.path.member == "imgs/a_mask.tif");
  CHECK(res.mask_entry.meta.epsg == 32633u);
  CHECK(std::count(res.mask.values.begin(), res.mask.values.end(), 18) == 9);
}

TEST_CASE("harmonize csv runs") {
  const auto d = descriptor("airbus-ship.desc");
  const auto raw = as_bytes("ImageId,EncodedPixels\nx.jpg,1 3\nx.jpg,7 2\ny.jpg,\n");
  const auto res = harmonize_entry(d, image_entry("train/x.jpg", 4, 4), raw);
  CHECK(std::count(res.mask.values.begin(), res.mask.values.end(), 1) == 5);
  CHECK(res.mask.at(2, 0) == 1);
  CHECK(res.mask.at(2, 1) == 1);
  CHECK(res.mask_entry.labels == std::vector<std::string>{"ship"});
  const auto none = harmonize_entry(d, image_entry("train/y.jpg", 4, 4), raw);
  CHECK(none.mask_entry.labels.empty());
  CHECK(none.warnings.empty());
  CHECK(harmonize_entry(d, image_entry("train/q.jpg", 4, 4), raw).warnings.size() == 1);
  CHECK_THROWS_AS(harmonize_entry(d, image_entry("train/x.jpg", 2, 2), raw), ValidationError);
}

TEST_CASE("harmonize raster masks") {
  const auto d = descriptor("inria.desc");
  auto m = LabelMask::zeros(4, 4);
  m.values[5] = 1;
  m.values[6] = 2;
  const auto res = harmonize_entry(d, image_entry("gt/austin1.tif", 4, 4), encode_mask(m));
  CHECK(res.mask.class_map == std::map<std::uint8_t, std::string>{{1, "building"}, {2, "no building"}});
  CHECK(res.mask.values == m.values);
  CHECK_THROWS_AS(harmonize_entry(d, image_entry("gt/austin1.tif", 5, 4), encode_mask(m)), ValidationError);
  CHECK_THROWS_AS(harmonize_entry(d, image_entry("gt/austin1.tif", 4, 4), Bytes{1, 2, 3}), FormatError);
}

TEST_CASE("harmonize refuses what it cannot convert") {
  const auto eurosat = descriptor("eurosat.desc");
  CHECK_THROWS_AS(harmonize_entry(eurosat, image_entry("a.tif", 64, 64), {}), ValidationError);
  const auto dota = descriptor("dota.desc");
  auto meta = image_entry("a.json", 4, 4);
  meta.genre = Genre::Metadata;
  CHECK_THROWS_AS(harmonize_entry(dota, meta, {}), ValidationError);
  CHECK_THROWS_AS(harmonize_entry(dota, image_entry("a.png", 0, 0), {}), ValidationError);
  auto odd = dota;
  odd.scope.class_definition_format = Other{"shapefile"};
  CHECK_THROWS_WITH_AS(harmonize_entry(odd, image_entry("a.png", 4, 4), {}), doctest::Contains("shapefile"),
                       ValidationError);
}
