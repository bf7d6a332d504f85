#include <doctest.h>

#include <random>

#include "forge/error.hpp"
#include "forge/raster_io.hpp"

using namespace forge;

namespace {

RasterPatch random_patch(std::mt19937_64& rng, std::uint32_t bands, std::uint32_t bits) {
  auto p = RasterPatch::filled(1 + rng() % 40, 1 + rng() % 40, bands);
  p.dtype_bits = bits;
  for (auto& v : p.values) {
    if (bits == 8) v = double(rng() % 256);
    else if (bits == 16) v = double(rng() % 65536);
    else v = double(std::int64_t(rng() % 2000001) - 1000000) / 8.0;
  }
  return p;
}

Bytes jpeg_header(std::uint8_t sof, std::uint16_t rows, std::uint16_t cols, std::uint8_t comps) {
  Bytes b{0xFF, 0xD8};
  // APP0 JFIF segment, then a DQT stub before the frame header
  const Bytes app0{0xFF, 0xE0, 0x00, 0x10, 'J', 'F', 'I', 'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0};
  b.insert(b.end(), app0.begin(), app0.end());
  const Bytes dqt{0xFF, 0xDB, 0x00, 0x04, 0x00, 0x01};
  b.insert(b.end(), dqt.begin(), dqt.end());
  const std::uint16_t len = 8 + 3 * comps;
  b.insert(b.end(), {0xFF, sof, std::uint8_t(len >> 8), std::uint8_t(len), 8, std::uint8_t(rows >> 8),
                     std::uint8_t(rows), std::uint8_t(cols >> 8), std::uint8_t(cols), comps});
  for (std::uint8_t c = 0; c < comps; ++c) b.insert(b.end(), {std::uint8_t(c + 1), 0x11, 0});
  b.insert(b.end(), {0xFF, 0xD9});
  return b;
}

}  // namespace

TEST_CASE("tiff round-trip at 8, 16 and 32 bits") {
  std::mt19937_64 rng(1);
  for (std::uint32_t bits : {8u, 16u, 32u}) {
    for (int i = 0; i < 20; ++i) {
      auto p = random_patch(rng, 1 + rng() % 13, bits);
      if (i % 2) {
        p.georef = Georef{Affine{{500000.0 + i, 10, 0, 5000000, 0, -10}}, 32633};
        for (std::uint32_t b = 0; b < p.bands; ++b) p.band_names.push_back("B" + std::to_string(b + 1));
      }
      if (i % 3 == 0) p.nodata = 0;
      const auto enc = encode_tiff(p);
      CHECK(sniff_format(enc) == ImageFormat::Tiff);
      CHECK(decode_tiff(enc) == p);
      CHECK(decode_raster(enc) == p);
    }
  }
}

TEST_CASE("rotated georeference survives") {
  auto p = RasterPatch::filled(4, 5, 1, 3);
  p.georef = Georef{Affine{{100, 2, 0.5, 200, 0.25, -3}}, 4326};
  CHECK(decode_tiff(encode_tiff(p)) == p);
}

TEST_CASE("integer samples are rounded and clamped to the type") {
  auto p = RasterPatch::filled(1, 3, 1);
  p.dtype_bits = 8;
  p.values = {-4, 12.6, 300};
  CHECK(decode_tiff(encode_tiff(p)).values == std::vector<double>{0, 13, 255});
}

TEST_CASE("png round-trip for 1 to 4 bands") {
  std::mt19937_64 rng(2);
  for (std::uint32_t bands = 1; bands <= 4; ++bands)
    for (std::uint32_t bits : {8u, 16u}) {
      auto p = random_patch(rng, bands, bits);
      p.band_names.assign(bands, "x");
      const auto enc = encode_png(p);
      CHECK(sniff_format(enc) == ImageFormat::Png);
      CHECK(decode_png(enc) == p);
    }
  auto five = RasterPatch::filled(2, 2, 5);
  five.dtype_bits = 8;
  CHECK_THROWS_AS(encode_png(five), ValidationError);
  auto flt = RasterPatch::filled(2, 2, 1);
  flt.dtype_bits = 32;
  CHECK_THROWS_AS(encode_png(flt), ValidationError);
}

TEST_CASE("masks choose their container by georeference") {
  auto m = LabelMask::zeros(16, 12);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = std::uint8_t(i % 3);
  m.class_map = {{1, "water"}, {2, "built-up"}};
  CHECK(mask_extension(m) == ".png");
  CHECK(sniff_format(encode_mask(m)) == ImageFormat::Png);
  CHECK(decode_mask(encode_mask(m)) == m);

  m.georef = Georef{Affine{{0, 10, 0, 0, 0, -10}}, 32633};
  m.nodata = 255;
  CHECK(mask_extension(m) == ".tif");
  CHECK(sniff_format(encode_mask(m)) == ImageFormat::Tiff);
  CHECK(decode_mask(encode_mask(m)) == m);
}

TEST_CASE("patch and mask conversion") {
  auto m = LabelMask::zeros(2, 2);
  m.values = {0, 1, 2, 255};
  CHECK(patch_to_mask(mask_to_patch(m)) == m);
  auto p = RasterPatch::filled(2, 2, 2);
  CHECK_THROWS_AS(patch_to_mask(p), ValidationError);
  auto q = RasterPatch::filled(1, 2, 1);
  q.values = {0, 256};
  CHECK_THROWS_AS(patch_to_mask(q), ValidationError);
  q.values = {0, 1.5};
  CHECK_THROWS_AS(patch_to_mask(q), ValidationError);
}

TEST_CASE("class map documents") {
  const std::map<std::uint8_t, std::string> m{{0, "background"}, {1, "water"}, {255, "édge"}};
  CHECK(class_map_from_json(class_map_to_json(m)) == m);
  CHECK_THROWS_AS(class_map_from_json("[1]"), FormatError);
  CHECK_THROWS_AS(class_map_from_json(R"({"256":"x"})"), FormatError);
  CHECK_THROWS_AS(class_map_from_json(R"({"a":"x"})"), FormatError);
  CHECK_THROWS_AS(class_map_from_json("{"), FormatError);
}

TEST_CASE("corrupt containers are format errors") {
  auto p = RasterPatch::filled(8, 8, 2, 7);
  const auto tif = encode_tiff(p);
  CHECK_THROWS_AS(decode_tiff(Bytes(tif.begin(), tif.begin() + 6)), FormatError);
  CHECK_THROWS_AS(decode_tiff(Bytes(tif.begin(), tif.begin() + 40)), FormatError);
  auto bad_magic = tif;
  bad_magic[2] = 43;
  CHECK_THROWS_AS(decode_tiff(bad_magic), FormatError);
  p.dtype_bits = 8;
  const auto png = encode_png(p);
  auto broken = png;
  broken[png.size() / 2] ^= 0xFF;
  CHECK_THROWS_AS(decode_png(broken), FormatError);
  CHECK_THROWS_AS(decode_raster(Bytes{1, 2, 3, 4, 5, 6, 7, 8}), FormatError);
  CHECK_FALSE(sniff_format(Bytes{0xFF, 0xD8, 0xFF}));
  CHECK_THROWS_AS(encode_tiff(RasterPatch{}), ValidationError);
}

TEST_CASE("jpeg frame headers are probed without decoding") {
  const auto h = probe_jpeg(jpeg_header(0xC0, 768, 1024, 3));
  REQUIRE(h);
  CHECK(h->rows == 768);
  CHECK(h->cols == 1024);
  CHECK(h->components == 3);
  CHECK(h->precision == 8);
  const auto prog = probe_jpeg(jpeg_header(0xC2, 17, 9, 1));
  REQUIRE(prog);
  CHECK(prog->rows == 17);
  CHECK(prog->components == 1);
  CHECK_FALSE(probe_jpeg(jpeg_header(0xC4, 1, 1, 1)));
  CHECK_FALSE(probe_jpeg(Bytes{0x89, 'P', 'N', 'G'}));
  auto cut = jpeg_header(0xC0, 5, 5, 3);
  cut.resize(25);
  CHECK_FALSE(probe_jpeg(cut));
}
