// Fixture writer and reader for the cross-implementation conformance checks.
//
//   zip_fixture write <dir>          archives and images plus their expected contents
//   zip_fixture dump <zip> <dir>     every member of a zip written out under <dir>
//   zip_fixture decode <image>       decoded raster as JSON on stdout

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "forge/error.hpp"
#include "forge/raster_io.hpp"
#include "forge/zip.hpp"

namespace fs = std::filesystem;
using namespace forge;

namespace {

void put(const fs::path& p, const Bytes& b) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

Bytes get(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

nlohmann::json describe(const RasterPatch& p) {
  return {{"rows", p.rows}, {"cols", p.cols}, {"bands", p.bands}, {"dtype_bits", p.dtype_bits}, {"values", p.values}};
}

void write_fixtures(const fs::path& dir) {
  fs::create_directories(dir);
  std::mt19937_64 rng(11);
  {
    ZipWriter zw((dir / "ours.zip").string());
    for (int i = 0; i < 12; ++i) {
      const std::size_t size = std::vector<std::size_t>{0, 1, 777, 65536, 200000}[i % 5];
      Bytes data(size);
      for (auto& b : data) b = std::uint8_t(i % 2 ? rng() : rng() % 3);
      const auto name = "sub" + std::to_string(i % 3) + "/m" + std::to_string(i) + ".bin";
      zw.add(name, data, i % 3 ? ZipMethod::Deflated : ZipMethod::Stored);
      put(dir / "expected" / name, data);
    }
    zw.close();
  }
  const std::vector<std::tuple<std::string, std::uint32_t, std::uint32_t>> images = {
      {"png", 1, 8}, {"png", 3, 8}, {"png", 4, 8}, {"png", 1, 16}, {"tif", 1, 8}, {"tif", 1, 16}};
  int k = 0;
  for (const auto& [ext, bands, bits] : images) {
    auto p = RasterPatch::filled(5 + k, 7 + k, bands);
    p.dtype_bits = bits;
    for (auto& v : p.values) v = double(rng() % (bits == 8 ? 256 : 65536));
    const auto stem = "img" + std::to_string(k++) + "_" + std::to_string(bands) + "b" + std::to_string(bits);
    put(dir / "images" / (stem + "." + ext), ext == "png" ? encode_png(p) : encode_tiff(p));
    std::ofstream(dir / "images" / (stem + ".json")) << describe(p).dump();
  }
}

void dump(const fs::path& zip, const fs::path& dir) {
  const FileReader reader(zip.string());
  for (const auto& m : list_members(reader)) put(dir / m.name, read_member(reader, m));
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const std::string mode = argc > 1 ? argv[1] : "";
    if (mode == "write" && argc == 3) {
      write_fixtures(argv[2]);
    } else if (mode == "dump" && argc == 4) {
      dump(argv[2], argv[3]);
    } else if (mode == "decode" && argc == 3) {
      std::cout << describe(decode_raster(get(argv[2]))).dump() << "\n";
    } else {
      std::cerr << "usage: zip_fixture write <dir> | dump <zip> <dir> | decode <image>\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
