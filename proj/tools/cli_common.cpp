#include "cli_common.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "forge/error.hpp"
#include "forge/zip.hpp"

#ifndef FORGE_VERSION
#define FORGE_VERSION "0.0.0"
#endif

namespace forge::cli {

std::string archive_root(const Config& c) {
  if (!c.archive_root.empty()) return c.archive_root;
  if (const char* env = std::getenv("FORGE_ARCHIVE_ROOT"); env && *env) return env;
  throw UsageError("no archive root: pass --archive-root or set FORGE_ARCHIVE_ROOT");
}

Lattice load_lattice_for(const Config& c) {
  return c.lattice.empty() ? default_lattice() : load_lattice(c.lattice);
}

std::vector<std::string> catalog_shard_files(const Config& c) {
  if (c.catalogs.empty()) throw UsageError("no catalog: pass --catalog <dir>");
  std::vector<std::string> out;
  for (const auto& dir : c.catalogs) {
    if (!fs::is_directory(dir)) throw UsageError("catalog directory not found: " + dir);
    for (auto& f : find_shard_files(dir)) out.push_back(std::move(f));
    std::vector<fs::path> subdirs;
    for (const auto& de : fs::directory_iterator(dir))
      if (de.is_directory()) subdirs.push_back(de.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs)
      for (auto& f : find_shard_files(sub.string())) out.push_back(std::move(f));
  }
  return out;
}

Catalog load_catalog(const Config& c, const Lattice& lattice) {
  const auto files = catalog_shard_files(c);
  return load_shards(files, &lattice, c.workers);
}

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("cannot read " + p.string());
  return out;
}

void write_file(const fs::path& p, const Bytes& data) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("cannot write " + p.string());
}

void write_text(const fs::path& p, const std::string& text) { write_file(p, Bytes(text.begin(), text.end())); }

std::string crc_hex(const Bytes& data) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc32_of(data));
  return buf;
}

Provenance::Provenance(const Config& c, std::string command) : config_(c), command_(std::move(command)) {}

void Provenance::input(const fs::path& p) { inputs_.push_back(p.string()); }
void Provenance::output(const fs::path& p) { outputs_.push_back(p.string()); }
void Provenance::set(const std::string& key, nlohmann::ordered_json value) { extra_[key] = std::move(value); }
void Provenance::warning(const std::string& w) { warnings_.push_back(w); }

void Provenance::write(const fs::path& where) const {
  nlohmann::ordered_json j;
  j["tool"] = "forge";
  j["version"] = FORGE_VERSION;
  j["command"] = command_;
  j["arguments"] = config_.argv;
  if (config_.seed_given || command_ == "fuse" || command_ == "split") j["seed"] = config_.seed;
  else j["seed"] = nullptr;
  j["workers"] = config_.workers;

  auto ins = inputs_;
  std::sort(ins.begin(), ins.end());
  ins.erase(std::unique(ins.begin(), ins.end()), ins.end());
  auto inputs = nlohmann::ordered_json::array();
  for (const auto& p : ins) {
    nlohmann::ordered_json e;
    e["path"] = p;
    if (fs::is_regular_file(p)) {
      const auto data = read_file(p);
      e["bytes"] = data.size();
      e["crc32"] = crc_hex(data);
    }
    inputs.push_back(std::move(e));
  }
  j["inputs"] = std::move(inputs);
  auto outs = outputs_;
  std::sort(outs.begin(), outs.end());
  outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
  j["outputs"] = outs;
  for (const auto& [k, v] : extra_.items()) j[k] = v;
  j["warnings"] = warnings_;
  write_text(where, j.dump(2) + "\n");
}

fs::path provenance_path_for(const fs::path& out, bool out_is_dir) {
  if (out_is_dir) return out / "provenance.json";
  return fs::path(out.string() + ".provenance.json");
}

}  // namespace forge::cli
