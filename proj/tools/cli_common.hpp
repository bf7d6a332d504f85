#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/catalog.hpp"
#include "forge/lattice.hpp"
#include "forge/range_reader.hpp"

namespace forge::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

/// Flags shared by every subcommand.
struct Config {
  std::vector<std::string> catalogs;
  std::string lattice;
  std::string archive_root;
  unsigned workers = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string format = "table";
  std::string out;
  std::vector<std::string> argv;  // as invoked, for provenance
};

/// Usage problems detected after parsing; mapped to exit 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// --archive-root, else FORGE_ARCHIVE_ROOT. Throws UsageError when neither is set.
std::string archive_root(const Config& c);

Lattice load_lattice_for(const Config& c);

/// Shard files of every --catalog directory and of its immediate subdirectories.
std::vector<std::string> catalog_shard_files(const Config& c);
Catalog load_catalog(const Config& c, const Lattice& lattice);

Bytes read_file(const fs::path& p);
void write_file(const fs::path& p, const Bytes& data);
void write_text(const fs::path& p, const std::string& text);

/// Collects inputs and outputs of one run and writes them as provenance.json.
class Provenance {
 public:
  Provenance(const Config& c, std::string command);
  void input(const fs::path& p);
  void output(const fs::path& p);
  void set(const std::string& key, nlohmann::ordered_json value);
  void warning(const std::string& w);
  /// Sorted inputs/outputs so scheduling never changes the bytes.
  void write(const fs::path& where) const;

 private:
  const Config& config_;
  std::string command_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::string> warnings_;
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
};

/// `<out>/provenance.json` for directory outputs, `<out>.provenance.json` for files.
fs::path provenance_path_for(const fs::path& out, bool out_is_dir);

std::string crc_hex(const Bytes& data);

}  // namespace forge::cli
