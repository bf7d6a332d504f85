#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forge/range_reader.hpp"

namespace forge {

enum class ZipMethod : std::uint16_t { Stored = 0, Deflated = 8 };

struct ZipMember {
  std::string name;
  std::uint64_t compressed_size = 0;
  std::uint64_t uncompressed_size = 0;
  std::uint64_t offset = 0;  // of the local file header
  ZipMethod method = ZipMethod::Stored;
  std::uint32_t crc32 = 0;
};

/// Size of the window scanned for the end-of-central-directory record:
/// the fixed record plus the longest possible archive comment.
inline constexpr std::uint64_t kZipTailWindow = 22 + 0xFFFF;

/// Streams members into a standard zip file. Names are stored verbatim
/// (UTF-8 flag set). Zip64 records are written when any size, offset or the
/// entry count overflows the classic fields, or always with `force_zip64`.
class ZipWriter {
 public:
  explicit ZipWriter(const std::string& path, bool force_zip64 = false);
  ~ZipWriter();
  ZipWriter(const ZipWriter&) = delete;
  ZipWriter& operator=(const ZipWriter&) = delete;

  /// Deflated members fall back to stored when compression does not shrink them.
  void add(const std::string& name, const Bytes& data, ZipMethod method);
  /// Writes the central directory. Further adds are rejected.
  void close();

 private:
  void write(const void* p, std::size_t n);

  std::string path_;
  std::ofstream out_;
  bool force_zip64_;
  bool closed_ = false;
  std::uint64_t offset_ = 0;
  std::vector<ZipMember> members_;
};

/// Reads the end-of-central-directory record from the tail window and then the
/// central directory. Never touches member data. Throws FormatError when the
/// directory is missing or corrupt.
std::vector<ZipMember> list_members(const RangeReader& reader);

/// Reads one member's local header and data span, inflating when needed and
/// verifying the CRC-32. Throws LookupError for an unknown name and
/// FormatError on checksum mismatch.
Bytes read_member(const RangeReader& reader, const ZipMember& member);
Bytes read_member(const RangeReader& reader, const std::string& name);

/// A zip opened once: the directory is read at construction and reused.
class ZipArchive {
 public:
  explicit ZipArchive(std::shared_ptr<const RangeReader> reader);

  const std::vector<ZipMember>& members() const noexcept { return members_; }
  const ZipMember* find(const std::string& name) const;
  Bytes read(const std::string& name) const;

 private:
  std::shared_ptr<const RangeReader> reader_;
  std::vector<ZipMember> members_;
};

std::uint32_t crc32_of(const Bytes& data);
Bytes deflate_raw(const Bytes& data);
Bytes inflate_raw(const Bytes& data, std::uint64_t expected_size);

}  // namespace forge
