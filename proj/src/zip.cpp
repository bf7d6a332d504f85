#include "forge/zip.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

#include "forge/error.hpp"

namespace forge {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint32_t kZip64EocdSig = 0x06064b50;
constexpr std::uint32_t kZip64LocatorSig = 0x07064b50;
constexpr std::uint32_t k32Max = 0xFFFFFFFFu;
constexpr std::uint16_t k16Max = 0xFFFFu;
constexpr std::uint16_t kUtf8Flag = 1u << 11;
constexpr std::uint16_t kDosDate1980 = (0 << 9) | (1 << 5) | 1;

struct Put {
  Bytes b;
  void u16(std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back(v >> 8);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  }
  void str(const std::string& s) { b.insert(b.end(), s.begin(), s.end()); }
};

std::uint16_t get16(const Bytes& b, std::size_t at) {
  if (at + 2 > b.size()) throw FormatError("zip: truncated record");
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
std::uint32_t get32(const Bytes& b, std::size_t at) {
  if (at + 4 > b.size()) throw FormatError("zip: truncated record");
  return std::uint32_t(b[at]) | (std::uint32_t(b[at + 1]) << 8) | (std::uint32_t(b[at + 2]) << 16) |
         (std::uint32_t(b[at + 3]) << 24);
}
std::uint64_t get64(const Bytes& b, std::size_t at) {
  return std::uint64_t(get32(b, at)) | (std::uint64_t(get32(b, at + 4)) << 32);
}

}  // namespace

std::uint32_t crc32_of(const Bytes& data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - done, 1u << 30));
    crc = ::crc32(crc, data.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes deflate_raw(const Bytes& data) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("zlib deflateInit2 failed");
  Bytes out(deflateBound(&zs, static_cast<uLong>(data.size())) + 64);
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zlib deflate failed");
  out.resize(zs.total_out);
  return out;
}

Bytes inflate_raw(const Bytes& data, std::uint64_t expected_size) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error("zlib inflateInit2 failed");
  Bytes out(expected_size + 1);
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected_size) throw FormatError("zip: corrupt deflate stream");
  out.resize(expected_size);
  return out;
}

// ---------------------------------------------------------------------------
// writer

ZipWriter::ZipWriter(const std::string& path, bool force_zip64)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), force_zip64_(force_zip64) {
  if (!out_) throw IoError("cannot create archive " + path);
}

ZipWriter::~ZipWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void ZipWriter::write(const void* p, std::size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed on " + path_);
  offset_ += n;
}

void ZipWriter::add(const std::string& name, const Bytes& data, ZipMethod method) {
  if (closed_) throw Error("zip writer already closed: " + path_);
  if (name.empty() || name.size() > k16Max) throw ValidationError("zip member name length out of range");

  ZipMember m;
  m.name = name;
  m.offset = offset_;
  m.uncompressed_size = data.size();
  m.crc32 = crc32_of(data);
  Bytes packed;
  if (method == ZipMethod::Deflated) {
    packed = deflate_raw(data);
    if (packed.size() >= data.size()) method = ZipMethod::Stored;
  }
  m.method = method;
  const Bytes& payload = method == ZipMethod::Deflated ? packed : data;
  m.compressed_size = payload.size();

  const bool zip64 = force_zip64_ || m.uncompressed_size >= k32Max || m.compressed_size >= k32Max;
  Put h;
  h.u32(kLocalSig);
  h.u16(zip64 ? 45 : 20);
  h.u16(kUtf8Flag);
  h.u16(static_cast<std::uint16_t>(method));
  h.u16(0);
  h.u16(kDosDate1980);
  h.u32(m.crc32);
  h.u32(zip64 ? k32Max : static_cast<std::uint32_t>(m.compressed_size));
  h.u32(zip64 ? k32Max : static_cast<std::uint32_t>(m.uncompressed_size));
  h.u16(static_cast<std::uint16_t>(name.size()));
  h.u16(zip64 ? 20 : 0);
  h.str(name);
  if (zip64) {
    h.u16(0x0001);
    h.u16(16);
    h.u64(m.uncompressed_size);
    h.u64(m.compressed_size);
  }
  try {
    write(h.b.data(), h.b.size());
    write(payload.data(), payload.size());
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (member " + name + ")");
  }
  members_.push_back(std::move(m));
}

void ZipWriter::close() {
  if (closed_) return;
  closed_ = true;
  const std::uint64_t cd_offset = offset_;
  for (const auto& m : members_) {
    const bool big_u = force_zip64_ || m.uncompressed_size >= k32Max;
    const bool big_c = force_zip64_ || m.compressed_size >= k32Max;
    const bool big_o = force_zip64_ || m.offset >= k32Max;
    const std::uint16_t extra_len = static_cast<std::uint16_t>((big_u + big_c + big_o) * 8);
    Put c;
    c.u32(kCentralSig);
    c.u16((3 << 8) | 45);  // made by: unix, 4.5
    c.u16(extra_len ? 45 : 20);
    c.u16(kUtf8Flag);
    c.u16(static_cast<std::uint16_t>(m.method));
    c.u16(0);
    c.u16(kDosDate1980);
    c.u32(m.crc32);
    c.u32(big_c ? k32Max : static_cast<std::uint32_t>(m.compressed_size));
    c.u32(big_u ? k32Max : static_cast<std::uint32_t>(m.uncompressed_size));
    c.u16(static_cast<std::uint16_t>(m.name.size()));
    c.u16(extra_len ? extra_len + 4 : 0);
    c.u16(0);
    c.u16(0);
    c.u16(0);
    c.u32(0100644u << 16);
    c.u32(big_o ? k32Max : static_cast<std::uint32_t>(m.offset));
    c.str(m.name);
    if (extra_len) {
      c.u16(0x0001);
      c.u16(extra_len);
      if (big_u) c.u64(m.uncompressed_size);
      if (big_c) c.u64(m.compressed_size);
      if (big_o) c.u64(m.offset);
    }
    write(c.b.data(), c.b.size());
  }
  const std::uint64_t cd_size = offset_ - cd_offset;
  const std::uint64_t count = members_.size();
  const bool zip64 = force_zip64_ || count >= k16Max || cd_size >= k32Max || cd_offset >= k32Max;

  Put e;
  if (zip64) {
    const std::uint64_t z64_offset = offset_;
    e.u32(kZip64EocdSig);
    e.u64(44);
    e.u16((3 << 8) | 45);
    e.u16(45);
    e.u32(0);
    e.u32(0);
    e.u64(count);
    e.u64(count);
    e.u64(cd_size);
    e.u64(cd_offset);
    e.u32(kZip64LocatorSig);
    e.u32(0);
    e.u64(z64_offset);
    e.u32(1);
  }
  e.u32(kEocdSig);
  e.u16(0);
  e.u16(0);
  e.u16(zip64 ? k16Max : static_cast<std::uint16_t>(count));
  e.u16(zip64 ? k16Max : static_cast<std::uint16_t>(count));
  e.u32(zip64 ? k32Max : static_cast<std::uint32_t>(cd_size));
  e.u32(zip64 ? k32Max : static_cast<std::uint32_t>(cd_offset));
  e.u16(0);
  write(e.b.data(), e.b.size());
  out_.close();
  if (!out_) throw IoError("close failed on " + path_);
}

// ---------------------------------------------------------------------------
// reader

std::vector<ZipMember> list_members(const RangeReader& reader) {
  const std::uint64_t size = reader.size();
  if (size < 22) throw FormatError("zip: too small for an end-of-central-directory record");
  const std::uint64_t tail_len = std::min(size, kZipTailWindow);
  const std::uint64_t tail_start = size - tail_len;
  const Bytes tail = reader.read(tail_start, static_cast<std::size_t>(tail_len));

  std::optional<std::size_t> eocd;
  for (std::size_t i = tail.size() - 22 + 1; i-- > 0;) {
    if (get32(tail, i) == kEocdSig && i + 22 + get16(tail, i + 20) <= tail.size()) {
      eocd = i;
      break;
    }
  }
  if (!eocd) throw FormatError("zip: end-of-central-directory record not found");

  std::uint64_t count = get16(tail, *eocd + 10);
  std::uint64_t cd_size = get32(tail, *eocd + 12);
  std::uint64_t cd_offset = get32(tail, *eocd + 16);
  const std::uint64_t eocd_abs = tail_start + *eocd;

  // Zip64 locator sits right before the classic record.
  if (eocd_abs >= 20) {
    const Bytes loc = *eocd >= 20 ? Bytes(tail.begin() + static_cast<std::ptrdiff_t>(*eocd - 20),
                                          tail.begin() + static_cast<std::ptrdiff_t>(*eocd))
                                  : reader.read(eocd_abs - 20, 20);
    if (get32(loc, 0) == kZip64LocatorSig) {
      const std::uint64_t z64 = get64(loc, 8);
      if (z64 + 56 > eocd_abs) throw FormatError("zip64: end-of-central-directory offset out of range");
      const Bytes rec = z64 >= tail_start ? Bytes(tail.begin() + static_cast<std::ptrdiff_t>(z64 - tail_start),
                                                  tail.begin() + static_cast<std::ptrdiff_t>(z64 - tail_start + 56))
                                          : reader.read(z64, 56);
      if (get32(rec, 0) != kZip64EocdSig) throw FormatError("zip64: bad end-of-central-directory signature");
      count = get64(rec, 32);
      cd_size = get64(rec, 40);
      cd_offset = get64(rec, 48);
    }
  }

  if (cd_offset > eocd_abs || cd_size > eocd_abs - cd_offset)
    throw FormatError("zip: central directory out of range");
  if (cd_size > std::numeric_limits<std::size_t>::max() / 2) throw FormatError("zip: central directory too large");

  const Bytes cd = cd_offset >= tail_start && cd_offset + cd_size <= size
                       ? Bytes(tail.begin() + static_cast<std::ptrdiff_t>(cd_offset - tail_start),
                               tail.begin() + static_cast<std::ptrdiff_t>(cd_offset - tail_start + cd_size))
                       : reader.read(cd_offset, static_cast<std::size_t>(cd_size));

  std::vector<ZipMember> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, cd_size / 46 + 1)));
  std::size_t p = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    if (p + 46 > cd.size() || get32(cd, p) != kCentralSig) throw FormatError("zip: corrupt central directory");
    ZipMember m;
    const auto method = get16(cd, p + 10);
    if (method != 0 && method != 8) throw FormatError("zip: unsupported compression method " + std::to_string(method));
    m.method = static_cast<ZipMethod>(method);
    m.crc32 = get32(cd, p + 16);
    m.compressed_size = get32(cd, p + 20);
    m.uncompressed_size = get32(cd, p + 24);
    const std::size_t nlen = get16(cd, p + 28);
    const std::size_t xlen = get16(cd, p + 30);
    const std::size_t clen = get16(cd, p + 32);
    m.offset = get32(cd, p + 42);
    if (p + 46 + nlen + xlen + clen > cd.size()) throw FormatError("zip: central directory entry overruns");
    m.name.assign(reinterpret_cast<const char*>(cd.data() + p + 46), nlen);

    std::size_t x = p + 46 + nlen;
    const std::size_t xend = x + xlen;
    while (x + 4 <= xend) {
      const auto id = get16(cd, x);
      const auto len = get16(cd, x + 2);
      std::size_t f = x + 4;
      if (f + len > xend) throw FormatError("zip: extra field overruns");
      if (id == 0x0001) {
        auto take = [&](std::uint64_t& v) {
          if (v != k32Max) return;
          if (f + 8 > x + 4 + len) throw FormatError("zip64: short extended information field");
          v = get64(cd, f);
          f += 8;
        };
        take(m.uncompressed_size);
        take(m.compressed_size);
        take(m.offset);
      }
      x += 4 + len;
    }
    if (m.offset + 30 > cd_offset || m.compressed_size > cd_offset - m.offset - 30)
      throw FormatError("zip: member '" + m.name + "' lies outside the data area");
    out.push_back(std::move(m));
    p += 46 + nlen + xlen + clen;
  }
  return out;
}

Bytes read_member(const RangeReader& reader, const ZipMember& m) {
  const Bytes header = reader.read(m.offset, 30);
  if (get32(header, 0) != kLocalSig) throw FormatError("zip: bad local header for '" + m.name + "'");
  const std::uint64_t data_at = m.offset + 30 + get16(header, 26) + get16(header, 28);
  Bytes raw = reader.read(data_at, static_cast<std::size_t>(m.compressed_size));
  Bytes data = m.method == ZipMethod::Deflated ? inflate_raw(raw, m.uncompressed_size) : std::move(raw);
  if (data.size() != m.uncompressed_size) throw FormatError("zip: size mismatch for '" + m.name + "'");
  if (crc32_of(data) != m.crc32) throw FormatError("zip: checksum mismatch for '" + m.name + "'");
  return data;
}

Bytes read_member(const RangeReader& reader, const std::string& name) {
  for (const auto& m : list_members(reader))
    if (m.name == name) return read_member(reader, m);
  throw LookupError("zip: no member named '" + name + "'");
}

ZipArchive::ZipArchive(std::shared_ptr<const RangeReader> reader)
    : reader_(std::move(reader)), members_(list_members(*reader_)) {}

const ZipMember* ZipArchive::find(const std::string& name) const {
  for (const auto& m : members_)
    if (m.name == name) return &m;
  return nullptr;
}

Bytes ZipArchive::read(const std::string& name) const {
  const auto* m = find(name);
  if (!m) throw LookupError("zip: no member named '" + name + "'");
  return read_member(*reader_, *m);
}

}  // namespace forge
