#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace forge {

using Bytes = std::vector<std::uint8_t>;

/// Random access to an immutable byte object. Reads are idempotent and have
/// no side effects on the object. Independent handles may be used from
/// different threads; a single handle need not be shareable.
class RangeReader {
 public:
  virtual ~RangeReader() = default;
  virtual std::uint64_t size() const = 0;
  /// Exactly `length` bytes starting at `offset`; throws IoError when the span
  /// leaves the object.
  virtual Bytes read(std::uint64_t offset, std::size_t length) const = 0;
};

class MemoryReader final : public RangeReader {
 public:
  explicit MemoryReader(Bytes data) : data_(std::move(data)) {}
  std::uint64_t size() const override { return data_.size(); }
  Bytes read(std::uint64_t offset, std::size_t length) const override;

 private:
  Bytes data_;
};

class FileReader final : public RangeReader {
 public:
  explicit FileReader(const std::string& path);
  ~FileReader() override;
  FileReader(const FileReader&) = delete;
  FileReader& operator=(const FileReader&) = delete;

  std::uint64_t size() const override { return size_; }
  Bytes read(std::uint64_t offset, std::size_t length) const override;

 private:
  std::string path_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
};

/// Plain-HTTP byte-range access: one HEAD for the size, then one
/// `Range: bytes=a-b` GET per read. Requests on one handle are serialised.
class HttpReader final : public RangeReader {
 public:
  explicit HttpReader(const std::string& url);
  ~HttpReader() override;
  std::uint64_t size() const override { return size_; }
  Bytes read(std::uint64_t offset, std::size_t length) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint64_t size_ = 0;
};

/// Records every span read through it.
class InstrumentedReader final : public RangeReader {
 public:
  explicit InstrumentedReader(std::shared_ptr<const RangeReader> inner) : inner_(std::move(inner)) {}

  std::uint64_t size() const override { return inner_->size(); }
  Bytes read(std::uint64_t offset, std::size_t length) const override;

  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans() const;
  std::uint64_t bytes_read() const;
  void reset();

 private:
  std::shared_ptr<const RangeReader> inner_;
  mutable std::mutex mu_;
  mutable std::vector<std::pair<std::uint64_t, std::uint64_t>> spans_;
};

/// `http://...` selects HttpReader; `file://path` or a plain path selects FileReader.
std::shared_ptr<RangeReader> open_reader(const std::string& uri);

/// Joins an archive root (directory or URL) with an archive name.
std::string resolve_uri(const std::string& root, const std::string& name);

}  // namespace forge
