#include "forge/range_reader.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <httplib.h>

#include "forge/error.hpp"

namespace forge {

namespace {

void check_span(std::uint64_t offset, std::size_t length, std::uint64_t size, const std::string& what) {
  if (offset > size || length > size - offset)
    throw IoError(what + ": read [" + std::to_string(offset) + ", +" + std::to_string(length) +
                  ") past end of " + std::to_string(size) + " bytes");
}

}  // namespace

Bytes MemoryReader::read(std::uint64_t offset, std::size_t length) const {
  check_span(offset, length, data_.size(), "memory");
  return Bytes(data_.begin() + static_cast<std::ptrdiff_t>(offset),
               data_.begin() + static_cast<std::ptrdiff_t>(offset + length));
}

FileReader::FileReader(const std::string& path) : path_(path) {
  fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd_ < 0) throw IoError("cannot open " + path + ": " + std::strerror(errno));
  struct stat st {};
  if (::fstat(fd_, &st) != 0) {
    ::close(fd_);
    throw IoError("cannot stat " + path + ": " + std::strerror(errno));
  }
  size_ = static_cast<std::uint64_t>(st.st_size);
}

FileReader::~FileReader() {
  if (fd_ >= 0) ::close(fd_);
}

Bytes FileReader::read(std::uint64_t offset, std::size_t length) const {
  check_span(offset, length, size_, path_);
  Bytes out(length);
  std::size_t done = 0;
  while (done < length) {
    const auto n = ::pread(fd_, out.data() + done, length - done, static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("read failed on " + path_ + ": " + std::strerror(errno));
    }
    if (n == 0) throw IoError("unexpected end of file " + path_);
    done += static_cast<std::size_t>(n);
  }
  return out;
}

struct HttpReader::Impl {
  std::string url;
  std::string path;
  std::unique_ptr<httplib::Client> client;
  std::mutex mu;  // one connection, serialised requests
};

HttpReader::HttpReader(const std::string& url) : impl_(std::make_unique<Impl>()) {
  impl_->url = url;
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw IoError("unsupported URL scheme: " + url);
  const auto slash = url.find('/', scheme.size());
  const auto host = url.substr(0, slash);
  impl_->path = slash == std::string::npos ? "/" : url.substr(slash);
  impl_->client = std::make_unique<httplib::Client>(host);
  impl_->client->set_keep_alive(true);

  auto res = impl_->client->Head(impl_->path);
  if (!res) throw IoError("HEAD " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw IoError("HEAD " + url + " returned " + std::to_string(res->status));
  if (!res->has_header("Content-Length")) throw IoError("HEAD " + url + " has no Content-Length");
  size_ = std::stoull(res->get_header_value("Content-Length"));
}

HttpReader::~HttpReader() = default;

Bytes HttpReader::read(std::uint64_t offset, std::size_t length) const {
  check_span(offset, length, size_, impl_->url);
  if (length == 0) return {};
  const httplib::Headers headers = {
      httplib::make_range_header({{static_cast<ssize_t>(offset), static_cast<ssize_t>(offset + length - 1)}})};
  std::unique_lock lock(impl_->mu);
  auto res = impl_->client->Get(impl_->path, headers);
  lock.unlock();
  if (!res) throw IoError("GET " + impl_->url + " failed: " + httplib::to_string(res.error()));
  if (res->status == 206) {
    if (res->body.size() != length) throw IoError("short range response from " + impl_->url);
    return Bytes(res->body.begin(), res->body.end());
  }
  if (res->status == 200 && res->body.size() == size_) {
    // server ignored the Range header
    return Bytes(res->body.begin() + static_cast<std::ptrdiff_t>(offset),
                 res->body.begin() + static_cast<std::ptrdiff_t>(offset + length));
  }
  throw IoError("GET " + impl_->url + " returned " + std::to_string(res->status));
}

Bytes InstrumentedReader::read(std::uint64_t offset, std::size_t length) const {
  auto out = inner_->read(offset, length);
  std::lock_guard lock(mu_);
  spans_.emplace_back(offset, length);
  return out;
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> InstrumentedReader::spans() const {
  std::lock_guard lock(mu_);
  return spans_;
}

std::uint64_t InstrumentedReader::bytes_read() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& s : spans_) n += s.second;
  return n;
}

void InstrumentedReader::reset() {
  std::lock_guard lock(mu_);
  spans_.clear();
}

std::shared_ptr<RangeReader> open_reader(const std::string& uri) {
  if (uri.rfind("http://", 0) == 0) return std::make_shared<HttpReader>(uri);
  if (uri.rfind("https://", 0) == 0) throw IoError("https is not supported in this build: " + uri);
  if (uri.rfind("file://", 0) == 0) return std::make_shared<FileReader>(uri.substr(7));
  return std::make_shared<FileReader>(uri);
}

std::string resolve_uri(const std::string& root, const std::string& name) {
  if (root.empty()) return name;
  if (root.back() == '/') return root + name;
  return root + "/" + name;
}

}  // namespace forge
