#include "forge/schema.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {
namespace {

// ---------------------------------------------------------------------------
// value encoding

bool needs_quotes(std::string_view s, bool in_list) {
  if (s.empty() || s == "-" || s.front() == '"') return true;
  if (s.front() == ' ' || s.front() == '\t' || s.back() == ' ' || s.back() == '\t') return true;
  if (in_list && s.find(',') != std::string_view::npos) return true;
  if (s.rfind("other:", 0) == 0) return true;
  return std::any_of(s.begin(), s.end(), [](char c) { return c == '\n' || c == '\r' || c == '\t'; });
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string encode(std::string_view s, bool in_list = false) {
  return needs_quotes(s, in_list) ? quote(s) : std::string(s);
}

// Parses a quoted string starting at s[pos] == '"'; advances pos past the closing quote.
std::string unquote(std::string_view s, std::size_t& pos) {
  std::string out;
  ++pos;
  while (pos < s.size()) {
    char c = s[pos++];
    if (c == '"') return out;
    if (c != '\\') {
      out += c;
      continue;
    }
    if (pos >= s.size()) break;
    switch (char e = s[pos++]) {
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 't': out += '\t'; break;
      case '"':
      case '\\': out += e; break;
      default: throw ParseError(std::string("bad escape \\") + e);
    }
  }
  throw ParseError("unterminated quoted string");
}

std::string decode_scalar(std::string_view raw) {
  raw = text::trim(raw);
  if (raw.empty() || raw.front() != '"') return std::string(raw);
  std::size_t pos = 0;
  auto out = unquote(raw, pos);
  if (!text::trim(raw.substr(pos)).empty()) throw ParseError("trailing characters after quoted value");
  return out;
}

std::vector<std::string> decode_list(std::string_view raw) {
  std::vector<std::string> out;
  raw = text::trim(raw);
  if (raw.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    while (pos < raw.size() && (raw[pos] == ' ' || raw[pos] == '\t')) ++pos;
    if (pos < raw.size() && raw[pos] == '"') {
      out.push_back(unquote(raw, pos));
      while (pos < raw.size() && (raw[pos] == ' ' || raw[pos] == '\t')) ++pos;
      if (pos == raw.size()) return out;
      if (raw[pos] != ',') throw ParseError("expected ',' after quoted list element");
      ++pos;
      continue;
    }
    const auto comma = raw.find(',', pos);
    const auto piece = raw.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.emplace_back(text::trim(piece));
    if (comma == std::string_view::npos) return out;
    pos = comma + 1;
  }
}

bool is_unknown(std::string_view raw) { return text::trim(raw) == "-"; }

// ---------------------------------------------------------------------------
// enumerations

template <class E>
struct EnumTable {
  std::vector<std::pair<E, std::string_view>> tokens;

  std::string write(const Open<E>& v) const {
    if (const auto* o = std::get_if<Other>(&v)) return "other:" + encode(o->text);
    const E e = std::get<E>(v);
    for (const auto& [k, tok] : tokens)
      if (k == e) return std::string(tok);
    return "other:";
  }

  Open<E> read(std::string_view raw) const {
    const auto t = text::trim(raw);
    if (t.rfind("other:", 0) == 0) return Other{decode_scalar(t.substr(6))};
    for (const auto& [k, tok] : tokens)
      if (tok == t) return k;
    throw ValidationError("unknown token '" + std::string(t) + "'");
  }
};

const EnumTable<ClassificationProblem> kProblems{{
    {ClassificationProblem::ObjectDetection, "object-detection"},
    {ClassificationProblem::PixelBased, "pixel-based"},
    {ClassificationProblem::PatchBased, "patch-based"},
}};

const EnumTable<ClassDefinitionFormat> kFormats{{
    {ClassDefinitionFormat::TxtBbox, "txt-bbox"},
    {ClassDefinitionFormat::GeojsonBbox, "geojson-bbox"},
    {ClassDefinitionFormat::CsvRle, "csv-rle"},
    {ClassDefinitionFormat::RasterMask, "raster-mask"},
    {ClassDefinitionFormat::FilenameLabel, "filename-label"},
    {ClassDefinitionFormat::JsonTags, "json-tags"},
}};

const EnumTable<NamingConvention> kNaming{{
    {NamingConvention::None, "none"},
    {NamingConvention::PerFile, "per-file"},
    {NamingConvention::PerClass, "per-class"},
}};

// ---------------------------------------------------------------------------
// typed codecs

template <class T>
T read_uint(std::string_view raw) {
  auto v = text::parse_number<T>(raw);
  if (!v) throw ParseError("expected a non-negative integer, got '" + std::string(text::trim(raw)) + "'");
  return *v;
}

double read_double(std::string_view raw) {
  auto v = text::parse_number<double>(raw);
  if (!v) throw ParseError("expected a number, got '" + std::string(text::trim(raw)) + "'");
  return *v;
}

bool read_bool(std::string_view raw) {
  const auto t = text::lower(text::trim(raw));
  if (t == "yes" || t == "true") return true;
  if (t == "no" || t == "false") return false;
  throw ParseError("expected yes/no, got '" + t + "'");
}

std::string write_bool(bool b) { return b ? "yes" : "no"; }

const std::regex& iso_date() {
  static const std::regex re(R"(\d{4}(-\d{2}(-\d{2})?)?)");
  return re;
}

TimeInterval read_interval(std::string_view raw) {
  const auto t = std::string(text::trim(raw));
  const auto sep = t.find("..");
  TimeInterval out;
  out.begin = std::string(text::trim(std::string_view(t).substr(0, sep)));
  out.end = sep == std::string::npos ? out.begin : std::string(text::trim(std::string_view(t).substr(sep + 2)));
  if (!std::regex_match(out.begin, iso_date()) || !std::regex_match(out.end, iso_date()))
    throw ParseError("expected YYYY[-MM[-DD]][..YYYY[-MM[-DD]]], got '" + t + "'");
  return out;
}

std::string write_interval(const TimeInterval& t) {
  return t.begin == t.end ? t.begin : t.begin + ".." + t.end;
}

std::pair<std::uint32_t, std::uint32_t> read_size(std::string_view s) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) throw ParseError("expected ROWSxCOLS, got '" + std::string(s) + "'");
  return {read_uint<std::uint32_t>(s.substr(0, x)), read_uint<std::uint32_t>(s.substr(x + 1))};
}

ImageDims read_dims(std::string_view raw) {
  const auto t = text::trim(raw);
  const auto sep = t.find("..");
  const auto [r0, c0] = read_size(text::trim(t.substr(0, sep)));
  auto [r1, c1] = std::pair{r0, c0};
  if (sep != std::string_view::npos) std::tie(r1, c1) = read_size(text::trim(t.substr(sep + 2)));
  return {r0, c0, r1, c1};
}

std::string write_dims(const ImageDims& d) {
  auto one = [](std::uint32_t r, std::uint32_t c) { return std::to_string(r) + "x" + std::to_string(c); };
  if (d.min_rows == d.max_rows && d.min_cols == d.max_cols) return one(d.min_rows, d.min_cols);
  return one(d.min_rows, d.min_cols) + ".." + one(d.max_rows, d.max_cols);
}

std::string write_list(const std::vector<std::string>& items) {
  std::vector<std::string> enc;
  enc.reserve(items.size());
  for (const auto& s : items) enc.push_back(encode(s, true));
  return text::join(enc, ", ");
}

std::vector<double> read_doubles(std::string_view raw) {
  std::vector<double> out;
  for (const auto& piece : decode_list(raw)) out.push_back(read_double(piece));
  return out;
}

std::string write_doubles(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (double d : v) parts.push_back(text::format_double(d));
  return text::join(parts, ", ");
}

// Wraps a codec for an optional field: "-" <-> nullopt.
template <class T, class Read, class Write>
struct KnownCodec {
  Read read;
  Write write;
  void parse(Known<T>& dst, std::string_view raw) const {
    if (is_unknown(raw))
      dst.reset();
    else
      dst = read(raw);
  }
  std::string emit(const Known<T>& v) const { return v ? write(*v) : "-"; }
};

template <class T, class Read, class Write>
KnownCodec<T, Read, Write> known(Read r, Write w) {
  return {std::move(r), std::move(w)};
}

// ---------------------------------------------------------------------------
// field table

struct Field {
  std::string_view key;
  bool required;
  std::function<void(DatasetDescriptor&, std::string_view)> parse;
  std::function<std::string(const DatasetDescriptor&)> emit;
};

template <class Member>
Field text_field(std::string_view key, Member member) {
  auto codec = known<std::string>([](std::string_view r) { return decode_scalar(r); },
                                  [](const std::string& s) { return encode(s); });
  return {key, false, [=](DatasetDescriptor& d, std::string_view r) { codec.parse(member(d), r); },
          [=](const DatasetDescriptor& d) { return codec.emit(member(d)); }};
}

template <class Member, class Codec>
Field optional_field(std::string_view key, Member member, Codec codec) {
  return {key, false, [=](DatasetDescriptor& d, std::string_view r) { codec.parse(member(d), r); },
          [=](const DatasetDescriptor& d) { return codec.emit(member(d)); }};
}

const std::vector<Field>& fields() {
  using D = DatasetDescriptor;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"name", true, [](D& d, std::string_view r) { d.name = decode_scalar(r); },
                 [](const D& d) { return encode(d.name); }});
    f.push_back({"scope.classification_problem", true,
                 [](D& d, std::string_view r) { d.scope.classification_problem = kProblems.read(r); },
                 [](const D& d) { return kProblems.write(d.scope.classification_problem); }});
    f.push_back(text_field("scope.intended_application", [](auto& d) -> auto& { return d.scope.intended_application; }));
    f.push_back({"scope.class_definition_format", true,
                 [](D& d, std::string_view r) { d.scope.class_definition_format = kFormats.read(r); },
                 [](const D& d) { return kFormats.write(d.scope.class_definition_format); }});
    f.push_back(text_field("scope.annotation_method", [](auto& d) -> auto& { return d.scope.annotation_method; }));
    f.push_back(text_field("scope.verification", [](auto& d) -> auto& { return d.scope.verification; }));
    f.push_back(text_field("scope.licence", [](auto& d) -> auto& { return d.scope.licence; }));
    f.push_back(text_field("scope.url", [](auto& d) -> auto& { return d.scope.url; }));

    f.push_back(text_field("usage.geographic_coverage", [](auto& d) -> auto& { return d.usage.geographic_coverage; }));
    f.push_back(optional_field("usage.timestamp", [](auto& d) -> auto& { return d.usage.timestamp; },
                               known<TimeInterval>(read_interval, write_interval)));
    f.push_back({"usage.data_volume_bytes", true,
                 [](D& d, std::string_view r) { d.usage.data_volume_bytes = read_uint<std::uint64_t>(r); },
                 [](const D& d) { return std::to_string(d.usage.data_volume_bytes); }});
    f.push_back(text_field("usage.lineage", [](auto& d) -> auto& { return d.usage.lineage; }));
    f.push_back(optional_field("usage.class_names", [](auto& d) -> auto& { return d.usage.class_names; },
                               known<std::vector<std::string>>(decode_list, write_list)));
    f.push_back({"usage.n_classes", true,
                 [](D& d, std::string_view r) { d.usage.n_classes = read_uint<std::uint32_t>(r); },
                 [](const D& d) { return std::to_string(d.usage.n_classes); }});
    f.push_back({"usage.naming_convention", true,
                 [](D& d, std::string_view r) { d.usage.naming_convention = kNaming.read(r); },
                 [](const D& d) { return kNaming.write(d.usage.naming_convention); }});
    f.push_back(text_field("usage.documentation_quality", [](auto& d) -> auto& { return d.usage.documentation_quality; }));
    f.push_back(optional_field("usage.continuous_development",
                               [](auto& d) -> auto& { return d.usage.continuous_development; },
                               known<bool>(read_bool, write_bool)));

    f.push_back(text_field("intrinsic.file_format", [](auto& d) -> auto& { return d.intrinsic.file_format; }));
    f.push_back(optional_field("intrinsic.image_dims", [](auto& d) -> auto& { return d.intrinsic.image_dims; },
                               known<ImageDims>(read_dims, write_dims)));
    f.push_back({"intrinsic.n_bands", true,
                 [](D& d, std::string_view r) { d.intrinsic.n_bands = read_uint<std::uint32_t>(r); },
                 [](const D& d) { return std::to_string(d.intrinsic.n_bands); }});
    f.push_back(optional_field("intrinsic.band_names", [](auto& d) -> auto& { return d.intrinsic.band_names; },
                               known<std::vector<std::string>>(decode_list, write_list)));
    f.push_back({"intrinsic.dtype_bits", true,
                 [](D& d, std::string_view r) { d.intrinsic.dtype_bits = read_uint<std::uint32_t>(r); },
                 [](const D& d) { return std::to_string(d.intrinsic.dtype_bits); }});
    f.push_back(optional_field("intrinsic.nodata", [](auto& d) -> auto& { return d.intrinsic.nodata; },
                               known<double>(read_double, text::format_double)));
    f.push_back(optional_field("intrinsic.spatial_resolution_m",
                               [](auto& d) -> auto& { return d.intrinsic.spatial_resolution_m; },
                               known<std::vector<double>>(read_doubles, write_doubles)));
    f.push_back(text_field("intrinsic.spectral_resolution", [](auto& d) -> auto& { return d.intrinsic.spectral_resolution; }));
    f.push_back(text_field("intrinsic.temporal_resolution", [](auto& d) -> auto& { return d.intrinsic.temporal_resolution; }));
    f.push_back(text_field("intrinsic.imagery_type", [](auto& d) -> auto& { return d.intrinsic.imagery_type; }));
    f.push_back(text_field("intrinsic.orientation", [](auto& d) -> auto& { return d.intrinsic.orientation; }));
    f.push_back({"intrinsic.has_metadata", true,
                 [](D& d, std::string_view r) { d.intrinsic.has_metadata = read_bool(r); },
                 [](const D& d) { return write_bool(d.intrinsic.has_metadata); }});
    return f;
  }();
  return table;
}

std::string describe(const std::vector<Violation>& vs) {
  std::string out;
  for (const auto& v : vs) {
    if (!out.empty()) out += "; ";
    out += v.field + ": " + v.rule;
  }
  return out;
}

}  // namespace

DatasetDescriptor parse_descriptor_unchecked(std::string_view doc) {
  std::map<std::string_view, const Field*> by_key;
  for (const auto& f : fields()) by_key.emplace(f.key, &f);

  DatasetDescriptor d;
  std::set<std::string_view> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= doc.size()) {
    const auto nl = doc.find('\n', pos);
    const auto line = doc.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? doc.size() + 1 : nl + 1;
    ++line_no;

    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'category.field = value'", line_no);
    const auto key = text::trim(t.substr(0, eq));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ParseError("unknown field", line_no, std::string(key));
    if (!seen.insert(it->first).second) throw ParseError("duplicate field", line_no, std::string(key));
    if (it->second->required && is_unknown(t.substr(eq + 1)))
      throw ParseError("required field cannot be unknown", line_no, std::string(key));
    try {
      it->second->parse(d, t.substr(eq + 1));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no, std::string(key));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + std::string(key) + ": " + e.what());
    }
  }
  for (const auto& f : fields()) {
    if (f.required && !seen.count(f.key)) throw ParseError("missing required field", 0, std::string(f.key));
  }
  return d;
}

DatasetDescriptor parse_descriptor(std::string_view doc) {
  auto d = parse_descriptor_unchecked(doc);
  if (auto vs = validate_descriptor(d); !vs.empty()) throw ValidationError(describe(vs));
  return d;
}

std::vector<Violation> validate_descriptor(const DatasetDescriptor& d) noexcept {
  std::vector<Violation> out;
  try {
    if (d.name.empty()) out.push_back({"name", "must be nonempty"});
    if (d.usage.class_names && !d.usage.class_names->empty() &&
        d.usage.class_names->size() != d.usage.n_classes) {
      out.push_back({"usage.n_classes", "n_classes (" + std::to_string(d.usage.n_classes) +
                                            ") != length(class_names) (" +
                                            std::to_string(d.usage.class_names->size()) + ")"});
    }
    if (d.intrinsic.dtype_bits != 8 && d.intrinsic.dtype_bits != 16 && d.intrinsic.dtype_bits != 32)
      out.push_back({"intrinsic.dtype_bits", "must be one of 8, 16, 32"});
    if (d.usage.data_volume_bytes == 0) out.push_back({"usage.data_volume_bytes", "must be > 0"});
  } catch (...) {
    // allocation failure while describing; report what we have
  }
  return out;
}

std::string serialize_descriptor(const DatasetDescriptor& d) {
  if (auto vs = validate_descriptor(d); !vs.empty())
    throw ValidationError("refusing to serialize invalid descriptor: " + vs.front().field + ": " + vs.front().rule);
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.emit(d) << '\n';
  return out.str();
}

DatasetDescriptor load_descriptor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open descriptor " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_descriptor(ss.str());
}

std::string to_string(ClassificationProblem v) { return kProblems.write(v); }
std::string to_string(ClassDefinitionFormat v) { return kFormats.write(v); }
std::string to_string(NamingConvention v) { return kNaming.write(v); }

}  // namespace forge
