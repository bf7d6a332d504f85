#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace forge {

/// A value that may be explicitly unknown. `std::nullopt` is the "-" marker used
/// in the source tables and is distinct from an empty string.
template <class T>
using Known = std::optional<T>;

/// Escape variant for closed enumerations.
struct Other {
  std::string text;
  friend bool operator==(const Other&, const Other&) = default;
};

/// Closed enumeration `E` plus an `other:<text>` escape.
template <class E>
using Open = std::variant<E, Other>;

enum class ClassificationProblem { ObjectDetection, PixelBased, PatchBased };
enum class ClassDefinitionFormat { TxtBbox, GeojsonBbox, CsvRle, RasterMask, FilenameLabel, JsonTags };
enum class NamingConvention { None, PerFile, PerClass };

/// Calendar interval with ISO-8601 endpoints of year, month or day precision.
struct TimeInterval {
  std::string begin;
  std::string end;
  friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

/// Image size, or a size range when min != max.
struct ImageDims {
  std::uint32_t min_rows = 0;
  std::uint32_t min_cols = 0;
  std::uint32_t max_rows = 0;
  std::uint32_t max_cols = 0;
  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

struct ScopeAttrs {
  Open<ClassificationProblem> classification_problem = ClassificationProblem::PatchBased;
  Known<std::string> intended_application;
  Open<ClassDefinitionFormat> class_definition_format = ClassDefinitionFormat::RasterMask;
  Known<std::string> annotation_method;
  Known<std::string> verification;
  Known<std::string> licence;
  Known<std::string> url;
  friend bool operator==(const ScopeAttrs&, const ScopeAttrs&) = default;
};

struct UsageAttrs {
  Known<std::string> geographic_coverage;
  Known<TimeInterval> timestamp;
  std::uint64_t data_volume_bytes = 0;
  Known<std::string> lineage;
  Known<std::vector<std::string>> class_names;
  std::uint32_t n_classes = 0;
  Open<NamingConvention> naming_convention = NamingConvention::None;
  Known<std::string> documentation_quality;
  Known<bool> continuous_development;
  friend bool operator==(const UsageAttrs&, const UsageAttrs&) = default;
};

struct IntrinsicAttrs {
  Known<std::string> file_format;
  Known<ImageDims> image_dims;
  std::uint32_t n_bands = 0;
  Known<std::vector<std::string>> band_names;
  std::uint32_t dtype_bits = 8;
  Known<double> nodata;
  Known<std::vector<double>> spatial_resolution_m;
  Known<std::string> spectral_resolution;
  Known<std::string> temporal_resolution;
  Known<std::string> imagery_type;
  Known<std::string> orientation;
  bool has_metadata = false;
  friend bool operator==(const IntrinsicAttrs&, const IntrinsicAttrs&) = default;
};

/// The attribute record that makes one training set comparable with others:
/// what it is for, how it can be used, and what its images look like.
struct DatasetDescriptor {
  std::string name;
  ScopeAttrs scope;
  UsageAttrs usage;
  IntrinsicAttrs intrinsic;
  friend bool operator==(const DatasetDescriptor&, const DatasetDescriptor&) = default;
};

struct Violation {
  std::string field;
  std::string rule;
  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Syntax-only parse. Throws ParseError on malformed lines, unknown keys,
/// duplicate keys and missing required fields, and ValidationError naming the
/// token when an enumeration value is unknown.
DatasetDescriptor parse_descriptor_unchecked(std::string_view text);

/// Parse and validate. Throws ValidationError listing every violation.
DatasetDescriptor parse_descriptor(std::string_view text);

/// Total: never throws.
std::vector<Violation> validate_descriptor(const DatasetDescriptor& d) noexcept;

/// Throws ValidationError citing the first violation when `d` is invalid.
std::string serialize_descriptor(const DatasetDescriptor& d);

DatasetDescriptor load_descriptor(const std::string& path);

std::string to_string(ClassificationProblem v);
std::string to_string(ClassDefinitionFormat v);
std::string to_string(NamingConvention v);

}  // namespace forge
