#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "forge/grid.hpp"

namespace forge {

/// Rows are reference labels, columns predicted labels.
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::size_t n = 0;
  std::vector<std::uint64_t> counts;  // row-major n x n

  static ConfusionMatrix zeros(std::size_t n, std::vector<std::string> names = {});

  std::uint64_t& at(std::size_t i, std::size_t j) { return counts[i * n + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * n + j]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t i) const;
  std::uint64_t col_sum(std::size_t j) const;

  /// Adds another matrix of the same shape in place.
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Pairs where either side equals `nodata` are skipped. Throws ValidationError
/// on length mismatch or a label outside [0, n_classes).
ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                          std::optional<int> nodata = std::nullopt);

/// Cohen's kappa. When chance agreement is total (p_e = 1) the value is
/// defined as 0 and a warning is appended. Throws ValidationError when empty.
double kappa(const ConfusionMatrix& cm, std::vector<std::string>* warnings = nullptr);

/// Per-class F1; nullopt for a class with neither reference nor predicted pixels.
std::vector<std::optional<double>> f1_per_class(const ConfusionMatrix& cm);
/// Mean F1 over classes with support. Throws ValidationError when empty.
double f1_macro(const ConfusionMatrix& cm);
double f1_micro(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

/// Counts as a percentage of their row; all-zero rows stay zero.
std::vector<std::vector<double>> row_percent(const ConfusionMatrix& cm);

struct AgreementReport {
  ConfusionMatrix matrix;
  std::vector<std::vector<double>> row_percent;
  double f1_macro = 0;
  double f1_micro = 0;
  double kappa = 0;
  double accuracy = 0;
  std::vector<std::string> warnings;
};

/// Class-name substitution applied to the fine map before upscaling.
using ClassMapping = std::map<std::string, std::string>;

/// `fine` is relabelled through `mapping` into the class names of `coarse`,
/// reduced by mode_upscale(factor), and scored against `coarse` (the
/// reference). Pixels whose reference or prediction is in `excluded`, or is
/// nodata, are not counted. The class order is that of coarse's ids.
AgreementReport agreement_report(const LabelMask& fine, const LabelMask& coarse, const ClassMapping& mapping,
                                 std::uint32_t factor, const std::set<std::string>& excluded = {});

/// Summary figures for an already accumulated matrix.
AgreementReport summarize(ConfusionMatrix cm);

/// {class_names, counts, row_percent, f1_macro, f1_micro, kappa, accuracy, warnings};
/// percentages and scores rounded to 2 and 6 decimals.
std::string report_to_json(const AgreementReport& r);
std::string matrix_to_csv(const ConfusionMatrix& cm);

}  // namespace forge
