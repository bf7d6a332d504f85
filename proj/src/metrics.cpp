#include "forge/metrics.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/raster.hpp"

namespace forge {

ConfusionMatrix ConfusionMatrix::zeros(std::size_t n, std::vector<std::string> names) {
  ConfusionMatrix cm;
  cm.n = n;
  cm.counts.assign(n * n, 0);
  if (names.empty())
    for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
  if (names.size() != n) throw ValidationError("class name count does not match the matrix size");
  cm.class_names = std::move(names);
  return cm;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < n; ++i) t += at(i, i);
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < n; ++j) s += at(i, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < n; ++i) s += at(i, j);
  return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n != n) throw ValidationError("cannot merge confusion matrices of different sizes");
  if (!class_names.empty() && !other.class_names.empty() && class_names != other.class_names)
    throw ValidationError("cannot merge confusion matrices over different classes");
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
}

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                          std::optional<int> nodata) {
  if (y_true.size() != y_pred.size())
    throw ValidationError("label sequences differ in length (" + std::to_string(y_true.size()) + " vs " +
                          std::to_string(y_pred.size()) + ")");
  auto cm = ConfusionMatrix::zeros(n_classes);
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    const int t = y_true[k], p = y_pred[k];
    if (nodata && (t == *nodata || p == *nodata)) continue;
    if (t < 0 || p < 0 || std::size_t(t) >= n_classes || std::size_t(p) >= n_classes)
      throw ValidationError("label out of range at position " + std::to_string(k));
    ++cm.at(std::size_t(t), std::size_t(p));
  }
  return cm;
}

double kappa(const ConfusionMatrix& cm, std::vector<std::string>* warnings) {
  const double total = static_cast<double>(cm.total());
  if (total == 0) throw ValidationError("kappa of an empty confusion matrix");
  const double po = cm.trace() / total;
  double pe = 0;
  for (std::size_t i = 0; i < cm.n; ++i) pe += double(cm.row_sum(i)) * double(cm.col_sum(i));
  pe /= total * total;
  if (pe == 1.0) {
    if (warnings) warnings->push_back("kappa undefined (chance agreement is 1); reported as 0");
    return 0.0;
  }
  return (po - pe) / (1 - pe);
}

std::vector<std::optional<double>> f1_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.n);
  for (std::size_t c = 0; c < cm.n; ++c) {
    const auto row = cm.row_sum(c), col = cm.col_sum(c);
    if (row == 0 && col == 0) continue;
    const double tp = double(cm.at(c, c));
    const double p = col ? tp / col : 0.0;
    const double r = row ? tp / row : 0.0;
    out[c] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return out;
}

double f1_macro(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw ValidationError("F1 of an empty confusion matrix");
  double sum = 0;
  std::size_t k = 0;
  for (const auto& f : f1_per_class(cm))
    if (f) {
      sum += *f;
      ++k;
    }
  return sum / k;
}

double f1_micro(const ConfusionMatrix& cm) { return accuracy(cm); }

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw ValidationError("accuracy of an empty confusion matrix");
  return double(cm.trace()) / double(total);
}

std::vector<std::vector<double>> row_percent(const ConfusionMatrix& cm) {
  std::vector<std::vector<double>> out(cm.n, std::vector<double>(cm.n, 0.0));
  for (std::size_t i = 0; i < cm.n; ++i) {
    const auto row = cm.row_sum(i);
    if (row == 0) continue;
    for (std::size_t j = 0; j < cm.n; ++j) out[i][j] = 100.0 * double(cm.at(i, j)) / double(row);
  }
  return out;
}

AgreementReport summarize(ConfusionMatrix cm) {
  AgreementReport r;
  r.row_percent = row_percent(cm);
  if (cm.total() > 0) {
    r.kappa = kappa(cm, &r.warnings);
    r.f1_macro = f1_macro(cm);
    r.f1_micro = f1_micro(cm);
    r.accuracy = accuracy(cm);
  } else {
    r.warnings.push_back("no pixels were scored");
  }
  r.matrix = std::move(cm);
  return r;
}

AgreementReport agreement_report(const LabelMask& fine, const LabelMask& coarse, const ClassMapping& mapping,
                                 std::uint32_t factor, const std::set<std::string>& excluded) {
  if (factor < 1) throw ValidationError("factor must be at least 1");
  if (std::uint64_t(coarse.rows) * factor != fine.rows || std::uint64_t(coarse.cols) * factor != fine.cols)
    throw ValidationError("grid mismatch: fine map is " + std::to_string(fine.rows) + "x" + std::to_string(fine.cols) +
                          ", coarse map is " + std::to_string(coarse.rows) + "x" + std::to_string(coarse.cols) +
                          " at factor " + std::to_string(factor));

  // Scored classes: the coarse map's ids in ascending order, minus exclusions.
  std::map<std::string, std::uint8_t> coarse_id;
  std::vector<std::string> names;
  std::map<std::uint8_t, std::size_t> index_of;
  for (const auto& [id, name] : coarse.class_map) {
    coarse_id[name] = id;
    if (excluded.count(name)) continue;
    index_of[id] = names.size();
    names.push_back(name);
  }

  constexpr std::uint8_t kSkip = 255;
  std::map<std::uint8_t, std::uint8_t> relabel;
  std::set<std::string> unmapped;
  for (const auto v : fine.values) {
    if (relabel.count(v)) continue;
    if (fine.nodata && v == *fine.nodata) {
      relabel[v] = kSkip;
      continue;
    }
    const auto name = fine.class_map.find(v);
    if (name == fine.class_map.end()) {
      unmapped.insert("id " + std::to_string(v));
      continue;
    }
    const auto target = mapping.find(name->second);
    if (target == mapping.end()) {
      unmapped.insert(name->second);
      continue;
    }
    const auto id = coarse_id.find(target->second);
    if (id == coarse_id.end())
      throw ValidationError("mapping target '" + target->second + "' is not a class of the reference map");
    if (id->second == kSkip) throw ValidationError("class id 255 is reserved");
    relabel[v] = excluded.count(target->second) ? kSkip : id->second;
  }
  if (!unmapped.empty()) {
    std::string list;
    for (const auto& u : unmapped) list += (list.empty() ? "" : ", ") + u;
    throw ValidationError("unmapped label(s): " + list);
  }

  LabelMask remapped = fine;
  for (auto& v : remapped.values) v = relabel.at(v);
  remapped.nodata = kSkip;
  const auto up = mode_upscale(remapped, factor);

  auto cm = ConfusionMatrix::zeros(names.size(), names);
  for (std::size_t k = 0; k < up.values.size(); ++k) {
    const auto ref = coarse.values[k];
    const auto pred = up.values[k];
    if (pred == kSkip || (coarse.nodata && ref == *coarse.nodata)) continue;
    const auto ri = index_of.find(ref);
    if (ri == index_of.end()) {
      if (coarse.class_map.count(ref)) continue;  // excluded
      throw ValidationError("reference map value " + std::to_string(ref) + " has no class name");
    }
    ++cm.at(ri->second, index_of.at(pred));
  }
  return summarize(std::move(cm));
}

namespace {

double round_to(double v, int places) {
  const double s = std::pow(10.0, places);
  return std::round(v * s) / s;
}

}  // namespace

std::string report_to_json(const AgreementReport& r) {
  nlohmann::ordered_json j;
  j["class_names"] = r.matrix.class_names;
  auto counts = nlohmann::ordered_json::array();
  auto pct = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.matrix.n; ++i) {
    auto row = nlohmann::ordered_json::array();
    auto prow = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < r.matrix.n; ++c) {
      row.push_back(r.matrix.at(i, c));
      prow.push_back(round_to(r.row_percent[i][c], 2));
    }
    counts.push_back(row);
    pct.push_back(prow);
  }
  j["counts"] = counts;
  j["row_percent"] = pct;
  j["f1_macro"] = round_to(r.f1_macro, 6);
  j["f1_micro"] = round_to(r.f1_micro, 6);
  j["kappa"] = round_to(r.kappa, 6);
  j["accuracy"] = round_to(r.accuracy, 6);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

std::string matrix_to_csv(const ConfusionMatrix& cm) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  };
  std::string out = "reference\\predicted";
  for (const auto& n : cm.class_names) out += "," + quote(n);
  out += "\n";
  for (std::size_t i = 0; i < cm.n; ++i) {
    out += quote(cm.class_names[i]);
    for (std::size_t j = 0; j < cm.n; ++j) out += "," + std::to_string(cm.at(i, j));
    out += "\n";
  }
  return out;
}

}  // namespace forge
