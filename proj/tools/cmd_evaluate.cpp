#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "commands.hpp"
#include "forge/archive.hpp"
#include "forge/error.hpp"
#include "forge/fuse.hpp"
#include "forge/metrics.hpp"
#include "forge/raster_io.hpp"

namespace forge::cli {

namespace {

struct Pair {
  std::string label;
  Bytes ref;
  Bytes pred;
};

ClassMapping identity_of(const LabelMask& m) {
  ClassMapping out;
  for (const auto& [id, name] : m.class_map) out[name] = name;
  return out;
}

std::string table(const AgreementReport& r) {
  std::ostringstream out;
  out << matrix_to_csv(r.matrix);
  out << std::fixed << std::setprecision(6);
  out << "accuracy\t" << r.accuracy << "\nf1_macro\t" << r.f1_macro << "\nf1_micro\t" << r.f1_micro << "\nkappa\t"
      << r.kappa << "\n";
  for (const auto& w : r.warnings) out << "warning\t" << w << "\n";
  return out.str();
}

}  // namespace

int cmd_evaluate(const Config& c, const EvaluateArgs& a) {
  const bool by_manifest = !a.manifest.empty();
  if (by_manifest == !a.refs.empty()) throw UsageError("evaluate needs either --ref/--pred pairs or --manifest");
  if (a.refs.size() != a.preds.size()) throw UsageError("--ref and --pred must be given the same number of times");
  if (by_manifest && a.pred_dir.empty()) throw UsageError("--manifest needs --pred-dir");
  if (a.factor < 1) throw UsageError("--factor must be at least 1");

  Provenance prov(c, "evaluate");
  std::vector<Pair> pairs;
  std::vector<std::string> missing;
  if (by_manifest) {
    prov.input(a.manifest);
    const auto text = read_file(a.manifest);
    const auto d = fused_from_json(std::string(text.begin(), text.end()));
    const auto manifest_dir = fs::absolute(a.manifest).parent_path();
    std::string root = c.archive_root;
    if (root.empty()) root = manifest_dir.string();
    const ArchiveStore store(root);
    for (const auto& s : d.samples) {
      if (!s.mask) continue;
      const auto pred = fs::path(a.pred_dir) / fs::path(s.mask->member).filename();
      if (!fs::is_regular_file(pred)) {
        missing.push_back(s.id + ": no prediction " + pred.string());
        continue;
      }
      prov.input(pred);
      pairs.push_back({s.id, store.fetch(s.mask->archive, s.mask->member), read_file(pred)});
    }
  } else {
    for (std::size_t i = 0; i < a.refs.size(); ++i) {
      prov.input(a.refs[i]);
      prov.input(a.preds[i]);
      pairs.push_back({a.preds[i] + " vs " + a.refs[i], read_file(a.refs[i]), read_file(a.preds[i])});
    }
  }
  if (pairs.empty()) throw ValidationError("nothing to evaluate: no prediction/reference pairs");

  std::optional<ClassMapping> mapping;
  if (!a.remap.empty()) {
    prov.input(a.remap);
    mapping = load_class_mapping(a.remap);
  }
  const std::set<std::string> excluded(a.exclude.begin(), a.exclude.end());

  std::optional<ConfusionMatrix> total;
  for (const auto& p : pairs) {
    auto ref = decode_mask(p.ref);
    auto pred = decode_mask(p.pred);
    if (!mapping) {
      // Id 0 is background by convention; name it on both sides when neither does.
      if (!ref.class_map.count(0) && !pred.class_map.count(0)) {
        ref.class_map[0] = "background";
        pred.class_map[0] = "background";
      }
    }
    try {
      const auto r = agreement_report(pred, ref, mapping ? *mapping : identity_of(pred), a.factor, excluded);
      if (!total) total = r.matrix;
      else total->merge(r.matrix);
    } catch (const Error& e) {
      throw ValidationError(p.label + ": " + e.what());
    }
  }
  auto report = summarize(*total);
  for (const auto& m : missing) report.warnings.push_back(m);

  const auto json = report_to_json(report);
  std::cout << (c.format == "json" ? json : table(report));
  for (const auto& m : missing) std::cerr << "warning: " << m << "\n";
  if (!c.out.empty()) {
    write_text(c.out, json);
    prov.output(c.out);
    prov.set("pairs", pairs.size());
    prov.set("factor", a.factor);
    prov.set("excluded", a.exclude);
    for (const auto& m : missing) prov.warning(m);
    prov.write(provenance_path_for(c.out, false));
  }
  return missing.empty() ? kExitOk : kExitPartial;
}

}  // namespace forge::cli
