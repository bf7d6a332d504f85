#include "forge/fuse.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/raster.hpp"
#include "forge/text.hpp"

namespace forge {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ValidationError("Rng::below needs a positive bound");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % n;
  }
}

// ---------------------------------------------------------------------------
// recipe documents

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on `sep` outside double quotes; quotes are removed, `\"` escapes.
std::vector<std::string> split_items(std::string_view s, char sep, std::size_t line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\' && i + 1 < s.size()) cur += s[++i];
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      if (!text::trim(cur).empty()) throw ParseError("quote inside an unquoted item", line);
      cur.clear();
      quoted = was_quoted = true;
    } else if (c == sep) {
      out.push_back(was_quoted ? cur : std::string(text::trim(cur)));
      cur.clear();
      was_quoted = false;
    } else if (!(was_quoted && (c == ' ' || c == '\t'))) {
      if (was_quoted) throw ParseError("text after a closing quote", line);
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote", line);
  out.push_back(was_quoted ? cur : std::string(text::trim(cur)));
  return out;
}

// Splits on `sep` outside double quotes, leaving quotes and escapes in place
// for the item-level split.
std::vector<std::string> split_fields(std::string_view s, char sep, std::size_t line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted && c == '\\' && i + 1 < s.size()) {
      cur += c;
      cur += s[++i];
      continue;
    }
    if (c == '"') quoted = !quoted;
    if (c == sep && !quoted) {
      out.emplace_back(text::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote", line);
  out.emplace_back(text::trim(cur));
  return out;
}

std::string single_item(std::string_view s, std::size_t line) {
  auto items = split_items(s, '\x01', line);
  return std::move(items.front());
}

std::string quote_item(const std::string& s) {
  if (s.find_first_of(",|\"") == std::string::npos && text::trim(s) == s) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> nonempty_list(std::string_view s, std::size_t line, const char* what) {
  auto items = split_items(s, ',', line);
  for (const auto& it : items)
    if (it.empty()) throw ParseError(std::string("empty item in ") + what, line);
  return items;
}

MaskSemantics parse_semantics(std::string_view s, std::size_t line) {
  const auto t = text::lower(text::trim(s));
  if (t == "water") return MaskSemantics::Water;
  if (t == "built-up") return MaskSemantics::BuiltUp;
  throw ParseError("mask semantics must be water or built-up", line);
}

}  // namespace

std::string to_string(MaskSemantics s) { return s == MaskSemantics::Water ? "water" : "built-up"; }

FusionRecipe parse_recipe(std::string_view doc) {
  FusionRecipe r;
  bool have_backbone = false, have_augment = false, have_bands = false, have_size = false;
  std::size_t line_no = 0;
  for (const auto raw : text::split(doc, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw ParseError("expected 'key: value'", line_no);
    const std::string key = text::lower(text::trim(line.substr(0, colon)));
    const auto value = text::trim(line.substr(colon + 1));
    auto once = [&](bool& seen) {
      if (seen) throw ParseError("repeated key", line_no, key);
      seen = true;
    };

    if (key == "backbone") {
      once(have_backbone);
      if (value.empty()) throw ParseError("empty backbone", line_no, key);
      r.backbone = std::string(value);
    } else if (key == "size") {
      once(have_size);
      const auto x = value.find('x');
      const auto rows = x == std::string_view::npos ? std::nullopt : text::parse_number<std::uint32_t>(value.substr(0, x));
      const auto cols = x == std::string_view::npos ? std::nullopt : text::parse_number<std::uint32_t>(value.substr(x + 1));
      if (!rows || !cols || *rows == 0 || *cols == 0) throw ParseError("expected <rows>x<cols>", line_no, key);
      r.rows = rows;
      r.cols = cols;
    } else if (key == "bands") {
      once(have_bands);
      r.bands = nonempty_list(value, line_no, "bands");
    } else if (key == "augment") {
      once(have_augment);
      if (value == "yes") r.augment = true;
      else if (value == "no") r.augment = false;
      else throw ParseError("expected yes or no", line_no, key);
    } else if (key == "enrich") {
      const auto f = split_fields(value, '|', line_no);
      if (f.size() != 4 && f.size() != 5) throw ParseError("expected dataset | classes | count | target [| seed]", line_no, key);
      Enrichment e;
      e.dataset = single_item(f[0], line_no);
      e.classes = nonempty_list(f[1], line_no, "classes");
      const auto count = text::parse_number<std::size_t>(f[2]);
      if (!count || *count == 0) throw ParseError("count must be a positive integer", line_no, key);
      e.count = *count;
      e.target = single_item(f[3], line_no);
      if (e.dataset.empty() || e.target.empty()) throw ParseError("dataset and target must be non-empty", line_no, key);
      if (f.size() == 5) {
        const auto seed = text::parse_number<std::uint64_t>(f[4]);
        if (!seed) throw ParseError("seed must be a non-negative integer", line_no, key);
        e.seed = seed;
      }
      r.enrichments.push_back(std::move(e));
    } else if (key == "mask-source") {
      const auto f = split_fields(value, '|', line_no);
      if (f.size() != 3) throw ParseError("expected id | water|built-up | values", line_no, key);
      MaskSource m;
      m.id = single_item(f[0], line_no);
      if (m.id.empty()) throw ParseError("empty mask source id", line_no, key);
      m.semantics = parse_semantics(f[1], line_no);
      for (const auto& v : nonempty_list(f[2], line_no, "values")) {
        const auto n = text::parse_number<double>(v);
        if (!n) throw ParseError("'" + v + "' is not a number", line_no, key);
        m.positive_values.push_back(*n);
      }
      r.mask_sources.push_back(std::move(m));
    } else if (key == "remap") {
      const auto arrow = value.find("->");
      if (arrow == std::string_view::npos) throw ParseError("expected 'source -> target'", line_no, key);
      const auto src = split_items(value.substr(0, arrow), ',', line_no);
      const auto dst = single_item(value.substr(arrow + 2), line_no);
      if (src.size() != 1 || src[0].empty() || dst.empty())
        throw ParseError("remap takes one source and one target", line_no, key);
      if (!r.remap.emplace(src[0], dst).second) throw ParseError("'" + src[0] + "' remapped twice", line_no, key);
    } else {
      throw ParseError("unknown key", line_no, key);
    }
  }
  if (!have_backbone) throw ParseError("missing required key", 0, "backbone");
  return r;
}

std::string serialize_recipe(const FusionRecipe& r) {
  auto list = [](const auto& items) {
    std::vector<std::string> q;
    for (const auto& i : items) q.push_back(quote_item(i));
    return text::join(q, ", ");
  };
  std::string out = "backbone: " + r.backbone + "\n";
  if (r.rows && r.cols) out += "size: " + std::to_string(*r.rows) + "x" + std::to_string(*r.cols) + "\n";
  if (!r.bands.empty()) out += "bands: " + list(r.bands) + "\n";
  for (const auto& e : r.enrichments) {
    out += "enrich: " + quote_item(e.dataset) + " | " + list(e.classes) + " | " + std::to_string(e.count) + " | " +
           quote_item(e.target);
    if (e.seed) out += " | " + std::to_string(*e.seed);
    out += "\n";
  }
  for (const auto& m : r.mask_sources) {
    std::vector<std::string> vals;
    for (const double v : m.positive_values) vals.push_back(text::format_double(v));
    out += "mask-source: " + quote_item(m.id) + " | " + to_string(m.semantics) + " | " + text::join(vals, ", ") + "\n";
  }
  for (const auto& [a, b] : r.remap) out += "remap: " + quote_item(a) + " -> " + quote_item(b) + "\n";
  out += std::string("augment: ") + (r.augment ? "yes" : "no") + "\n";
  return out;
}

FusionRecipe load_recipe(const std::string& path) { return parse_recipe(read_file(path)); }

ClassMapping parse_class_mapping(std::string_view doc) {
  ClassMapping out;
  std::size_t line_no = 0;
  for (const auto raw : text::split(doc, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) throw ParseError("expected 'a, b -> target'", line_no);
    const std::string target(text::trim(line.substr(arrow + 2)));
    if (target.empty()) throw ParseError("empty target", line_no);
    for (const auto& src : nonempty_list(line.substr(0, arrow), line_no, "sources")) {
      const auto [it, inserted] = out.emplace(src, target);
      if (!inserted && it->second != target)
        throw ParseError("'" + src + "' mapped to both '" + it->second + "' and '" + target + "'", line_no);
    }
  }
  return out;
}

ClassMapping load_class_mapping(const std::string& path) { return parse_class_mapping(read_file(path)); }

// ---------------------------------------------------------------------------
// recipe application

std::vector<std::string> remap_classes(std::span<const std::string> labels, const ClassMapping& mapping) {
  if (mapping.empty()) return {labels.begin(), labels.end()};
  std::vector<std::string> out;
  std::set<std::string> missing;
  for (const auto& l : labels) {
    const auto it = mapping.find(l);
    if (it == mapping.end()) missing.insert(l);
    else if (std::find(out.begin(), out.end(), it->second) == out.end()) out.push_back(it->second);
  }
  if (!missing.empty())
    throw ValidationError("unmapped label(s): " + text::join({missing.begin(), missing.end()}, ", "));
  return out;
}

LabelMask remap_classes(const LabelMask& mask, const ClassMapping& mapping) {
  std::set<std::uint8_t> present(mask.values.begin(), mask.values.end());
  if (mask.nodata) present.erase(*mask.nodata);
  std::set<std::string> missing;
  std::map<std::uint8_t, std::string> target_of;
  for (const auto v : present) {
    const auto name = mask.class_map.find(v);
    if (name == mask.class_map.end()) {
      if (v == 0) continue;  // unnamed background
      missing.insert("id " + std::to_string(v));
      continue;
    }
    const auto t = mapping.find(name->second);
    if (t == mapping.end()) missing.insert(name->second);
    else target_of[v] = t->second;
  }
  if (!missing.empty())
    throw ValidationError("unmapped label(s): " + text::join({missing.begin(), missing.end()}, ", "));

  std::map<std::string, std::uint8_t> new_id;
  std::map<std::uint8_t, std::uint8_t> relabel;
  std::uint8_t next = 1;
  for (const auto& [old, name] : target_of) {
    auto it = new_id.find(name);
    if (it == new_id.end()) it = new_id.emplace(name, old == 0 ? std::uint8_t{0} : next++).first;
    relabel[old] = it->second;
  }
  LabelMask out = mask;
  out.class_map.clear();
  for (const auto& [name, id] : new_id) out.class_map[id] = name;
  for (auto& v : out.values) {
    const auto it = relabel.find(v);
    if (it != relabel.end()) v = it->second;
  }
  return out;
}

namespace {

std::string member_stem(const std::string& member) {
  const auto slash = member.find_last_of('/');
  const auto dot = member.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return member;
  return member.substr(0, dot);
}

std::string resize_note(std::uint32_t r0, std::uint32_t c0, std::uint32_t r1, std::uint32_t c1) {
  return "resize " + std::to_string(r0) + "x" + std::to_string(c0) + "->" + std::to_string(r1) + "x" +
         std::to_string(c1) + " gaussian-bilinear";
}

}  // namespace

FusedDataset apply_recipe(const Catalog& catalog, const Lattice& lattice, const FusionRecipe& recipe,
                          std::uint64_t seed) {
  FusedDataset d;
  d.backbone = recipe.backbone;
  d.seed = seed;
  d.bands = recipe.bands;

  // Mask entries keyed by the image stem they belong to.
  std::map<std::pair<std::string, std::string>, ArchivePath> masks;
  for (const auto& rec : catalog.records()) {
    if (rec.entry.genre != Genre::Mask) continue;
    auto stem = member_stem(rec.entry.path.member);
    if (stem.size() > 5 && stem.ends_with("_mask")) stem.resize(stem.size() - 5);
    masks[{rec.dataset, stem}] = rec.entry.path;
  }

  std::vector<const CatalogRecord*> backbone;
  for (const auto& rec : catalog.records())
    if (rec.dataset == recipe.backbone && rec.entry.genre == Genre::Image) backbone.push_back(&rec);
  if (backbone.empty()) throw ValidationError("backbone dataset '" + recipe.backbone + "' has no images in the catalog");
  d.rows = recipe.rows.value_or(backbone.front()->entry.meta.rows);
  d.cols = recipe.cols.value_or(backbone.front()->entry.meta.cols);

  std::set<std::pair<std::string, ArchivePath>> used;
  auto make_sample = [&](const CatalogRecord& rec, std::vector<std::string> labels, std::string origin) {
    FusedSample s;
    s.id = rec.dataset + ":" + rec.entry.path.str();
    s.dataset = rec.dataset;
    s.patch = rec.entry.path;
    s.source = rec.entry.path;
    if (const auto m = masks.find({rec.dataset, member_stem(rec.entry.path.member)}); m != masks.end()) s.mask = m->second;
    s.source_labels = rec.entry.labels;
    s.labels = remap_classes(labels, recipe.remap);
    s.origin = std::move(origin);
    s.rows = d.rows;
    s.cols = d.cols;
    if (!recipe.bands.empty()) s.transforms.push_back("select-bands " + text::join(recipe.bands, ","));
    if (rec.entry.meta.rows != d.rows || rec.entry.meta.cols != d.cols)
      s.transforms.push_back(resize_note(rec.entry.meta.rows, rec.entry.meta.cols, d.rows, d.cols));
    used.insert({rec.dataset, rec.entry.path});
    return s;
  };

  try {
    for (const auto* rec : backbone) d.samples.push_back(make_sample(*rec, rec->entry.labels, "backbone"));
  } catch (const ValidationError& e) {
    throw ValidationError("backbone " + recipe.backbone + ": " + e.what());
  }

  for (std::size_t k = 0; k < recipe.enrichments.size(); ++k) {
    const auto& e = recipe.enrichments[k];
    const auto tag = "enrichment " + std::to_string(k + 1);
    for (const auto& c : e.classes)
      if (!lattice.has_leaf({e.dataset, c}))
        throw LookupError(tag + ": '" + e.dataset + "/" + c + "' is not a leaf of the semantic lattice");
    const std::set<std::string> wanted(e.classes.begin(), e.classes.end());

    std::vector<const CatalogRecord*> pool;
    for (const auto& rec : catalog.records()) {
      if (rec.dataset != e.dataset || rec.entry.genre != Genre::Image) continue;
      if (used.count({rec.dataset, rec.entry.path})) continue;
      if (std::any_of(rec.entry.labels.begin(), rec.entry.labels.end(), [&](const auto& l) { return wanted.count(l); }))
        pool.push_back(&rec);
    }
    if (pool.size() < e.count)
      throw ValidationError(tag + ": pool of " + std::to_string(pool.size()) + " entries from " + e.dataset +
                            " is smaller than the requested " + std::to_string(e.count));

    const std::uint64_t draw_seed = e.seed.value_or(mix_seed(seed, k + 1));
    Rng rng(draw_seed);
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < e.count; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(e.count);
    std::sort(idx.begin(), idx.end());

    try {
      for (const auto i : idx) d.samples.push_back(make_sample(*pool[i], {e.target}, tag));
    } catch (const ValidationError& err) {
      throw ValidationError(tag + ": " + err.what());
    }
    d.draws.push_back(tag + ": " + e.dataset + " [" + text::join(e.classes, ", ") + "] -> " + e.target + ": drew " +
                      std::to_string(e.count) + " of " + std::to_string(pool.size()) + " (" + kGeneratorName +
                      ", seed " + std::to_string(draw_seed) + ")");
  }
  return d;
}

// ---------------------------------------------------------------------------
// augmentation

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Identity: return "identity";
    case Variant::Rot90: return "rot90";
    case Variant::Rot180: return "rot180";
    case Variant::Rot270: return "rot270";
    case Variant::FlipLR: return "flip-lr";
    case Variant::FlipUD: return "flip-ud";
  }
  return "identity";
}

Variant parse_variant(std::string_view s) {
  for (const auto v : kAllVariants)
    if (to_string(v) == s) return v;
  throw ValidationError("unknown variant '" + std::string(s) + "'");
}

namespace {

// Source pixel (row, col) for output pixel (r, c); H x W is the input shape.
std::pair<std::uint32_t, std::uint32_t> variant_source(Variant v, std::uint32_t r, std::uint32_t c, std::uint32_t H,
                                                      std::uint32_t W) {
  switch (v) {
    case Variant::Identity: return {r, c};
    case Variant::Rot90: return {c, W - 1 - r};
    case Variant::Rot180: return {H - 1 - r, W - 1 - c};
    case Variant::Rot270: return {H - 1 - c, r};
    case Variant::FlipLR: return {r, W - 1 - c};
    case Variant::FlipUD: return {H - 1 - r, c};
  }
  return {r, c};
}

bool swaps_axes(Variant v) { return v == Variant::Rot90 || v == Variant::Rot270; }

// Output corner coordinates (x, y) -> input corner coordinates, composed into the transform.
std::optional<Georef> variant_georef(const std::optional<Georef>& g, Variant v, double H, double W) {
  if (!g || v == Variant::Identity) return g;
  // x_in = a x + b y + e ; y_in = d x + f y + h
  double a = 1, b = 0, e = 0, dd = 0, f = 1, h = 0;
  switch (v) {
    case Variant::Rot90: a = 0, b = -1, e = W, dd = 1, f = 0, h = 0; break;
    case Variant::Rot180: a = -1, b = 0, e = W, dd = 0, f = -1, h = H; break;
    case Variant::Rot270: a = 0, b = 1, e = 0, dd = -1, f = 0, h = H; break;
    case Variant::FlipLR: a = -1, e = W; break;
    case Variant::FlipUD: f = -1, h = H; break;
    case Variant::Identity: break;
  }
  const auto& c = g->transform.c;
  Georef out = *g;
  out.transform.c = {c[0] + c[1] * e + c[2] * h, c[1] * a + c[2] * dd, c[1] * b + c[2] * f,
                     c[3] + c[4] * e + c[5] * h, c[4] * a + c[5] * dd, c[4] * b + c[5] * f};
  return out;
}

}  // namespace

LabelMask apply_variant(const LabelMask& m, Variant v) {
  LabelMask out = m;
  if (swaps_axes(v)) std::swap(out.rows, out.cols);
  for (std::uint32_t r = 0; r < out.rows; ++r)
    for (std::uint32_t c = 0; c < out.cols; ++c) {
      const auto [sr, sc] = variant_source(v, r, c, m.rows, m.cols);
      out.at(r, c) = m.at(sr, sc);
    }
  out.georef = variant_georef(m.georef, v, m.rows, m.cols);
  return out;
}

RasterPatch apply_variant(const RasterPatch& p, Variant v) {
  RasterPatch out = p;
  if (swaps_axes(v)) std::swap(out.rows, out.cols);
  for (std::uint32_t b = 0; b < p.bands; ++b)
    for (std::uint32_t r = 0; r < out.rows; ++r)
      for (std::uint32_t c = 0; c < out.cols; ++c) {
        const auto [sr, sc] = variant_source(v, r, c, p.rows, p.cols);
        out.at(b, r, c) = p.at(b, sr, sc);
      }
  out.georef = variant_georef(p.georef, v, p.rows, p.cols);
  return out;
}

FusedDataset augment(const FusedDataset& d) {
  FusedDataset out;
  out.backbone = d.backbone;
  out.seed = d.seed;
  out.rows = d.rows;
  out.cols = d.cols;
  out.bands = d.bands;
  out.draws = d.draws;
  out.samples.reserve(d.samples.size() * kAllVariants.size());
  for (const auto& s : d.samples) {
    if (s.rows != s.cols)
      throw ValidationError("sample " + s.id + " is " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                            "; augmentation needs square patches");
    for (const auto v : kAllVariants) {
      auto& a = out.samples.emplace_back(s);
      if (v != Variant::Identity) a.id += "#" + to_string(v);
      a.transforms.push_back(to_string(v));
    }
  }
  if (d.split) {
    auto expand = [](const std::vector<std::string>& ids) {
      std::vector<std::string> x;
      x.reserve(ids.size() * kAllVariants.size());
      for (const auto& id : ids)
        for (const auto v : kAllVariants) x.push_back(v == Variant::Identity ? id : id + "#" + to_string(v));
      return x;
    };
    SplitAssignment s = *d.split;
    s.train = expand(s.train);
    s.val = expand(s.val);
    s.test = expand(s.test);
    for (auto& f : s.folds) f = expand(f);
    out.split = std::move(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// splits

SplitAssignment split_80_10_10(std::span<const FusedSample> samples, std::uint64_t seed, bool stratify) {
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto key = !stratify ? std::string() : samples[i].labels.empty() ? std::string("(unlabelled)") : samples[i].labels.front();
    strata[key].push_back(i);
  }
  SplitAssignment out;
  out.seed = seed;
  out.stratified = stratify;
  Rng rng(mix_seed(seed, 0x5E17));
  std::vector<std::size_t> train, val, test;
  for (auto& [name, idx] : strata) {
    const std::size_t n = idx.size();
    if (stratify && n < 10)
      throw ValidationError("stratum '" + name + "' has " + std::to_string(n) + " samples; at least 10 are needed");
    rng.shuffle(idx);
    const std::array<std::size_t, 3> num = {8 * n, n, n};  // tenths
    std::array<std::size_t, 3> take{};
    std::size_t given = 0;
    for (int i = 0; i < 3; ++i) given += take[i] = num[i] / 10;
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return num[a] % 10 > num[b] % 10; });
    for (std::size_t k = 0; given < n; ++k, ++given) ++take[order[k]];
    train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[0]));
    val.insert(val.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[0]),
               idx.begin() + static_cast<std::ptrdiff_t>(take[0] + take[1]));
    test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[0] + take[1]), idx.end());
  }
  auto ids = [&](std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end());
    std::vector<std::string> x;
    x.reserve(v.size());
    for (const auto i : v) x.push_back(samples[i].id);
    return x;
  };
  out.train = ids(train);
  out.val = ids(val);
  out.test = ids(test);
  return out;
}

SplitAssignment kfold(std::span<const FusedSample> samples, std::size_t k, std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (k < 2 || k > n)
    throw ValidationError("k must be between 2 and the sample count (" + std::to_string(n) + "), got " + std::to_string(k));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed, 0xF01D));
  rng.shuffle(idx);
  SplitAssignment out;
  out.seed = seed;
  out.stratified = false;
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(at),
                                  idx.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
    std::sort(part.begin(), part.end());
    auto& fold = out.folds.emplace_back();
    for (const auto i : part) fold.push_back(samples[i].id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// three-class masks

std::map<std::uint8_t, std::string> three_class_map() {
  return {{kClassOther, "other"}, {kClassWater, "water"}, {kClassBuiltUp, "built-up"}};
}

MaskPair three_class_mask(const Georef& footprint, std::uint32_t rows, std::uint32_t cols,
                          std::span<const ExternalLayer> layers) {
  MaskPair out{LabelMask::zeros(rows, cols), {}};
  out.mask.class_map = three_class_map();
  out.mask.georef = footprint;
  std::vector<std::uint8_t> water(out.mask.values.size(), 0), built(out.mask.values.size(), 0);
  for (const auto& layer : layers) {
    auto values = clip_to_footprint(layer.raster, footprint, rows, cols, Resampling::Nearest).patch;
    auto ones = RasterPatch::filled(layer.raster.rows, layer.raster.cols, 1, 1.0);
    ones.georef = layer.raster.georef;
    const auto cover = clip_to_footprint(ones, footprint, rows, cols, Resampling::Nearest).patch;
    auto& flag = layer.source.semantics == MaskSemantics::Water ? water : built;
    const std::set<double> positive(layer.source.positive_values.begin(), layer.source.positive_values.end());
    std::size_t uncovered = 0;
    for (std::size_t i = 0; i < flag.size(); ++i) {
      const double v = values.values[i];
      if (cover.values[i] != 1.0 || layer.raster.is_nodata(v)) {
        ++uncovered;
        continue;
      }
      if (positive.count(v)) flag[i] = 1;
    }
    if (uncovered)
      out.warnings.push_back(layer.source.id + ": " + std::to_string(uncovered) + " of " + std::to_string(flag.size()) +
                             " pixels without coverage, treated as other");
  }
  for (std::size_t i = 0; i < out.mask.values.size(); ++i)
    out.mask.values[i] = water[i] ? kClassWater : built[i] ? kClassBuiltUp : kClassOther;
  return out;
}

// ---------------------------------------------------------------------------
// manifest documents

namespace {

using ojson = nlohmann::ordered_json;

ojson path_json(const ArchivePath& p) {
  ojson j;
  j["archive"] = p.archive;
  j["member"] = p.member;
  return j;
}

ArchivePath path_from(const ojson& j) { return {j.at("archive").get<std::string>(), j.at("member").get<std::string>()}; }

ojson split_json(const SplitAssignment& s) {
  ojson j;
  j["seed"] = s.seed;
  j["stratified"] = s.stratified;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  if (!s.folds.empty()) j["folds"] = s.folds;
  return j;
}

}  // namespace

std::string fused_to_json(const FusedDataset& d) {
  std::string out = "{\n";
  auto field = [&](const char* key, const ojson& v) { out += "  \"" + std::string(key) + "\": " + v.dump() + ",\n"; };
  field("format", "forge-fused-dataset/1");
  field("backbone", d.backbone);
  field("seed", d.seed);
  field("rows", d.rows);
  field("cols", d.cols);
  field("bands", d.bands);
  field("draws", d.draws);
  if (d.split) field("split", split_json(*d.split));
  out += "  \"samples\": [";
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    ojson j;
    j["id"] = s.id;
    j["dataset"] = s.dataset;
    j["patch"] = path_json(s.patch);
    if (s.mask) j["mask"] = path_json(*s.mask);
    j["labels"] = s.labels;
    j["rows"] = s.rows;
    j["cols"] = s.cols;
    ojson p;
    p["source"] = path_json(s.source);
    p["source_labels"] = s.source_labels;
    p["origin"] = s.origin;
    p["transforms"] = s.transforms;
    j["provenance"] = p;
    out += (i ? ",\n    " : "\n    ") + j.dump();
  }
  out += d.samples.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

FusedDataset fused_from_json(std::string_view text) {
  try {
    const auto j = ojson::parse(text);
    if (j.value("format", "") != "forge-fused-dataset/1") throw FormatError("not a fused dataset manifest");
    FusedDataset d;
    d.backbone = j.at("backbone").get<std::string>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.rows = j.at("rows").get<std::uint32_t>();
    d.cols = j.at("cols").get<std::uint32_t>();
    d.bands = j.at("bands").get<std::vector<std::string>>();
    d.draws = j.at("draws").get<std::vector<std::string>>();
    if (j.contains("split")) {
      const auto& s = j["split"];
      SplitAssignment a;
      a.seed = s.at("seed").get<std::uint64_t>();
      a.stratified = s.at("stratified").get<bool>();
      a.train = s.at("train").get<std::vector<std::string>>();
      a.val = s.at("val").get<std::vector<std::string>>();
      a.test = s.at("test").get<std::vector<std::string>>();
      if (s.contains("folds")) a.folds = s["folds"].get<std::vector<std::vector<std::string>>>();
      d.split = std::move(a);
    }
    for (const auto& js : j.at("samples")) {
      FusedSample s;
      s.id = js.at("id").get<std::string>();
      s.dataset = js.at("dataset").get<std::string>();
      s.patch = path_from(js.at("patch"));
      if (js.contains("mask")) s.mask = path_from(js["mask"]);
      s.labels = js.at("labels").get<std::vector<std::string>>();
      s.rows = js.at("rows").get<std::uint32_t>();
      s.cols = js.at("cols").get<std::uint32_t>();
      const auto& p = js.at("provenance");
      s.source = path_from(p.at("source"));
      s.source_labels = p.at("source_labels").get<std::vector<std::string>>();
      s.origin = p.at("origin").get<std::string>();
      s.transforms = p.at("transforms").get<std::vector<std::string>>();
      d.samples.push_back(std::move(s));
    }
    return d;
  } catch (const ojson::exception& e) {
    throw FormatError(std::string("fused dataset manifest: ") + e.what());
  }
}

}  // namespace forge
