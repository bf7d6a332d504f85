#include <algorithm>
#include <atomic>
#include <future>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>

#include "commands.hpp"
#include "forge/archive.hpp"
#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge::cli {

namespace {

using ojson = nlohmann::ordered_json;

Timestamp parse_bound(const std::string& s, bool upper) {
  if (s.size() == 10) return parse_rfc3339(s + (upper ? "T23:59:59Z" : "T00:00:00Z"));
  return parse_rfc3339(s);
}

bool has_filters(const FilterArgs& f) {
  return !f.keywords.empty() || !f.dataset.empty() || !f.genre.empty() || !f.from.empty() || !f.to.empty() ||
         !f.where.empty();
}

ojson record_json(const CatalogRecord& r) {
  ojson j;
  j["dataset"] = r.dataset;
  j["entry"] = ojson::parse(entry_to_json(r.entry));
  return j;
}

std::string table(const std::vector<CatalogRecord>& rows) {
  std::ostringstream out;
  out << "dataset\tpath\tgenre\tbytes\tlabels\n";
  for (const auto& r : rows)
    out << r.dataset << '\t' << r.entry.path.str() << '\t' << to_string(r.entry.genre) << '\t' << r.entry.bytes << '\t'
        << text::join(r.entry.labels, "; ") << '\n';
  return out.str();
}

}  // namespace

Query build_query(const FilterArgs& f) {
  Query q;
  q.keywords = f.keywords;
  if (!f.dataset.empty()) q.dataset = f.dataset;
  try {
    if (!f.genre.empty()) q.genre = parse_genre(f.genre);
    if (!f.from.empty() || !f.to.empty()) {
      TimeRange t;
      if (!f.from.empty()) t.from = parse_bound(f.from, false);
      if (!f.to.empty()) t.to = parse_bound(f.to, true);
      q.time_range = t;
    }
    for (const auto& w : f.where) q.meta_predicates.push_back(parse_predicate(w));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return q;
}

int cmd_query(const Config& c, const QueryArgs& a) {
  const auto lattice = load_lattice_for(c);
  const auto catalog = load_catalog(c, lattice);
  for (const auto& w : catalog.label_warnings()) std::cerr << "warning: " << w << "\n";
  const auto rows = catalog.query(lattice, build_query(a.filter));

  std::string body;
  if (a.count) {
    body = c.format == "json" ? ojson{{"count", rows.size()}}.dump() + "\n" : std::to_string(rows.size()) + "\n";
  } else if (c.format == "json") {
    auto arr = ojson::array();
    for (const auto& r : rows) arr.push_back(record_json(r));
    body = arr.dump(2) + "\n";
  } else {
    body = table(rows);
  }
  std::cout << body;
  if (!c.out.empty()) {
    write_text(c.out, body);
    Provenance prov(c, "query");
    for (const auto& f : catalog_shard_files(c)) prov.input(f);
    prov.output(c.out);
    prov.set("matches", rows.size());
    prov.write(provenance_path_for(c.out, false));
  }
  return kExitOk;
}

int cmd_fetch(const Config& c, const FetchArgs& a) {
  if (c.out.empty()) throw UsageError("fetch needs --out <dir>");
  if (a.paths.empty() && !has_filters(a.filter)) throw UsageError("fetch needs a query or --path");
  const auto lattice = load_lattice_for(c);
  const auto catalog = load_catalog(c, lattice);
  const ArchiveStore store(archive_root(c));

  std::vector<CatalogRecord> items;
  std::vector<std::pair<std::string, std::string>> failed;
  if (has_filters(a.filter)) items = catalog.query(lattice, build_query(a.filter));
  for (const auto& p : a.paths) {
    const auto bang = p.find('!');
    const ArchivePath ap = bang == std::string::npos ? ArchivePath{"", p} : ArchivePath{p.substr(0, bang), p.substr(bang + 1)};
    if (const auto* rec = catalog.find(ap)) items.push_back(*rec);
    else failed.emplace_back(p, "not in the catalog");
  }
  std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
    return std::tie(x.dataset, x.entry.path) < std::tie(y.dataset, y.entry.path);
  });
  items.erase(std::unique(items.begin(), items.end(),
                          [](const auto& x, const auto& y) { return x.dataset == y.dataset && x.entry.path == y.entry.path; }),
              items.end());

  const fs::path out(c.out);
  std::vector<fs::path> dests;
  for (const auto& r : items) dests.push_back(out / dataset_dir_name(r.dataset) / fs::path(r.entry.path.member));
  if (!a.force) {
    std::vector<std::string> clashes;
    for (const auto& d : dests)
      if (fs::exists(d)) clashes.push_back(d.string());
    if (!clashes.empty())
      throw UsageError("refusing to overwrite " + std::to_string(clashes.size()) + " existing file(s), first " +
                       clashes.front() + " (use --force)");
  }

  std::vector<std::string> errors(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < items.size();) {
      try {
        write_file(dests[i], store.fetch(items[i].entry.path.archive, items[i].entry.path.member));
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::future<void>> pool;
  for (unsigned t = 1; t < c.workers; ++t) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();

  Provenance prov(c, "fetch");
  for (const auto& f : catalog_shard_files(c)) prov.input(f);
  auto fetched = ojson::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!errors[i].empty()) {
      failed.emplace_back(items[i].dataset + ":" + items[i].entry.path.str(), errors[i]);
      continue;
    }
    fetched.push_back({{"dataset", items[i].dataset}, {"path", items[i].entry.path.str()},
                       {"file", fs::relative(dests[i], out).generic_string()}, {"bytes", items[i].entry.bytes}});
    prov.output(dests[i]);
  }
  std::sort(failed.begin(), failed.end());
  auto fails = ojson::array();
  for (const auto& [what, why] : failed) {
    fails.push_back({{"path", what}, {"reason", why}});
    prov.warning(what + ": " + why);
    std::cerr << "failed " << what << ": " << why << "\n";
  }
  fs::create_directories(out);
  write_text(out / "fetch_report.json", ojson{{"fetched", fetched}, {"failed", fails}}.dump(2) + "\n");
  prov.output(out / "fetch_report.json");
  prov.write(out / "provenance.json");

  if (c.format == "json") std::cout << ojson{{"fetched", fetched.size()}, {"failed", fails.size()}}.dump() << "\n";
  else std::cout << "fetched " << fetched.size() << " file(s); " << fails.size() << " failed\n";
  return failed.empty() ? kExitOk : kExitPartial;
}

}  // namespace forge::cli
