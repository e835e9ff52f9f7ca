// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "glyco/archive.hpp"
#include "glyco/engine.hpp"
#include "glyco/evaluation.hpp"
#include "glyco/fragmenter.hpp"
#include "glyco/sage.hpp"
#include "support.hpp"

using namespace glyco;
using namespace glyco::testing;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

const MassModel& M() { return MassModel::defaults(); }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// 1. Worked example of the graph model.
Outcome worked_example() {
  auto g = example_graph();
  auto ranked = classify(g, example_features(), {10.0, ToleranceUnit::ppm, MsScope::MS1}, SmoothingConfig::fixed_floor(0.1));
  if (ranked.size() != 2) return {false, "expected two candidates, got " + std::to_string(ranked.size())};
  const double p1 = ranked[0].probability, p2 = ranked[1].probability;
  const bool ok = ranked[0].glycan_id == "G1" && ranked[1].glycan_id == "G2" &&
                  close(p1, 50.0 / 50 * 20.0 / 60 * 10.0 / 25, 1e-9) && close(p2, 0.1 * 40.0 / 60 * 10.0 / 25, 1e-9);
  char buf[128];
  std::snprintf(buf, sizeof buf, "P(G1)=%.12f P(G2)=%.12f", p1, p2);
  return {ok, buf};
}

// 2. Scores against a brute-force recount.
Outcome score_oracle() {
  std::mt19937_64 rng(2024);
  auto settings = RunSettings::defaults();
  const auto configs = enumerate_ion_configurations(settings.precursor_ion_settings());
  const std::vector<std::string> codes{"Hex", "HexNAc", "dHex", "NeuAc", "Pent"};
  std::uniform_real_distribution<double> inten(0.0, 1000.0);
  std::uniform_real_distribution<double> shift(-0.7, 0.7);
  const double tol = settings.msn_tolerance.value;
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    auto g = random_tree(rng, 2 + static_cast<int>(rng() % 6), codes, "G" + std::to_string(pair));
    auto deriv = rng() % 2 ? DerivatizationState::permethylated() : DerivatizationState::native();
    auto cand = Candidate::from_glycan(g, deriv, M());
    const auto& config = configs[rng() % configs.size()];
    FragmentTable table(cand, 2, config.abs_charge(), settings, M());
    Scan s{1, 2, 1000.0, config.abs_charge(), 0, {}};
    for (const auto& e : table.entries())
      if (rng() % 3 == 0) s.peaks.push_back({e.mz + shift(rng), inten(rng)});
    const int noise = static_cast<int>(rng() % 40);
    for (int k = 0; k < noise; ++k) s.peaks.push_back({50.0 + (rng() % 300000) / 100.0, inten(rng)});
    normalize_peaks(s);
    auto r = annotate_scan(s, cand, config, table, settings);

    std::size_t hit = 0;
    double hit_i = 0.0, total = 0.0;
    for (const auto& p : s.peaks) {
      total += p.intensity;
      bool any = false;
      for (const auto& e : table.entries()) any = any || std::abs(p.mz - e.mz) <= tol;
      if (any) {
        ++hit;
        hit_i += p.intensity;
      }
    }
    const double c = s.peaks.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(s.peaks.size());
    const double i = total > 0.0 ? hit_i / total : 0.0;
    if (!r.score_c || !r.score_i) return {false, "pair " + std::to_string(pair) + " has no scores"};
    worst = std::max({worst, std::abs(*r.score_c - c), std::abs(*r.score_i - i)});
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 pairs, max deviation %.3g", worst);
  return {worst <= 1e-12, buf};
}

// 3. B+Y = M, C+Z = M, and 4(n-1) fragments of linear chains.
Outcome complementarity() {
  std::mt19937_64 rng(77);
  FragmentationSettings single;
  single.levels[2] = LevelFragmentation{{FragmentType::B, FragmentType::C, FragmentType::Y, FragmentType::Z}, 1, {}, 0};
  const std::vector<std::string> codes{"Hex", "HexNAc", "dHex", "NeuAc", "Pent"};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_tree(rng, 2 + static_cast<int>(rng() % 7), codes, "T");
    for (auto deriv : {DerivatizationState::native(), DerivatizationState::permethylated()}) {
      const double whole = neutral_mass(g, deriv, M());
      std::map<std::pair<int, FragmentType>, double> cut;
      for (const auto& f : enumerate_fragments(g, deriv, single, 2, M()))
        cut[{f.cleavages.at(0).edge, f.cleavages.at(0).type}] = f.neutral_mass;
      for (int e = 1; e < static_cast<int>(g.size()); ++e) {
        auto at = [&](FragmentType t) {
          auto it = cut.find({e, t});
          return it == cut.end() ? std::nan("") : it->second;
        };
        const double by = at(FragmentType::B) + at(FragmentType::Y) - whole;
        const double cz = at(FragmentType::C) + at(FragmentType::Z) - whole;
        if (std::isnan(by) || std::isnan(cz)) return {false, "missing cleavage in trial " + std::to_string(trial)};
        worst = std::max({worst, std::abs(by), std::abs(cz)});
      }
    }
  }
  for (int n = 2; n <= 8; ++n) {
    auto count = enumerate_fragments(linear_chain(n), DerivatizationState::native(), single, 2, M()).size();
    if (count != static_cast<std::size_t>(4 * (n - 1)))
      return {false, "chain of " + std::to_string(n) + " gave " + std::to_string(count) + " fragments"};
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 trees, max |B+Y-M|,|C+Z-M| = %.3g Da; chains 2..8 ok", worst);
  return {worst <= 1e-9, buf};
}

// 4. Training order independence and doubling over selection sets.
Outcome training_properties() {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(31, 20);
  auto run = generate_synthetic(31, 1, db, 0.3, settings);
  auto archive = annotate_in_memory(run.datasets[0].spectra, db, settings);
  std::vector<Selection> pool;
  for (const auto& b : archive)
    if (b.scan.ms_level >= 2)
      for (const auto& r : b.records) pool.push_back({r.scan_id, r.glycan_id, r.config_signature, true, "qa", "t"});
  if (pool.size() < 10) return {false, "too few archived records to sample"};

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Selection> a, b;
    for (const auto& s : pool) {
      const auto roll = rng() % 3;
      if (roll == 0) a.push_back(s);
      else if (roll == 1) b.push_back(s);
    }
    auto all = a;
    all.insert(all.end(), b.begin(), b.end());
    SageGraph stepwise, joint, twice;
    train(stepwise, a, archive);
    train(stepwise, b, archive);
    train(joint, all, archive);
    if (!(stepwise == joint)) return {false, "order dependence in trial " + std::to_string(trial)};
    train(twice, all, archive);
    train(twice, all, archive);
    if (twice.node_count() != joint.node_count() || twice.edge_count() != joint.edge_count())
      return {false, "doubling changed the structure in trial " + std::to_string(trial)};
    for (const auto& [k, f] : joint.nodes())
      if (twice.nodes().at(k) != 2 * f) return {false, "node not doubled in trial " + std::to_string(trial)};
    for (const auto& [k, f] : joint.edges())
      if (twice.edges().at(k) != 2 * f) return {false, "edge not doubled in trial " + std::to_string(trial)};
  }
  return {true, "200 sets over " + std::to_string(pool.size()) + " archived records"};
}

// 5. Leave-one-out on noise-free synthetic data.
Outcome self_consistency() {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(7, 20);
  auto run = generate_synthetic(7, 10, db, 0.0, settings);
  LooOptions options;
  options.top_k = 1;
  auto r = leave_one_out(run.datasets, db, settings, options);
  const double acc = r.accuracy.value_or(0.0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu folds, coverage %.4f, accuracy@1 %.4f", r.fold_count, r.coverage, acc);
  return {r.fold_count == 10 && r.coverage >= 0.99 && acc >= 0.99, buf};
}

class NullBuffer : public std::streambuf {
protected:
  int overflow(int c) override { return c == traits_type::eof() ? 0 : c; }
  std::streamsize xsputn(const char*, std::streamsize n) override { return n; }
};

// 6. Resident annotation records during a 100,000-scan run.
Outcome streaming_bound() {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(11, 10);
  auto base = generate_synthetic(11, 1, db, 0.2, settings).datasets[0].spectra;
  ScanId span = 0;
  for (const auto& [id, s] : base.scans()) span = std::max(span, id);
  std::vector<Scan> scans;
  scans.reserve(100000);
  for (ScanId offset = 0; scans.size() < 100000; offset += span)
    for (const auto& [id, s] : base.scans()) {
      if (scans.size() == 100000 && s.ms_level == 1) break;
      Scan copy = s;
      copy.scan_id += offset;
      if (copy.parent_scan_id) *copy.parent_scan_id += offset;
      scans.push_back(std::move(copy));
    }
  auto tree = link_precursors(std::move(scans));
  NullBuffer sink;
  std::ostream out(&sink);
  ArchiveWriter writer(out);
  LiveCounter::reset_peak();
  const long before = LiveCounter::live();
  auto stats = annotate_run(tree, db, settings, writer);
  writer.close();
  const long resident = stats.peak_live_records - before;
  std::ostringstream d;
  d << stats.scans << " scans, " << stats.records << " records, peak resident " << resident << ", max per scan "
    << stats.max_scan_records;
  return {stats.scans >= 100000 && stats.max_scan_records > 0 && resident <= static_cast<long>(stats.max_scan_records),
          d.str()};
}

struct PipelineOutput {
  std::string archive, model, filtered;
};

PipelineOutput pipeline(int threads) {
  auto settings = RunSettings::defaults();
  settings.threads = threads;
  auto db = synthetic_database(5, 15);
  // topological isomers give the filter a choice to make
  const auto& registry = ResidueRegistry::defaults();
  db.push_back({parse_structure("Hex(a1-3)[Hex(a1-6)]Hex(b1-4)HexNAc(b1-4)HexNAc", registry, "M3branched"), "iso"});
  db.push_back({parse_structure("Hex(a1-3)Hex(a1-6)Hex(b1-4)HexNAc(b1-4)HexNAc", registry, "M3linear"), "iso"});
  auto data = generate_synthetic(5, 2, db, 0.4, settings);
  PipelineOutput o;
  std::ostringstream arc;
  ArchiveWriter w(arc);
  annotate_run(data.datasets[0].spectra, db, settings, w);
  w.close();
  o.archive = arc.str();
  std::istringstream in(o.archive);
  auto archive = read_archive(in);
  SageGraph graph(settings.ms1_tolerance);
  train(graph, data.datasets[0].selections, archive);
  std::ostringstream model;
  save(model, graph);
  o.model = model.str();
  std::ostringstream filtered;
  write_archive(filtered, post_filter(graph, archive, {settings.top_k, std::nullopt}, settings.smoothing,
                                      settings.ms1_tolerance));
  o.filtered = filtered.str();
  return o;
}

// 7. Byte-identical outputs across repeated runs.
Outcome determinism() {
  auto a = pipeline(1), b = pipeline(1), c = pipeline(4);
  const bool same = a.archive == b.archive && a.model == b.model && a.filtered == b.filtered &&
                    a.archive == c.archive && a.model == c.model && a.filtered == c.filtered;
  return {same && !a.archive.empty() && !a.model.empty(),
          "archive " + std::to_string(a.archive.size()) + " B, model " + std::to_string(a.model.size()) +
              " B, filtered " + std::to_string(a.filtered.size()) + " B; 1 and 4 threads"};
}

int charge_of(const std::string& config_signature) {
  const auto colon = config_signature.find(':');
  return std::stoi(config_signature.substr(2, colon - 2));
}

// 8. Unknown precursor charge admits every z; a declared one only itself.
Outcome unknown_charge() {
  auto settings = RunSettings::defaults();
  auto glycan = parse_structure("Hex(a1-3)[Hex(a1-6)]Hex(b1-4)HexNAc(b1-4)HexNAc", ResidueRegistry::defaults(), "M3");
  const double mass = neutral_mass(glycan, DerivatizationState::permethylated(), M());
  const double na = kNa - kElectron;
  std::vector<Scan> scans{{1, 1, {}, {}, {}, {{500.0, 1.0}}}};
  ScanId id = 2;
  std::map<ScanId, std::pair<std::optional<int>, int>> plan; // scan -> (declared, true z)
  for (int z = 1; z <= settings.max_charge; ++z) {
    const double mz = (mass + z * na) / z;
    plan[id] = {std::nullopt, z};
    scans.push_back({id++, 2, mz, std::nullopt, 1, {{200.0, 1.0}}});
    plan[id] = {z, z};
    scans.push_back({id++, 2, mz, z, 1, {{200.0, 1.0}}});
    const int wrong = z % settings.max_charge + 1;
    plan[id] = {wrong, z};
    scans.push_back({id++, 2, mz, wrong, 1, {{200.0, 1.0}}});
  }
  auto tree = link_precursors(scans);
  std::ostringstream out;
  ArchiveWriter w(out);
  annotate_run(tree, {{glycan, "test"}}, settings, w);
  w.close();
  std::istringstream in(out.str());
  std::map<ScanId, std::set<int>> charges;
  for (const auto& b : read_archive(in))
    if (b.scan.ms_level == 2)
      for (const auto& r : b.records)
        if (r.glycan_id == "M3") charges[b.scan.scan_id].insert(charge_of(r.config_signature));
  std::set<int> unknown_seen;
  for (const auto& [scan, p] : plan) {
    const auto& [declared, z] = p;
    const auto& got = charges[scan];
    if (!declared) {
      if (got != std::set<int>{z}) return {false, "unknown-charge scan " + std::to_string(scan) + " misses z=" + std::to_string(z)};
      unknown_seen.insert(z);
    } else if (*declared == z) {
      if (got != std::set<int>{z}) return {false, "declared z=" + std::to_string(z) + " not annotated at z"};
    } else if (!got.empty()) {
      return {false, "scan declared z=" + std::to_string(*declared) + " annotated at another charge"};
    }
  }
  return {static_cast<int>(unknown_seen.size()) == settings.max_charge,
          "unknown charge annotated at z=1.." + std::to_string(settings.max_charge) + "; declared z exclusive"};
}

// 9. write -> read -> write is byte identical for every file format.
Outcome round_trips() {
  std::mt19937_64 rng(99);
  const auto& registry = ResidueRegistry::defaults();
  for (int k = 0; k < 200; ++k) {
    auto g = random_tree(rng, 1 + static_cast<int>(rng() % 10), {"Hex", "HexNAc", "dHex", "NeuAc", "NeuGc"}, "R");
    const auto text = serialize_structure(g);
    if (serialize_structure(parse_structure(text, registry, "R")) != text) return {false, "glycan encoding " + text};
  }

  auto settings = RunSettings::defaults();
  auto db = synthetic_database(3, 8);
  auto data = generate_synthetic(3, 1, db, 0.5, settings);
  const auto& ds = data.datasets[0];

  std::ostringstream db1;
  write_glycan_database(db1, db);
  std::istringstream db_in(db1.str());
  std::ostringstream db2;
  write_glycan_database(db2, read_glycan_database(db_in, registry).records);
  if (db1.str() != db2.str()) return {false, "glycan database"};

  std::ostringstream scn1;
  write_canonical(scn1, ds.spectra);
  std::istringstream scn_in(scn1.str());
  std::ostringstream scn2;
  write_canonical(scn2, read_canonical(scn_in));
  if (scn1.str() != scn2.str()) return {false, "canonical scans"};

  std::ostringstream arc1;
  ArchiveWriter w(arc1);
  annotate_run(ds.spectra, db, settings, w);
  w.close();
  std::istringstream arc_in(arc1.str());
  auto archive = read_archive(arc_in);
  std::ostringstream arc2;
  write_archive(arc2, archive);
  if (arc1.str() != arc2.str()) return {false, "archive"};

  SageGraph graph(settings.ms1_tolerance);
  train(graph, ds.selections, archive);
  std::ostringstream m1;
  save(m1, graph);
  std::istringstream m_in(m1.str());
  auto loaded = load(m_in);
  std::ostringstream m2;
  save(m2, loaded);
  if (m1.str() != m2.str() || !(loaded == graph)) return {false, "model file"};

  std::ostringstream s1;
  write_selections(s1, ds.selections);
  std::istringstream s_in(s1.str());
  std::ostringstream s2;
  write_selections(s2, read_selections(s_in));
  if (s1.str() != s2.str()) return {false, "selections"};

  return {true, "glycans x200, database, scans, archive (" + std::to_string(arc1.str().size()) +
                    " B), model, selections"};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"worked-example scores", worked_example},
      {"score oracle", score_oracle},
      {"fragment complementarity", complementarity},
      {"training properties", training_properties},
      {"leave-one-out self-consistency", self_consistency},
      {"streaming bound", streaming_bound},
      {"pipeline determinism", determinism},
      {"unknown precursor charge", unknown_charge},
      {"format round trips", round_trips},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
