#include "glyco/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

EvaluationReport evaluate(const std::set<AnnotationKey>& predicted, const std::set<AnnotationKey>& approved) {
  EvaluationReport r;
  r.predicted = predicted.size();
  r.approved = approved.size();
  for (const auto& k : predicted) r.correct += approved.count(k);
  if (r.predicted > 0) r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.predicted);
  r.coverage = r.approved > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.approved) : 0.0;
  return r;
}

std::set<AnnotationKey> approved_keys(const std::vector<Selection>& selections, const ScanTree& spectra) {
  std::set<AnnotationKey> out;
  for (const auto& s : current_selections(selections)) {
    const Scan* scan = spectra.find(s.scan_id);
    if (s.approved && scan && scan->ms_level == 2) out.emplace(s.scan_id, s.glycan_id);
  }
  return out;
}

std::vector<ArchiveBlock> annotate_in_memory(const ScanTree& spectra, const std::vector<GlycanRecord>& db,
                                             const RunSettings& settings, RunStats* stats, const MassModel& model) {
  std::stringstream data;
  ArchiveWriter writer(data);
  auto s = annotate_run(spectra, db, settings, writer, model);
  if (stats) *stats = std::move(s);
  data.seekg(0);
  return read_archive(data);
}

std::set<AnnotationKey> predict(const SageGraph& graph, const std::vector<ArchiveBlock>& archive,
                                const RunSettings& settings, std::optional<int> top_k) {
  std::set<AnnotationKey> out;
  for (const auto& [scan, features] : archive_features(archive))
    for (const auto& c : classify(graph, features, settings.ms1_tolerance, settings.smoothing, top_k))
      out.emplace(scan, c.glycan_id);
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<TrainingRecord> approved_training(const std::vector<Selection>& selections,
                                              const std::vector<ArchiveBlock>& archive) {
  std::map<std::tuple<ScanId, std::string, std::string>, std::pair<const AnnotationRecord*, const ArchiveScan*>> index;
  for (const auto& b : archive)
    for (const auto& r : b.records) index[{r.scan_id, r.glycan_id, r.config_signature}] = {&r, &b.scan};
  std::vector<TrainingRecord> out;
  for (const auto& s : current_selections(selections)) {
    if (!s.approved) continue;
    auto it = index.find({s.scan_id, s.glycan_id, s.config_signature});
    if (it == index.end() || it->second.second->ms_level < 2) continue;
    out.push_back(training_record(*it->second.first, *it->second.second));
  }
  return out;
}

std::set<AnnotationKey> predict_baseline(const NaiveBayesBaseline& nb, const std::vector<ArchiveBlock>& archive,
                                         std::optional<int> top_k) {
  auto features = archive_features(archive);
  std::set<AnnotationKey> out;
  for (const auto& b : archive) {
    if (b.scan.ms_level != 2) continue;
    std::set<std::string> candidates;
    for (const auto& r : b.records) candidates.insert(r.glycan_id);
    const auto& f = features[b.scan.scan_id];
    static const std::set<std::string> none;
    for (const auto& c : nb.classify(f.levels.empty() ? none : f.levels[0], top_k, &candidates))
      out.emplace(b.scan.scan_id, c.glycan_id);
  }
  return out;
}

} // namespace

EvaluationReport leave_one_out(const std::vector<Dataset>& datasets, const std::vector<GlycanRecord>& db,
                               const RunSettings& settings, const LooOptions& options, const MassModel& model) {
  if (datasets.size() < 2) throw InputError("leave-one-out needs at least two datasets");
  EvaluationReport report;

  auto t0 = Clock::now();
  std::vector<std::vector<ArchiveBlock>> archives;
  std::vector<std::vector<TrainingRecord>> training;
  for (const auto& d : datasets) {
    RunStats stats;
    archives.push_back(annotate_in_memory(d.spectra, db, settings, &stats, model));
    report.peak_records = std::max(report.peak_records, stats.max_scan_records);
    training.push_back(approved_training(d.selections, archives.back()));
  }
  report.annotate_ms = ms_since(t0);

  const std::size_t n = datasets.size();
  std::vector<std::optional<FoldResult>> folds(n);
  std::vector<double> train_ms(n, 0.0);
  auto run_fold = [&](std::size_t i) {
    auto approved = approved_keys(datasets[i].selections, datasets[i].spectra);
    if (approved.empty()) return;
    auto t = Clock::now();
    std::set<AnnotationKey> predicted;
    if (options.baseline) {
      NaiveBayesBaseline nb;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) nb.train(training[j]);
      train_ms[i] = ms_since(t);
      predicted = predict_baseline(nb, archives[i], options.top_k);
    } else {
      SageGraph graph(MzTolerance{settings.ms1_tolerance.value, settings.ms1_tolerance.unit, MsScope::MS1});
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) train(graph, training[j]);
      train_ms[i] = ms_since(t);
      predicted = predict(graph, archives[i], settings, options.top_k);
    }
    auto e = evaluate(predicted, approved);
    folds[i] = FoldResult{i, e.accuracy, e.coverage, e.predicted, e.approved, e.correct};
  };
  if (options.threads > 1) {
    std::vector<std::thread> pool;
    std::mutex m;
    std::size_t next = 0;
    auto worker = [&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(m);
          if (next >= n) return;
          i = next++;
        }
        run_fold(i);
      }
    };
    for (int t = 0; t < std::min<int>(options.threads, static_cast<int>(n)); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < n; ++i) run_fold(i);
  }

  double acc_sum = 0.0, cov_sum = 0.0;
  std::size_t acc_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    report.train_ms += train_ms[i];
    if (!folds[i]) {
      report.warnings.push_back("fold " + std::to_string(i) + " (" + datasets[i].name +
                                ") skipped: no approved annotations");
      continue;
    }
    const auto& f = *folds[i];
    report.folds.push_back(f);
    report.predicted += f.predicted;
    report.approved += f.approved;
    report.correct += f.correct;
    cov_sum += f.coverage;
    if (f.accuracy) {
      acc_sum += *f.accuracy;
      ++acc_n;
    }
  }
  report.fold_count = report.folds.size();
  if (report.fold_count > 0) report.coverage = cov_sum / static_cast<double>(report.fold_count);
  if (acc_n > 0) report.accuracy = acc_sum / static_cast<double>(acc_n);
  return report;
}

namespace {

// Portable draws from the raw 64-bit engine output.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }
  int between(int lo, int hi) { return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1)); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
  std::mt19937_64 engine_;
};

std::vector<double> distinct_mzs(const std::vector<FragmentIon>& fragments, const IonConfiguration& config) {
  std::vector<double> out;
  for (const auto& f : fragments) out.push_back(mz(f.neutral_mass, config));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-6; }),
            out.end());
  return out;
}

std::vector<Peak> with_noise(const std::vector<double>& mzs, double noise, Rng& rng) {
  std::vector<Peak> peaks;
  for (double m : mzs) peaks.push_back({m, std::round(rng.uniform(10.0, 100.0) * 1000.0) / 1000.0});
  if (!mzs.empty()) {
    const auto extra = static_cast<std::size_t>(std::llround(noise * static_cast<double>(mzs.size())));
    const double lo = std::max(1.0, mzs.front() - 10.0), hi = mzs.back() + 10.0;
    for (std::size_t k = 0; k < extra; ++k)
      peaks.push_back({std::round(rng.uniform(lo, hi) * 1e4) / 1e4, std::round(rng.uniform(1.0, 100.0) * 1000.0) / 1000.0});
  }
  return peaks;
}

const char* const kReviewer = "synthetic";
const char* const kTimestamp = "1970-01-01T00:00:00Z";

} // namespace

SyntheticRun generate_synthetic(std::uint64_t seed, std::size_t n_datasets, const std::vector<GlycanRecord>& db,
                                double noise, const RunSettings& settings, const MassModel& model) {
  if (db.empty()) throw InputError("glycan database is empty");
  if (!(noise >= 0.0)) throw InputError("noise rate must be non-negative");
  Rng rng(seed);
  SyntheticRun run;

  std::vector<const GlycanRecord*> glycans;
  for (const auto& g : db) glycans.push_back(&g);
  std::sort(glycans.begin(), glycans.end(),
            [](const GlycanRecord* a, const GlycanRecord* b) { return a->id() < b->id(); });
  const auto configs = enumerate_ion_configurations(settings.precursor_ion_settings());
  const IonConfiguration fragment_config({{settings.carriers.front(), 1}}, {}, {});
  const bool permethylated = settings.derivatization == Derivatization::permethylated;

  for (const auto* g : glycans) {
    KnownEntry e{g->id(), configs[rng.index(configs.size())], 0, rng.next() % 2 == 0, fragment_config};
    if (permethylated)
      e.missing_methyls = rng.between(0, std::min(settings.max_undermethylation,
                                                  total_methylation_sites(g->structure, model.residues)));
    run.model.push_back(e);
  }

  // Spectra content is fixed by the model; only intensities and noise vary.
  struct Planned {
    double precursor_mz;
    std::vector<double> ms2;
    std::optional<FragmentIon> ms3_fragment;
    std::vector<double> ms3;
  };
  std::vector<Planned> plans;
  for (std::size_t i = 0; i < run.model.size(); ++i) {
    const auto& e = run.model[i];
    const auto& g = glycans[i]->structure;
    auto deriv = permethylated ? DerivatizationState::permethylated(e.missing_methyls) : DerivatizationState::native();
    auto cand = Candidate::from_glycan(g, deriv, model);
    Planned p;
    p.precursor_mz = mz(neutral_mass(g, deriv, model), e.precursor_config);
    auto frags = enumerate_fragments(cand, settings.fragmentation, 2, model);
    p.ms2 = distinct_mzs(frags, e.fragment_config);
    if (settings.max_ms_level >= 3) {
      const FragmentIon* best = nullptr;
      for (const auto& f : frags) {
        if (f.substructure.missing_methyls() != 0 || f.substructure.structure().size() < 2) continue;
        if (!best || f.substructure.structure().size() > best->substructure.structure().size() ||
            (f.substructure.structure().size() == best->substructure.structure().size() && f.signature < best->signature))
          best = &f;
      }
      if (best) {
        p.ms3_fragment = *best;
        p.ms3 = distinct_mzs(enumerate_fragments(fragment_as_precursor(*best), settings.fragmentation, 3, model),
                             e.fragment_config);
      }
    }
    plans.push_back(std::move(p));
  }

  for (std::size_t d = 0; d < n_datasets; ++d) {
    Rng drng(seed ^ (0x9E3779B97F4A7C15ULL * (d + 1)));
    Dataset ds;
    ds.name = "dataset_" + std::to_string(d + 1);
    std::vector<Scan> scans;
    Scan ms1;
    ms1.scan_id = 1;
    ms1.ms_level = 1;
    std::vector<double> precursors;
    for (const auto& p : plans) precursors.push_back(p.precursor_mz);
    std::sort(precursors.begin(), precursors.end());
    ms1.peaks = with_noise(precursors, noise, drng);
    scans.push_back(std::move(ms1));
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const auto& e = run.model[i];
      const auto& p = plans[i];
      Scan ms2;
      ms2.scan_id = static_cast<ScanId>(2 + 2 * i);
      ms2.ms_level = 2;
      ms2.parent_scan_id = 1;
      ms2.precursor_mz = p.precursor_mz;
      if (e.charge_known) ms2.precursor_charge = e.precursor_config.charge();
      ms2.peaks = with_noise(p.ms2, noise, drng);
      ds.selections.push_back({ms2.scan_id, e.glycan_id, config_signature(e.precursor_config, e.missing_methyls),
                               true, kReviewer, kTimestamp});
      scans.push_back(std::move(ms2));
      if (p.ms3_fragment) {
        Scan ms3;
        ms3.scan_id = static_cast<ScanId>(3 + 2 * i);
        ms3.ms_level = 3;
        ms3.parent_scan_id = static_cast<ScanId>(2 + 2 * i);
        ms3.precursor_mz = mz(p.ms3_fragment->neutral_mass, e.fragment_config);
        ms3.precursor_charge = e.fragment_config.charge();
        ms3.peaks = with_noise(p.ms3, noise, drng);
        ds.selections.push_back({ms3.scan_id, p.ms3_fragment->signature,
                                 config_signature(e.fragment_config, p.ms3_fragment->substructure.missing_methyls()),
                                 true, kReviewer, kTimestamp});
        scans.push_back(std::move(ms3));
      }
    }
    for (auto& s : scans) normalize_peaks(s);
    ds.spectra = link_precursors(std::move(scans));
    run.datasets.push_back(std::move(ds));
  }
  return run;
}

std::vector<GlycanRecord> synthetic_database(std::uint64_t seed, std::size_t n, int min_residues, int max_residues,
                                             const MassModel& model) {
  if (min_residues < 1 || max_residues < min_residues) throw InputError("invalid residue range");
  static const char* const kCodes[] = {"Hex", "HexNAc", "dHex", "NeuAc", "Pent"};
  Rng rng(seed);
  std::vector<GlycanRecord> out;
  std::set<std::string> seen;
  std::size_t attempts = 0;
  while (out.size() < n) {
    if (++attempts > 1000 * (n + 1)) throw InputError("cannot draw enough distinct compositions");
    const int size = rng.between(min_residues, max_residues);
    // Flat node list; node k > 0 hangs below a random earlier node.
    std::vector<GlycanStructure::Draft> nodes(static_cast<std::size_t>(size));
    std::vector<int> parent(static_cast<std::size_t>(size), -1);
    std::vector<std::set<int>> used(static_cast<std::size_t>(size));
    bool ok = true;
    for (int k = 0; k < size; ++k) {
      auto& d = nodes[static_cast<std::size_t>(k)];
      const char* code = kCodes[rng.index(5)];
      d.code = model.residues.find(code) ? code : "Hex";
      if (k == 0) continue;
      int p = rng.between(0, k - 1);
      int pos = rng.between(2, 6);
      if (!used[static_cast<std::size_t>(p)].insert(pos).second) {
        ok = false;
        break;
      }
      parent[static_cast<std::size_t>(k)] = p;
      d.link = Linkage{rng.next() % 2 ? "a" : "b", pos};
    }
    if (!ok) continue;
    // NeuAc and dHex are terminal in practice; keep them as leaves.
    for (int k = 1; k < size; ++k) {
      const auto& pc = nodes[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])].code;
      if (pc == "NeuAc" || pc == "dHex") ok = false;
    }
    if (!ok) continue;
    for (int k = size - 1; k > 0; --k) {
      auto& p = nodes[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])];
      p.children.insert(p.children.begin(), nodes[static_cast<std::size_t>(k)]);
    }
    char id[32];
    std::snprintf(id, sizeof id, "SG%04zu", out.size() + 1);
    GlycanStructure g(id, nodes[0]);
    auto key = composition_of(g).to_string();
    if (!seen.insert(key).second) continue;
    out.push_back({std::move(g), "synthetic"});
  }
  return out;
}

void NaiveBayesBaseline::add(const std::string& glycan, const std::set<std::string>& features) {
  ++class_counts_[glycan];
  ++total_;
  auto& counts = feature_counts_[glycan];
  for (const auto& f : features) ++counts[f];
}

void NaiveBayesBaseline::train(const std::vector<TrainingRecord>& records) {
  for (const auto& r : records)
    if (r.ms_level == 2) add(r.glycan_id, r.features);
}

std::vector<Classification> NaiveBayesBaseline::classify(const std::set<std::string>& features, std::optional<int> k,
                                                         const std::set<std::string>* allowed) const {
  std::vector<Classification> out;
  for (const auto& [g, n] : class_counts_) {
    if (allowed && !allowed->count(g)) continue;
    double logp = std::log(static_cast<double>(n) / static_cast<double>(total_));
    const auto& counts = feature_counts_.at(g);
    for (const auto& f : features) {
      auto it = counts.find(f);
      const double c = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      logp += std::log((c + 1.0) / (static_cast<double>(n) + 2.0));
    }
    out.push_back({g, g, std::exp(logp)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Classification& a, const Classification& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.glycan_id < b.glycan_id;
  });
  if (k && static_cast<std::size_t>(*k) < out.size()) out.resize(static_cast<std::size_t>(*k));
  return out;
}

void write_report(std::ostream& out, const EvaluationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string("undefined"); };
  out << "folds " << r.fold_count << '\n'
      << "accuracy " << opt(r.accuracy) << '\n'
      << "coverage " << text::format_double(r.coverage) << '\n'
      << "predicted " << r.predicted << '\n'
      << "approved " << r.approved << '\n'
      << "correct " << r.correct << '\n'
      << "train_ms " << text::format_double(r.train_ms) << '\n'
      << "annotate_ms " << text::format_double(r.annotate_ms) << '\n'
      << "peak_records " << r.peak_records << '\n';
  for (const auto& f : r.folds)
    out << "fold " << f.fold << " accuracy " << opt(f.accuracy) << " coverage " << text::format_double(f.coverage)
        << " predicted " << f.predicted << " approved " << f.approved << " correct " << f.correct << '\n';
  for (const auto& w : r.warnings) out << "warning " << w << '\n';
}

void write_report_csv(std::ostream& out, const EvaluationReport& r) {
  out << "fold,accuracy,coverage,predicted,approved,correct\n";
  for (const auto& f : r.folds)
    out << f.fold << ',' << (f.accuracy ? text::format_double(*f.accuracy) : "") << ','
        << text::format_double(f.coverage) << ',' << f.predicted << ',' << f.approved << ',' << f.correct << '\n';
  out << "mean," << (r.accuracy ? text::format_double(*r.accuracy) : "") << ',' << text::format_double(r.coverage)
      << ',' << r.predicted << ',' << r.approved << ',' << r.correct << '\n';
}

} // namespace glyco
