#include "glyco/engine.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "glyco/errors.hpp"

namespace glyco {

std::string config_signature(const IonConfiguration& config, int missing_methyls) {
  return config.signature() + "/u" + std::to_string(missing_methyls);
}

namespace {

// Theoretical values t with |observed - t| <= tol.window(t) all lie in [lo, hi].
std::pair<double, double> search_bounds(double observed, const MzTolerance& tol) {
  constexpr double slack = 1e-9;
  if (tol.unit == ToleranceUnit::Da) return {observed - tol.value - slack, observed + tol.value + slack};
  const double f = tol.value * 1e-6;
  const double hi = f < 1.0 ? observed / (1.0 - f) : observed * 1e12;
  return {observed / (1.0 + f) - slack, hi + slack};
}

std::vector<int> variant_counts(const GlycanStructure& g, const RunSettings& settings, const MassModel& model) {
  if (settings.derivatization != Derivatization::permethylated) return {0};
  std::vector<int> out;
  for (const auto& v : undermethylation_variants(g, settings.max_undermethylation, model))
    out.push_back(v.state.missing_methyls);
  return out;
}

DerivatizationState state_for(const RunSettings& settings, int missing) {
  return settings.derivatization == Derivatization::permethylated ? DerivatizationState::permethylated(missing)
                                                                  : DerivatizationState::native();
}

bool charge_allowed(const std::optional<int>& declared, const IonConfiguration& config) {
  return !declared || std::abs(*declared) == config.abs_charge();
}

} // namespace

std::vector<PrecursorMatch> match_precursor(const Scan& scan, const GlycanStructure& glycan,
                                            const RunSettings& settings, const MassModel& model) {
  std::vector<PrecursorMatch> out;
  if (!scan.precursor_mz) return out;
  const auto configs = enumerate_ion_configurations(settings.precursor_ion_settings());
  const auto variants = variant_counts(glycan, settings, model);
  std::vector<double> masses;
  for (int u : variants) masses.push_back(neutral_mass(glycan, state_for(settings, u), model));
  for (const auto& config : configs) {
    if (!charge_allowed(scan.precursor_charge, config)) continue;
    for (std::size_t k = 0; k < variants.size(); ++k) {
      double theo = mz(masses[k], config);
      if (matches(*scan.precursor_mz, theo, settings.ms1_tolerance))
        out.push_back({config, variants[k], theo});
    }
  }
  return out;
}

FragmentTable::FragmentTable(const Candidate& candidate, int level, int precursor_charge,
                             const RunSettings& settings, const MassModel& model) {
  fragments_ = enumerate_fragments(candidate, settings.fragmentation, level, model);
  configs_ = enumerate_ion_configurations(settings.fragment_ion_settings(level, std::abs(precursor_charge)));
  for (const auto& c : configs_) config_sigs_.push_back(c.signature());
  entries_.reserve(fragments_.size() * configs_.size());
  for (std::size_t f = 0; f < fragments_.size(); ++f)
    for (std::size_t c = 0; c < configs_.size(); ++c)
      entries_.push_back({mz(fragments_[f].neutral_mass, configs_[c]), static_cast<int>(f), static_cast<int>(c)});
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.mz, a.fragment, a.config) < std::tie(b.mz, b.fragment, b.config);
  });
}

std::pair<std::size_t, std::size_t> FragmentTable::candidates_near(double observed,
                                                                   const MzTolerance& tol) const {
  auto [lo, hi] = search_bounds(observed, tol);
  auto first = std::lower_bound(entries_.begin(), entries_.end(), lo,
                                [](const Entry& e, double v) { return e.mz < v; });
  auto last = std::upper_bound(first, entries_.end(), hi, [](double v, const Entry& e) { return v < e.mz; });
  return {static_cast<std::size_t>(first - entries_.begin()), static_cast<std::size_t>(last - entries_.begin())};
}

AnnotationRecord annotate_scan(const Scan& scan, const Candidate& candidate, const IonConfiguration& config,
                               const FragmentTable& table, const RunSettings& settings,
                               std::vector<ParentFragment>* matched) {
  AnnotationRecord r;
  r.scan_id = scan.scan_id;
  r.ms_level = scan.ms_level;
  r.glycan_id = candidate.id();
  r.config_signature = config_signature(config, candidate.missing_methyls());
  if (candidate.is_fragment()) r.candidate_key = candidate.feature_key();

  std::set<std::pair<int, int>> kept;
  std::size_t annotated_peaks = 0;
  double annotated_intensity = 0.0;
  const auto& entries = table.entries();
  for (std::size_t i = 0; i < scan.peaks.size(); ++i) {
    const double obs = scan.peaks[i].mz;
    auto [first, last] = table.candidates_near(obs, settings.msn_tolerance);
    bool hit = false;
    for (std::size_t k = first; k < last; ++k) {
      const auto& e = entries[k];
      if (!matches(obs, e.mz, settings.msn_tolerance)) continue;
      const auto& frag = table.fragments()[e.fragment];
      r.peak_annotations.push_back(
          {i, frag.signature, e.mz, obs - e.mz, table.config_signatures()[e.config], frag.feature_key});
      hit = true;
      if (matched && kept.emplace(e.fragment, e.config).second)
        matched->push_back({fragment_as_precursor(frag), table.configs()[e.config], e.mz});
    }
    if (hit) {
      ++annotated_peaks;
      annotated_intensity += scan.peaks[i].intensity;
    }
  }
  if (scan.peaks.empty()) {
    r.empty_spectrum = true;
    r.score_c = 0.0;
    r.score_i = 0.0;
  } else {
    r.score_c = static_cast<double>(annotated_peaks) / static_cast<double>(scan.peaks.size());
    const double total = scan.total_intensity();
    r.score_i = total > 0.0 ? annotated_intensity / total : 0.0;
  }
  return r;
}

AnnotationRecord annotate_scan(const Scan& scan, const Candidate& candidate, const IonConfiguration& config,
                               const RunSettings& settings, const MassModel& model) {
  FragmentTable table(candidate, scan.ms_level, config.abs_charge(), settings, model);
  return annotate_scan(scan, candidate, config, table, settings);
}

std::vector<AnnotationRecord> rank_annotations(std::vector<AnnotationRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    double ai = a.score_i.value_or(0.0), bi = b.score_i.value_or(0.0);
    if (ai != bi) return ai > bi;
    double ac = a.score_c.value_or(0.0), bc = b.score_c.value_or(0.0);
    if (ac != bc) return ac > bc;
    return std::tie(a.glycan_id, a.config_signature) < std::tie(b.glycan_id, b.config_signature);
  });
  return records;
}

namespace {

struct PrecursorEntry {
  double mz;
  int glycan; // index into the id-sorted database
  int config;
  int missing;
};

struct Candidacy {
  Candidate candidate;
  IonConfiguration config;
  // Sort key: glycan order, configuration order, missing methyls.
  std::tuple<std::string, int, std::string, int> key;
};

class RunContext {
public:
  RunContext(const ScanTree& tree, const std::vector<GlycanRecord>& db, const RunSettings& settings,
             ArchiveWriter& writer, const MassModel& model)
      : tree_(tree), settings_(settings), writer_(writer), model_(model) {
    for (const auto& g : db) glycans_.push_back(&g.structure);
    std::sort(glycans_.begin(), glycans_.end(),
              [](const GlycanStructure* a, const GlycanStructure* b) { return a->id() < b->id(); });
    configs_ = enumerate_ion_configurations(settings.precursor_ion_settings());
    for (const auto& c : configs_) config_sigs_.push_back(c.signature());
    for (std::size_t g = 0; g < glycans_.size(); ++g)
      for (int u : variant_counts(*glycans_[g], settings, model)) {
        const double mass = neutral_mass(*glycans_[g], state_for(settings, u), model);
        for (std::size_t c = 0; c < configs_.size(); ++c)
          table_.push_back({mz(mass, configs_[c]), static_cast<int>(g), static_cast<int>(c), u});
      }
    std::sort(table_.begin(), table_.end(), [](const PrecursorEntry& a, const PrecursorEntry& b) {
      return std::tie(a.mz, a.glycan, a.config, a.missing) < std::tie(b.mz, b.glycan, b.config, b.missing);
    });
  }

  RunStats run() {
    const long live0 = LiveCounter::live();
    LiveCounter::reset_peak();
    for (ScanId root : tree_.roots()) process(root, nullptr);
    writer_.close();
    stats_.peak_live_records = std::max(0L, LiveCounter::peak() - live0);
    return std::move(stats_);
  }

private:
  // Precursor entries within the MS1 tolerance of `observed`.
  std::vector<const PrecursorEntry*> precursor_hits(double observed, const std::optional<int>& charge) const {
    auto [lo, hi] = search_bounds(observed, settings_.ms1_tolerance);
    auto first = std::lower_bound(table_.begin(), table_.end(), lo,
                                  [](const PrecursorEntry& e, double v) { return e.mz < v; });
    std::vector<const PrecursorEntry*> out;
    for (auto it = first; it != table_.end() && it->mz <= hi; ++it)
      if (matches(observed, it->mz, settings_.ms1_tolerance) && charge_allowed(charge, configs_[it->config]))
        out.push_back(&*it);
    std::sort(out.begin(), out.end(), [](const PrecursorEntry* a, const PrecursorEntry* b) {
      return std::tie(a->glycan, a->config, a->missing) < std::tie(b->glycan, b->config, b->missing);
    });
    return out;
  }

  std::shared_ptr<const FragmentTable> fragment_table(const Candidate& c, int level, int charge) {
    std::string key = c.id() + '#' + std::to_string(c.missing_methyls()) + '#' + std::to_string(level) + '#' +
                      std::to_string(charge);
    {
      std::lock_guard lock(cache_mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    std::shared_ptr<const FragmentTable> table;
    std::string diagnostic;
    try {
      table = std::make_shared<const FragmentTable>(c, level, charge, settings_, model_);
    } catch (const FragmentLimitExceeded& e) {
      diagnostic = e.what();
    }
    std::lock_guard lock(cache_mutex_);
    if (!diagnostic.empty()) stats_.diagnostics.push_back(diagnostic);
    if (cache_.size() >= kCacheLimit) cache_.clear();
    cache_.emplace(key, table);
    return table;
  }

  void annotate_ms1(const Scan& scan) {
    std::map<std::tuple<int, int, int>, std::vector<PeakAnnotation>> groups;
    for (std::size_t i = 0; i < scan.peaks.size(); ++i)
      for (const auto* e : precursor_hits(scan.peaks[i].mz, std::nullopt)) {
        const auto& id = glycans_[e->glycan]->id();
        groups[{e->glycan, e->config, e->missing}].push_back(
            {i, id, e->mz, scan.peaks[i].mz - e->mz, config_sigs_[e->config], {}});
      }
    writer_.begin_scan(archive_scan_of(scan));
    for (auto& [key, peaks] : groups) {
      AnnotationRecord r;
      r.scan_id = scan.scan_id;
      r.ms_level = 1;
      r.glycan_id = glycans_[std::get<0>(key)]->id();
      r.config_signature = config_sigs_[std::get<1>(key)] + "/u" + std::to_string(std::get<2>(key));
      r.peak_annotations = std::move(peaks);
      writer_.write(r);
    }
    finish_scan(groups.size());
  }

  void finish_scan(std::size_t records) {
    writer_.end_scan();
    ++stats_.scans;
    stats_.records += records;
    stats_.max_scan_records = std::max(stats_.max_scan_records, records);
  }

  std::vector<Candidacy> candidacies(const Scan& scan, const std::vector<ParentFragment>* parents) {
    std::vector<Candidacy> out;
    if (!scan.precursor_mz) return out;
    if (scan.ms_level == 2) {
      for (const auto* e : precursor_hits(*scan.precursor_mz, scan.precursor_charge)) {
        const auto& g = *glycans_[e->glycan];
        out.push_back({Candidate::from_glycan(g, state_for(settings_, e->missing), model_), configs_[e->config],
                       {g.id(), e->config, {}, e->missing}});
      }
      return out;
    }
    if (!parents) return out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& pf : *parents) {
      if (!matches(*scan.precursor_mz, pf.theoretical_mz, settings_.msn_tolerance)) continue;
      if (!charge_allowed(scan.precursor_charge, pf.config)) continue;
      auto sig = pf.config.signature();
      if (!seen.emplace(pf.candidate.id(), sig).second) continue;
      out.push_back({pf.candidate, pf.config, {pf.candidate.id(), 0, sig, pf.candidate.missing_methyls()}});
    }
    std::sort(out.begin(), out.end(), [](const Candidacy& a, const Candidacy& b) { return a.key < b.key; });
    return out;
  }

  // Annotates one candidate; parent fragments are kept only when they fit
  // some child scan's precursor.
  std::optional<AnnotationRecord> annotate_one(const Scan& scan, const Candidacy& c,
                                               const std::vector<const Scan*>& children,
                                               std::vector<ParentFragment>& keep) {
    auto table = fragment_table(c.candidate, scan.ms_level, c.config.abs_charge());
    if (!table) return std::nullopt;
    std::vector<ParentFragment> matched;
    auto record = annotate_scan(scan, c.candidate, c.config, *table, settings_, children.empty() ? nullptr : &matched);
    for (auto& pf : matched)
      for (const Scan* child : children)
        if (matches(*child->precursor_mz, pf.theoretical_mz, settings_.msn_tolerance) &&
            charge_allowed(child->precursor_charge, pf.config)) {
          keep.push_back(std::move(pf));
          break;
        }
    return record;
  }

  void process(ScanId id, const std::vector<ParentFragment>* parents) {
    const Scan& scan = tree_.at(id);
    if (scan.ms_level > settings_.max_ms_level) return;
    std::vector<ParentFragment> next;
    if (scan.ms_level == 1) {
      annotate_ms1(scan);
    } else {
      std::vector<const Scan*> children;
      if (scan.ms_level < settings_.max_ms_level)
        for (ScanId c : tree_.children(id)) children.push_back(&tree_.at(c));
      auto cands = candidacies(scan, parents);
      writer_.begin_scan(archive_scan_of(scan));
      std::size_t written = 0;
      if (settings_.threads <= 1 || cands.size() < 2) {
        for (const auto& c : cands)
          if (auto r = annotate_one(scan, c, children, next)) {
            writer_.write(*r);
            ++written;
          }
      } else {
        std::vector<std::optional<AnnotationRecord>> results(cands.size());
        std::vector<std::vector<ParentFragment>> kept(cands.size());
        std::atomic<std::size_t> cursor{0};
        std::mutex error_mutex;
        std::exception_ptr error;
        auto worker = [&] {
          for (std::size_t i; (i = cursor.fetch_add(1)) < cands.size();) {
            try {
              results[i] = annotate_one(scan, cands[i], children, kept[i]);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!error) error = std::current_exception();
            }
          }
        };
        std::vector<std::thread> pool;
        const std::size_t n = std::min<std::size_t>(settings_.threads, cands.size());
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
        for (std::size_t i = 0; i < cands.size(); ++i) {
          if (results[i]) {
            writer_.write(*results[i]);
            ++written;
            results[i].reset();
          }
          for (auto& pf : kept[i]) next.push_back(std::move(pf));
        }
      }
      finish_scan(written);
    }
    for (ScanId c : tree_.children(id)) process(c, &next);
  }

  static constexpr std::size_t kCacheLimit = 4096;

  const ScanTree& tree_;
  const RunSettings& settings_;
  ArchiveWriter& writer_;
  const MassModel& model_;
  std::vector<const GlycanStructure*> glycans_;
  std::vector<IonConfiguration> configs_;
  std::vector<std::string> config_sigs_;
  std::vector<PrecursorEntry> table_;
  std::mutex cache_mutex_;
  std::map<std::string, std::shared_ptr<const FragmentTable>> cache_;
  RunStats stats_;
};

} // namespace

RunStats annotate_run(const ScanTree& tree, const std::vector<GlycanRecord>& db, const RunSettings& settings,
                      ArchiveWriter& writer, const MassModel& model) {
  if (db.empty()) throw InputError("glycan database is empty");
  RunContext ctx(tree, db, settings, writer, model);
  return ctx.run();
}

} // namespace glyco
