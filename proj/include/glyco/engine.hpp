#pragma once

// Annotation engine: precursor matching, in-silico fragmentation, peak
// annotation with score_c / score_i, recursive MS^n descent and streaming
// archive output.

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "glyco/archive.hpp"
#include "glyco/fragmenter.hpp"
#include "glyco/glycan.hpp"
#include "glyco/ion.hpp"
#include "glyco/settings.hpp"
#include "glyco/spectra.hpp"

namespace glyco {

struct PrecursorMatch {
  IonConfiguration config;
  int missing_methyls = 0;
  double theoretical_mz = 0.0;
};

/// Configurations (and undermethylation variants) whose m/z matches the
/// scan's precursor within the MS1 tolerance. A known precursor charge
/// restricts |z|; an unknown one admits every z in 1..max_charge. Ordered by
/// configuration enumeration order, then missing methyls.
std::vector<PrecursorMatch> match_precursor(const Scan& scan, const GlycanStructure& glycan,
                                            const RunSettings& settings,
                                            const MassModel& model = MassModel::defaults());

/// Signature used in archives for a configuration at a methylation state.
std::string config_signature(const IonConfiguration& config, int missing_methyls);

/// Every fragment of `candidate` at the scan's MS level under every fragment
/// ion configuration up to |z| of `config`, sorted by theoretical m/z.
class FragmentTable {
public:
  struct Entry {
    double mz;
    int fragment;
    int config;
  };

  FragmentTable(const Candidate& candidate, int level, int precursor_charge,
                const RunSettings& settings, const MassModel& model);

  const std::vector<FragmentIon>& fragments() const noexcept { return fragments_; }
  const std::vector<IonConfiguration>& configs() const noexcept { return configs_; }
  const std::vector<std::string>& config_signatures() const noexcept { return config_sigs_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Entries whose m/z lies within `tol` of `observed` (window anchored on
  /// each theoretical value).
  std::pair<std::size_t, std::size_t> candidates_near(double observed, const MzTolerance& tol) const;

private:
  std::vector<FragmentIon> fragments_;
  std::vector<IonConfiguration> configs_;
  std::vector<std::string> config_sigs_;
  std::vector<Entry> entries_;
};

/// A fragment annotation of a parent scan kept as a candidate precursor for
/// its child scans.
struct ParentFragment {
  Candidate candidate;
  IonConfiguration config;
  double theoretical_mz = 0.0;
};

/// Record for one (scan, candidate, configuration): every (peak, fragment,
/// fragment configuration) within the MSn tolerance, plus the two scores.
/// An empty peak list yields scores 0 with `empty_spectrum` set.
AnnotationRecord annotate_scan(const Scan& scan, const Candidate& candidate,
                               const IonConfiguration& config, const RunSettings& settings,
                               const MassModel& model = MassModel::defaults());
AnnotationRecord annotate_scan(const Scan& scan, const Candidate& candidate,
                               const IonConfiguration& config, const FragmentTable& table,
                               const RunSettings& settings,
                               std::vector<ParentFragment>* matched = nullptr);

/// Descending by score_i, then score_c, then glycan id and configuration
/// ascending.
std::vector<AnnotationRecord> rank_annotations(std::vector<AnnotationRecord> records);

struct RunStats {
  std::size_t scans = 0;
  std::size_t records = 0;
  std::size_t max_scan_records = 0;
  /// Largest number of AnnotationRecord instances alive at once during the run.
  long peak_live_records = 0;
  std::vector<std::string> diagnostics;
};

/// Annotates the whole tree in depth-first scan order, writing each scan
/// block to `writer` as it completes. MS1 peaks are matched as precursors
/// (records without scores); MS2 scans against every database glycan; MS3
/// and deeper against the parent scan's matched fragments whose m/z fits the
/// child precursor. Records within a scan are ordered by glycan id,
/// configuration, missing methyls. `settings.threads` > 1 scores candidates
/// concurrently with identical output.
RunStats annotate_run(const ScanTree& tree, const std::vector<GlycanRecord>& db,
                      const RunSettings& settings, ArchiveWriter& writer,
                      const MassModel& model = MassModel::defaults());

} // namespace glyco
