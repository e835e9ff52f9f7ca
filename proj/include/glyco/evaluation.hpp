#pragma once

// Evaluation harness: accuracy/coverage, leave-one-out cross-validation,
// synthetic ground truth and a naive Bayes baseline.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "glyco/archive.hpp"
#include "glyco/engine.hpp"
#include "glyco/sage.hpp"
#include "glyco/settings.hpp"
#include "glyco/spectra.hpp"

namespace glyco {

/// Annotation identity for metrics: (scan id, glycan id).
using AnnotationKey = std::pair<ScanId, std::string>;

struct FoldResult {
  std::size_t fold = 0;
  std::optional<double> accuracy; // unset when nothing was predicted
  double coverage = 0.0;
  std::size_t predicted = 0;
  std::size_t approved = 0;
  std::size_t correct = 0;
};

struct EvaluationReport {
  std::optional<double> accuracy; // unset when nothing was predicted
  double coverage = 0.0;
  std::size_t predicted = 0;
  std::size_t approved = 0;
  std::size_t correct = 0;
  std::vector<FoldResult> folds;
  std::size_t fold_count = 0;
  std::vector<std::string> warnings;
  double train_ms = 0.0;
  double annotate_ms = 0.0;
  std::size_t peak_records = 0; // largest per-scan record count seen while annotating
};

EvaluationReport evaluate(const std::set<AnnotationKey>& predicted, const std::set<AnnotationKey>& approved);

/// Approved current selections on MS2 scans as metric keys.
std::set<AnnotationKey> approved_keys(const std::vector<Selection>& selections, const ScanTree& spectra);

struct Dataset {
  std::string name;
  ScanTree spectra;
  std::vector<Selection> selections;
};

struct LooOptions {
  std::optional<int> top_k; // unset: every reported annotation counts
  int threads = 1;          // folds run concurrently when > 1
  bool baseline = false;    // score with NaiveBayesBaseline instead of the graph
};

/// For each dataset: train a fresh graph on the others' approved selections
/// (resolved against engine output), classify the held-out MS2 scans from
/// their engine features, evaluate against its approved set. Folds without
/// approved annotations are skipped with a warning. Reports per-fold values
/// and their means. Throws InputError with fewer than two datasets.
EvaluationReport leave_one_out(const std::vector<Dataset>& datasets, const std::vector<GlycanRecord>& db,
                               const RunSettings& settings, const LooOptions& options = {},
                               const MassModel& model = MassModel::defaults());

/// Engine output for one dataset, kept in memory.
std::vector<ArchiveBlock> annotate_in_memory(const ScanTree& spectra, const std::vector<GlycanRecord>& db,
                                             const RunSettings& settings, RunStats* stats = nullptr,
                                             const MassModel& model = MassModel::defaults());

/// Predicted (scan, glycan) keys for every MS2 scan of an archive.
std::set<AnnotationKey> predict(const SageGraph& graph, const std::vector<ArchiveBlock>& archive,
                                const RunSettings& settings, std::optional<int> top_k);

/// Fixed annotation behind every synthetic dataset: one per glycan.
struct KnownEntry {
  std::string glycan_id;
  IonConfiguration precursor_config;
  int missing_methyls = 0;
  bool charge_known = true;
  IonConfiguration fragment_config;
};

struct SyntheticRun {
  std::vector<KnownEntry> model;
  std::vector<Dataset> datasets;
};

/// Deterministic under `seed`. Every dataset holds one MS1 scan and, per
/// known entry, an MS2 scan of its theoretical fragment peaks plus an MS3
/// scan of one fragment; noise adds round(noise * true peaks) random peaks
/// per scan. The generating annotations are the approved selections.
SyntheticRun generate_synthetic(std::uint64_t seed, std::size_t n_datasets, const std::vector<GlycanRecord>& db,
                                double noise, const RunSettings& settings,
                                const MassModel& model = MassModel::defaults());

/// Random glycans with pairwise distinct compositions.
std::vector<GlycanRecord> synthetic_database(std::uint64_t seed, std::size_t n, int min_residues = 2,
                                             int max_residues = 6, const MassModel& model = MassModel::defaults());

/// Multinomial naive Bayes over (glycan, feature) counts with add-one
/// smoothing: n(G)/N * prod_f (n(G,f) + 1) / (n(G) + 2).
class NaiveBayesBaseline {
public:
  void train(const std::vector<TrainingRecord>& records);
  void add(const std::string& glycan, const std::set<std::string>& features);

  /// All known glycans (or `allowed`) ranked by probability, then id.
  std::vector<Classification> classify(const std::set<std::string>& features, std::optional<int> k = std::nullopt,
                                       const std::set<std::string>* allowed = nullptr) const;

private:
  std::map<std::string, std::int64_t> class_counts_;
  std::map<std::string, std::map<std::string, std::int64_t>> feature_counts_;
  std::int64_t total_ = 0;
};

void write_report(std::ostream& out, const EvaluationReport& report);
void write_report_csv(std::ostream& out, const EvaluationReport& report);

} // namespace glyco
