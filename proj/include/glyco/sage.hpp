#pragma once

// Layered frequency graph of approved annotations: incremental training,
// conditional-probability scoring, classification and post-filtering.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "glyco/archive.hpp"
#include "glyco/errors.hpp"
#include "glyco/ion.hpp"
#include "glyco/settings.hpp"

namespace glyco {

/// Level 0 holds glycan roots labelled "<glycanId>@<bucket>"; level i >= 1
/// holds fragment feature keys observed at MS level i + 1.
class SageGraph {
public:
  using NodeKey = std::pair<int, std::string>;
  using EdgeKey = std::tuple<int, std::string, std::string>; // parent level, parent, child

  /// `bucket` sets the width of the precursor m/z buckets of root labels.
  explicit SageGraph(MzTolerance bucket = {10.0, ToleranceUnit::ppm, MsScope::MS1});

  const MzTolerance& bucket_width() const noexcept { return bucket_; }
  std::int64_t bucket_of(double mz) const;
  std::string root_label(const std::string& glycan_id, double precursor_mz) const;
  /// Glycan id of a root label (text before the last '@').
  static std::string glycan_of(const std::string& root_label);
  /// Buckets overlapping [mz - tol, mz + tol].
  std::pair<std::int64_t, std::int64_t> bucket_range(double mz, const MzTolerance& tol) const;

  void add_node(int level, const std::string& label, std::int64_t count = 1);
  /// Adds to the edge and to the child's incoming total. Node frequencies are untouched.
  void add_edge(int parent_level, const std::string& parent, const std::string& child, std::int64_t count = 1);

  std::int64_t node_frequency(int level, const std::string& label) const;
  std::int64_t edge_frequency(int parent_level, const std::string& parent, const std::string& child) const;
  /// Sum of incoming edge frequencies of a child node.
  std::int64_t child_total(int level, const std::string& label) const;
  bool has_node(int level, const std::string& label) const { return nodes_.count({level, label}) != 0; }

  const std::map<NodeKey, std::int64_t>& nodes() const noexcept { return nodes_; }
  const std::map<EdgeKey, std::int64_t>& edges() const noexcept { return edges_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  /// Number of populated levels (max level + 1), 0 when empty.
  int levels() const;

  /// Recomputes child totals from edges and compares with the cache.
  bool child_totals_consistent() const;

  friend bool operator==(const SageGraph& a, const SageGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.bucket_.value == b.bucket_.value &&
           a.bucket_.unit == b.bucket_.unit;
  }

private:
  MzTolerance bucket_;
  std::map<NodeKey, std::int64_t> nodes_;
  std::map<EdgeKey, std::int64_t> edges_;
  std::map<NodeKey, std::int64_t> child_totals_;
};

/// One approved annotation reduced to what training needs.
struct TrainingRecord {
  int ms_level = 2;
  double precursor_mz = 0.0;
  std::string glycan_id;     // MS2: glycan id
  std::string candidate_key; // MS3 and deeper: feature key of the parent fragment
  std::set<std::string> features;
};

TrainingRecord training_record(const AnnotationRecord& record, const ArchiveScan& scan);

/// Algorithm 1: per record, the precursor node gains 1, and each distinct
/// feature gains 1 on its node and on the precursor->feature edge. Throws
/// InputError for MS3+ records without a parent fragment key.
void train(SageGraph& graph, const std::vector<TrainingRecord>& records);

/// Trains on the approved current selections, resolving each against the
/// archive. Throws InputError when a selection names no archived record.
/// Returns the number of records used.
std::size_t train(SageGraph& graph, const std::vector<Selection>& selections,
                  const std::vector<ArchiveBlock>& archive);

/// edge / childTotal(child) when the edge exists, otherwise the smoothed
/// value. Throws InputError when the child node is unknown.
double conditional(const SageGraph& graph, int parent_level, const std::string& parent,
                   const std::string& child, const SmoothingConfig& smoothing);

/// Features of one scan: levels[0] are MS2 fragment keys, levels[1] MS3, ...
struct ScanFeatures {
  double precursor_mz = 0.0;
  std::vector<std::set<std::string>> levels;
};

/// Product of conditional(root, f) over level-1 features times, for deeper
/// features, the best conditional over observed parents at the previous
/// level. Features missing from the graph contribute the smoothed value.
double score(const SageGraph& graph, const std::string& root_label, const ScanFeatures& features,
             const SmoothingConfig& smoothing);

struct Classification {
  std::string glycan_id;
  std::string root_label;
  double probability = 0.0;
  friend bool operator==(const Classification&, const Classification&) = default;
};

/// Roots whose bucket overlaps the precursor window, best root per glycan,
/// sorted by probability descending then glycan id; truncated to k.
/// `allowed` (when given) restricts the candidate glycans.
std::vector<Classification> classify(const SageGraph& graph, const ScanFeatures& features,
                                     const MzTolerance& precursor_tolerance, const SmoothingConfig& smoothing,
                                     std::optional<int> k = std::nullopt,
                                     const std::set<std::string>* allowed = nullptr);

/// Features of every MS2 scan in an archive, from its own records and the
/// records of its descendant scans, keyed by scan id.
std::map<ScanId, ScanFeatures> archive_features(const std::vector<ArchiveBlock>& archive);

struct FilterPolicy {
  std::optional<int> top_k;
  std::optional<double> min_probability;
};

/// Keeps, per MS2 scan, the records whose glycan survives the policy among
/// the glycans annotated in that scan; descendant records follow their root
/// glycan; MS1 records are kept.
std::vector<ArchiveBlock> post_filter(const SageGraph& graph, const std::vector<ArchiveBlock>& archive,
                                      const FilterPolicy& policy, const SmoothingConfig& smoothing,
                                      const MzTolerance& precursor_tolerance);

/// Version/checksum error while loading a model.
class ModelFormatError : public InputError {
public:
  using InputError::InputError;
};

/// SAGE v1 levels=<n> checksum=<crc32 hex>, then W, N and E lines sorted.
void save(std::ostream& out, const SageGraph& graph);
/// Throws ModelFormatError on version or checksum mismatch; nothing is
/// returned on failure.
SageGraph load(std::istream& in);

} // namespace glyco
