#pragma once

// Append-only annotation archive with a per-scan index, and the selections
// file holding reviewer decisions.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glyco/spectra.hpp"

namespace glyco {

/// Counts live instances of the owning type (for the streaming bound).
class LiveCounter {
public:
  LiveCounter() noexcept { up(); }
  LiveCounter(const LiveCounter&) noexcept { up(); }
  LiveCounter& operator=(const LiveCounter&) noexcept = default;
  ~LiveCounter() { live_.fetch_sub(1, std::memory_order_relaxed); }

  static long live() noexcept { return live_.load(); }
  static long peak() noexcept { return peak_.load(); }
  /// Restarts peak tracking from the current live count.
  static void reset_peak() noexcept { peak_.store(live_.load()); }

  friend bool operator==(const LiveCounter&, const LiveCounter&) noexcept { return true; }

private:
  static void up() noexcept {
    long now = live_.fetch_add(1, std::memory_order_relaxed) + 1;
    long seen = peak_.load(std::memory_order_relaxed);
    while (now > seen && !peak_.compare_exchange_weak(seen, now, std::memory_order_relaxed)) {
    }
  }
  static inline std::atomic<long> live_{0};
  static inline std::atomic<long> peak_{0};
};

struct PeakAnnotation {
  std::size_t peak_index = 0;
  std::string fragment_signature;
  double theoretical_mz = 0.0;
  double delta = 0.0; // observed - theoretical
  std::string ion_signature;
  std::string feature_key; // empty for MS1 records
  friend bool operator==(const PeakAnnotation&, const PeakAnnotation&) = default;
};

struct AnnotationRecord {
  ScanId scan_id = 0;
  int ms_level = 2;
  /// Glycan id for MS1/MS2; the parent fragment signature for MS3 and deeper.
  std::string glycan_id;
  /// Ion configuration signature plus "/u<missing methyls>".
  std::string config_signature;
  std::optional<double> score_c; // unset for MS1 records
  std::optional<double> score_i;
  std::vector<PeakAnnotation> peak_annotations;
  /// Feature key of the candidate fragment (MS3 and deeper), else empty.
  std::string candidate_key;
  /// Set when the scan had no peaks; not persisted.
  bool empty_spectrum = false;
  LiveCounter counter;

  /// Glycan id this record descends from (text before the first '|').
  std::string root_glycan_id() const;
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

/// Header of one scan block in the archive.
struct ArchiveScan {
  ScanId scan_id = 0;
  int ms_level = 1;
  std::optional<ScanId> parent_scan_id;
  std::optional<double> precursor_mz;
  std::optional<int> precursor_charge;
  friend bool operator==(const ArchiveScan&, const ArchiveScan&) = default;
};

ArchiveScan archive_scan_of(const Scan& scan);

struct ArchiveBlock {
  ArchiveScan scan;
  std::vector<AnnotationRecord> records;
  friend bool operator==(const ArchiveBlock&, const ArchiveBlock&) = default;
};

struct IndexEntry {
  ScanId scan_id;
  std::uint64_t offset; // byte offset of the scan header line
  std::size_t records;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// Streams scan blocks; records are written as soon as they are handed over
/// and never kept.
///   S <scan_id> <ms_level> <parent|-> <precursor_mz|-> <charge|?>
///   A <scan_id> <glycan_id> <config> <score_c|-> <score_i|-> <n> <candidate_key|->
///   p <peak_index> <fragment_signature> <theoretical_mz> <delta> <ion_sig> <feature_key|->
class ArchiveWriter {
public:
  /// Writes to `data`, and index lines to `index` when given.
  ArchiveWriter(std::ostream& data, std::ostream* index = nullptr);
  /// Opens `path` and `path + ".idx"` for writing.
  explicit ArchiveWriter(const std::string& path);
  ~ArchiveWriter();

  void begin_scan(const ArchiveScan& scan);
  void write(const AnnotationRecord& record);
  void end_scan();
  /// Flushes; throws InputError when the underlying stream failed.
  void close();

  std::size_t records_written() const noexcept { return records_; }

private:
  std::unique_ptr<std::ofstream> owned_data_, owned_index_;
  std::ostream* data_;
  std::ostream* index_;
  std::uint64_t offset_ = 0;
  std::optional<IndexEntry> open_;
  std::size_t records_ = 0;
  bool closed_ = false;
};

std::string format_archive_scan(const ArchiveScan& scan);
std::string format_record(const AnnotationRecord& record);

/// Pull reader over scan blocks.
class ArchiveReader {
public:
  explicit ArchiveReader(std::istream& in) : in_(in) {}
  /// Next block, or nullopt at end. Throws LineError on malformed input.
  std::optional<ArchiveBlock> next();

private:
  bool next_line(std::string& out);
  std::istream& in_;
  std::string pending_;
  bool has_pending_ = false;
  std::size_t line_ = 0;
};

std::vector<ArchiveBlock> read_archive(std::istream& in);
void write_archive(std::ostream& out, const std::vector<ArchiveBlock>& blocks,
                   std::ostream* index = nullptr);

std::vector<IndexEntry> read_index(std::istream& in);

/// One reviewer decision:
///   SEL <scan_id> <glycan_id> <config_signature> <0|1> <reviewer> <timestamp>
struct Selection {
  ScanId scan_id = 0;
  std::string glycan_id;
  std::string config_signature;
  bool approved = false;
  std::string reviewer;
  std::string timestamp;
  friend bool operator==(const Selection&, const Selection&) = default;
};

std::vector<Selection> read_selections(std::istream& in);
void write_selections(std::ostream& out, const std::vector<Selection>& selections);
std::string format_selection(const Selection& s);

/// Latest decision per (scan, glycan, config), in first-seen order.
std::vector<Selection> current_selections(const std::vector<Selection>& history);

} // namespace glyco
