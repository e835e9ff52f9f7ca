#pragma once

// MS^n scan hierarchy and its readers/writers: a line-oriented canonical
// format and a streaming mzXML subset.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace glyco {

using ScanId = std::int64_t;

struct Peak {
  double mz = 0.0;
  double intensity = 0.0;
  friend bool operator==(const Peak&, const Peak&) = default;
};

struct Scan {
  ScanId scan_id = 0;
  int ms_level = 1;
  std::optional<double> precursor_mz;
  std::optional<int> precursor_charge; // empty = unknown, never defaulted
  std::optional<ScanId> parent_scan_id;
  std::vector<Peak> peaks;

  double total_intensity() const;
  friend bool operator==(const Scan&, const Scan&) = default;
};

/// Sorts peaks ascending by m/z (stable) and validates mz > 0, intensity >= 0.
void normalize_peaks(Scan& scan);

/// Validated forest of scans rooted at MS1 scans.
class ScanTree {
public:
  ScanTree() = default;

  const std::map<ScanId, Scan>& scans() const noexcept { return scans_; }
  const Scan& at(ScanId id) const;
  const Scan* find(ScanId id) const;
  std::size_t size() const noexcept { return scans_.size(); }

  /// Root scan ids ascending.
  const std::vector<ScanId>& roots() const noexcept { return roots_; }
  /// Child scan ids ascending; empty for leaves.
  const std::vector<ScanId>& children(ScanId id) const;
  int max_ms_level() const noexcept { return max_ms_level_; }

  /// Parent before child, siblings ascending by id.
  std::vector<ScanId> depth_first_order() const;

  friend bool operator==(const ScanTree& a, const ScanTree& b) { return a.scans_ == b.scans_; }

private:
  friend ScanTree link_precursors(std::vector<Scan> scans);

  std::map<ScanId, Scan> scans_;
  std::map<ScanId, std::vector<ScanId>> children_;
  std::vector<ScanId> roots_;
  int max_ms_level_ = 0;
};

/// Builds the forest from scans with explicit parent ids. Throws InputError
/// on duplicate ids, self references (cycle), dangling parents, orphan MS^n
/// scans and parent/child level mismatches.
ScanTree link_precursors(std::vector<Scan> scans);

/// Pull reader for the canonical format, one scan at a time:
///   S <scan_id> 1
///   S <scan_id> <ms_level> <parent_scan_id> <precursor_mz> [<charge>|?]
///   P <mz>:<intensity> ...
class CanonicalScanReader {
public:
  explicit CanonicalScanReader(std::istream& in) : in_(in) {}

  /// Next scan with peaks sorted, or nullopt at end of input. Throws
  /// LineError on malformed lines.
  std::optional<Scan> next();
  std::size_t line() const noexcept { return line_; }

private:
  bool next_content_line(std::string& out);

  std::istream& in_;
  std::size_t line_ = 0;
};

ScanTree read_canonical(std::istream& in);
/// Scans ascending by id; doubles in shortest round-trip form.
void write_canonical(std::ostream& out, const ScanTree& tree);
void write_canonical_scan(std::ostream& out, const Scan& scan);

struct MzxmlStats {
  std::size_t scans = 0;
  std::size_t warnings = 0;           // ignored elements and attributes
  std::size_t max_resident_peaks = 0; // peak storage held by the reader at once
};

/// Streams scans to `sink` as each `scan` element closes. Nested scans get
/// the enclosing scan as parent unless precursorScanNum says otherwise.
/// Supports precision 32/64, network byte order, m/z-int pairs and
/// compressionType none or zlib. Throws InputError on unsupported encoding
/// attributes, malformed XML and truncated payloads.
MzxmlStats read_mzxml_stream(std::istream& in, const std::function<void(Scan&&)>& sink);
ScanTree read_mzxml_subset(std::istream& in, MzxmlStats* stats = nullptr);

/// Writes the subset understood by the reader (flat scans with
/// precursorScanNum), peaks as base64 of big-endian floats.
void write_mzxml_subset(std::ostream& out, const ScanTree& tree, int precision = 64);

std::string base64_encode(const std::vector<unsigned char>& bytes);
/// Ignores whitespace; throws InputError on invalid or truncated input.
std::vector<unsigned char> base64_decode(std::string_view text);

} // namespace glyco
