#include "glyco/archive.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <tuple>

#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {
namespace {

std::string opt_double(const std::optional<double>& v) { return v ? text::format_double(*v) : "-"; }

std::optional<double> parse_opt_double(std::string_view s, const char* what) {
  if (s == "-") return std::nullopt;
  return text::parse_double(s, what);
}

void check_token(const std::string& s, const char* what) {
  if (!text::is_token(s)) throw InputError(std::string(what) + " must be a non-empty token without whitespace");
}

} // namespace

std::string AnnotationRecord::root_glycan_id() const { return glycan_id.substr(0, glycan_id.find('|')); }

ArchiveScan archive_scan_of(const Scan& scan) {
  return ArchiveScan{scan.scan_id, scan.ms_level, scan.parent_scan_id, scan.precursor_mz,
                     scan.precursor_charge};
}

std::string format_archive_scan(const ArchiveScan& s) {
  std::string out = "S " + std::to_string(s.scan_id) + " " + std::to_string(s.ms_level) + " ";
  out += s.parent_scan_id ? std::to_string(*s.parent_scan_id) : "-";
  out += " " + opt_double(s.precursor_mz) + " ";
  out += s.precursor_charge ? std::to_string(*s.precursor_charge) : "?";
  return out + "\n";
}

std::string format_record(const AnnotationRecord& r) {
  check_token(r.glycan_id, "glycan id");
  check_token(r.config_signature, "configuration signature");
  std::string out = "A " + std::to_string(r.scan_id) + " " + r.glycan_id + " " + r.config_signature + " " +
                    opt_double(r.score_c) + " " + opt_double(r.score_i) + " " +
                    std::to_string(r.peak_annotations.size()) + " " +
                    (r.candidate_key.empty() ? "-" : r.candidate_key) + "\n";
  for (const auto& p : r.peak_annotations) {
    check_token(p.fragment_signature, "fragment signature");
    check_token(p.ion_signature, "ion signature");
    out += "p " + std::to_string(p.peak_index) + " " + p.fragment_signature + " " +
           text::format_double(p.theoretical_mz) + " " + text::format_double(p.delta) + " " +
           p.ion_signature + " " + (p.feature_key.empty() ? "-" : p.feature_key) + "\n";
  }
  return out;
}

ArchiveWriter::ArchiveWriter(std::ostream& data, std::ostream* index) : data_(&data), index_(index) {
  if (index_) *index_ << "IDX v1\n";
}

ArchiveWriter::ArchiveWriter(const std::string& path)
    : owned_data_(std::make_unique<std::ofstream>(path, std::ios::binary)),
      owned_index_(std::make_unique<std::ofstream>(path + ".idx", std::ios::binary)) {
  if (!*owned_data_) throw InputError("cannot write archive '" + path + "'");
  if (!*owned_index_) throw InputError("cannot write archive index '" + path + ".idx'");
  data_ = owned_data_.get();
  index_ = owned_index_.get();
  *index_ << "IDX v1\n";
}

ArchiveWriter::~ArchiveWriter() {
  try {
    close();
  } catch (...) {
  }
}

void ArchiveWriter::begin_scan(const ArchiveScan& scan) {
  if (open_) end_scan();
  auto line = format_archive_scan(scan);
  open_ = IndexEntry{scan.scan_id, offset_, 0};
  *data_ << line;
  offset_ += line.size();
}

void ArchiveWriter::write(const AnnotationRecord& record) {
  if (!open_) throw InputError("archive record written outside a scan block");
  if (record.scan_id != open_->scan_id) throw InputError("archive record does not belong to the open scan");
  auto text = format_record(record);
  *data_ << text;
  offset_ += text.size();
  ++open_->records;
  ++records_;
}

void ArchiveWriter::end_scan() {
  if (!open_) return;
  if (index_) *index_ << open_->scan_id << ' ' << open_->offset << ' ' << open_->records << '\n';
  open_.reset();
}

void ArchiveWriter::close() {
  if (closed_) return;
  end_scan();
  closed_ = true;
  data_->flush();
  if (index_) index_->flush();
  if (!*data_ || (index_ && !*index_)) throw InputError("archive write failed");
}

bool ArchiveReader::next_line(std::string& out) {
  if (has_pending_) {
    out = std::move(pending_);
    has_pending_ = false;
    return true;
  }
  while (std::getline(in_, out)) {
    ++line_;
    if (!text::trim(out).empty()) return true;
  }
  return false;
}

std::optional<ArchiveBlock> ArchiveReader::next() {
  std::string line;
  if (!next_line(line)) return std::nullopt;
  ArchiveBlock block;
  try {
    auto f = text::split_ws(line);
    if (f.size() != 6 || f[0] != "S") throw InputError("expected scan header 'S'");
    block.scan.scan_id = text::parse_int(f[1], "scan id");
    block.scan.ms_level = static_cast<int>(text::parse_int(f[2], "ms level"));
    if (f[3] != "-") block.scan.parent_scan_id = text::parse_int(f[3], "parent scan id");
    block.scan.precursor_mz = parse_opt_double(f[4], "precursor m/z");
    if (f[5] != "?") block.scan.precursor_charge = static_cast<int>(text::parse_int(f[5], "charge"));

    while (next_line(line)) {
      auto a = text::split_ws(line);
      if (!a.empty() && a[0] == "S") {
        pending_ = std::move(line);
        has_pending_ = true;
        break;
      }
      if (a.size() != 8 || a[0] != "A") throw InputError("expected record line 'A'");
      AnnotationRecord r;
      r.scan_id = text::parse_int(a[1], "scan id");
      if (r.scan_id != block.scan.scan_id) throw InputError("record scan id differs from its block");
      r.ms_level = block.scan.ms_level;
      r.glycan_id = std::string(a[2]);
      r.config_signature = std::string(a[3]);
      r.score_c = parse_opt_double(a[4], "score_c");
      r.score_i = parse_opt_double(a[5], "score_i");
      for (const auto& v : {r.score_c, r.score_i})
        if (v && !(*v >= 0.0 && *v <= 1.0)) throw InputError("score outside [0, 1]");
      auto n = text::parse_int(a[6], "annotation count");
      if (n < 0) throw InputError("negative annotation count");
      if (a[7] != "-") r.candidate_key = std::string(a[7]);
      r.peak_annotations.reserve(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        if (!next_line(line)) throw InputError("archive truncated inside a record");
        auto p = text::split_ws(line);
        if (p.size() != 7 || p[0] != "p") throw InputError("expected peak annotation line 'p'");
        PeakAnnotation pa;
        auto idx = text::parse_int(p[1], "peak index");
        if (idx < 0) throw InputError("negative peak index");
        pa.peak_index = static_cast<std::size_t>(idx);
        pa.fragment_signature = std::string(p[2]);
        pa.theoretical_mz = text::parse_double(p[3], "theoretical m/z");
        pa.delta = text::parse_double(p[4], "delta");
        pa.ion_signature = std::string(p[5]);
        if (p[6] != "-") pa.feature_key = std::string(p[6]);
        r.peak_annotations.push_back(std::move(pa));
      }
      block.records.push_back(std::move(r));
    }
  } catch (const LineError&) {
    throw;
  } catch (const InputError& e) {
    throw LineError(e.what(), line_);
  }
  return block;
}

std::vector<ArchiveBlock> read_archive(std::istream& in) {
  ArchiveReader reader(in);
  std::vector<ArchiveBlock> out;
  while (auto b = reader.next()) out.push_back(std::move(*b));
  return out;
}

void write_archive(std::ostream& out, const std::vector<ArchiveBlock>& blocks, std::ostream* index) {
  ArchiveWriter w(out, index);
  for (const auto& b : blocks) {
    w.begin_scan(b.scan);
    for (const auto& r : b.records) w.write(r);
    w.end_scan();
  }
  w.close();
}

std::vector<IndexEntry> read_index(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line) || text::trim(line) != "IDX v1") throw LineError("missing 'IDX v1' header", 1);
  ++n;
  std::vector<IndexEntry> out;
  while (std::getline(in, line)) {
    ++n;
    auto f = text::split_ws(line);
    if (f.empty()) continue;
    try {
      if (f.size() != 3) throw InputError("index line needs scan id, offset and record count");
      auto offset = text::parse_int(f[1], "offset");
      auto count = text::parse_int(f[2], "record count");
      if (offset < 0 || count < 0) throw InputError("negative index value");
      out.push_back({text::parse_int(f[0], "scan id"), static_cast<std::uint64_t>(offset),
                     static_cast<std::size_t>(count)});
    } catch (const InputError& e) {
      throw LineError(e.what(), n);
    }
  }
  return out;
}

std::string format_selection(const Selection& s) {
  check_token(s.glycan_id, "glycan id");
  check_token(s.config_signature, "configuration signature");
  check_token(s.reviewer, "reviewer");
  check_token(s.timestamp, "timestamp");
  return "SEL " + std::to_string(s.scan_id) + " " + s.glycan_id + " " + s.config_signature + " " +
         (s.approved ? "1" : "0") + " " + s.reviewer + " " + s.timestamp + "\n";
}

std::vector<Selection> read_selections(std::istream& in) {
  std::vector<Selection> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = text::split_ws(t);
    try {
      if (f.size() != 7 || f[0] != "SEL") throw InputError("expected 'SEL <scan> <glycan> <config> <0|1> <reviewer> <timestamp>'");
      Selection s;
      s.scan_id = text::parse_int(f[1], "scan id");
      s.glycan_id = std::string(f[2]);
      s.config_signature = std::string(f[3]);
      if (f[4] != "0" && f[4] != "1") throw InputError("approved flag must be 0 or 1");
      s.approved = f[4] == "1";
      s.reviewer = std::string(f[5]);
      s.timestamp = std::string(f[6]);
      out.push_back(std::move(s));
    } catch (const InputError& e) {
      throw LineError(e.what(), n);
    }
  }
  return out;
}

void write_selections(std::ostream& out, const std::vector<Selection>& selections) {
  for (const auto& s : selections) out << format_selection(s);
}

std::vector<Selection> current_selections(const std::vector<Selection>& history) {
  std::map<std::tuple<ScanId, std::string, std::string>, std::size_t> slot;
  std::vector<Selection> out;
  for (const auto& s : history) {
    auto key = std::make_tuple(s.scan_id, s.glycan_id, s.config_signature);
    auto [it, inserted] = slot.emplace(key, out.size());
    if (inserted)
      out.push_back(s);
    else
      out[it->second] = s;
  }
  return out;
}

} // namespace glyco
