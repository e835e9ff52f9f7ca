#include "glyco/spectra.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>

#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

double Scan::total_intensity() const {
  double sum = 0.0;
  for (const auto& p : peaks) sum += p.intensity;
  return sum;
}

void normalize_peaks(Scan& scan) {
  for (const auto& p : scan.peaks) {
    if (!(p.mz > 0.0)) throw InputError("scan " + std::to_string(scan.scan_id) + ": peak m/z must be positive");
    if (!(p.intensity >= 0.0))
      throw InputError("scan " + std::to_string(scan.scan_id) + ": negative peak intensity");
  }
  std::stable_sort(scan.peaks.begin(), scan.peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.mz < b.mz; });
}

const Scan& ScanTree::at(ScanId id) const {
  auto it = scans_.find(id);
  if (it == scans_.end()) throw InputError("unknown scan " + std::to_string(id));
  return it->second;
}

const Scan* ScanTree::find(ScanId id) const {
  auto it = scans_.find(id);
  return it == scans_.end() ? nullptr : &it->second;
}

const std::vector<ScanId>& ScanTree::children(ScanId id) const {
  static const std::vector<ScanId> none;
  auto it = children_.find(id);
  return it == children_.end() ? none : it->second;
}

std::vector<ScanId> ScanTree::depth_first_order() const {
  std::vector<ScanId> order;
  order.reserve(scans_.size());
  std::vector<ScanId> stack(roots_.rbegin(), roots_.rend());
  while (!stack.empty()) {
    ScanId id = stack.back();
    stack.pop_back();
    order.push_back(id);
    const auto& ch = children(id);
    stack.insert(stack.end(), ch.rbegin(), ch.rend());
  }
  return order;
}

ScanTree link_precursors(std::vector<Scan> scans) {
  ScanTree tree;
  for (auto& s : scans) {
    const std::string name = "scan " + std::to_string(s.scan_id);
    if (s.ms_level < 1) throw InputError(name + ": ms_level must be at least 1");
    if (s.ms_level == 1 && (s.precursor_mz || s.parent_scan_id))
      throw InputError(name + ": MS1 scan cannot have a precursor");
    if (s.ms_level >= 2 && !s.precursor_mz) throw InputError(name + ": MS" + std::to_string(s.ms_level) + " scan without precursor m/z");
    if (s.parent_scan_id && *s.parent_scan_id == s.scan_id)
      throw InputError(name + ": cycle in precursor links (scan is its own parent)");
    tree.max_ms_level_ = std::max(tree.max_ms_level_, s.ms_level);
    ScanId id = s.scan_id;
    if (!tree.scans_.emplace(id, std::move(s)).second)
      throw InputError("duplicate scan id " + std::to_string(id));
  }
  for (const auto& [id, s] : tree.scans_) {
    const std::string name = "scan " + std::to_string(id);
    if (s.ms_level == 1) {
      tree.roots_.push_back(id);
      continue;
    }
    if (!s.parent_scan_id) throw InputError(name + ": orphan MS" + std::to_string(s.ms_level) + " scan");
    auto parent = tree.scans_.find(*s.parent_scan_id);
    if (parent == tree.scans_.end())
      throw InputError(name + ": dangling parent reference " + std::to_string(*s.parent_scan_id));
    if (parent->second.ms_level != s.ms_level - 1)
      throw InputError(name + ": level mismatch with parent " + std::to_string(parent->first));
    tree.children_[parent->first].push_back(id);
  }
  return tree;
}

bool CanonicalScanReader::next_content_line(std::string& out) {
  while (std::getline(in_, out)) {
    ++line_;
    auto t = text::trim(out);
    if (t.empty() || t.front() == '#') continue;
    out = std::string(t);
    return true;
  }
  return false;
}

std::optional<Scan> CanonicalScanReader::next() {
  std::string header;
  if (!next_content_line(header)) return std::nullopt;
  const std::size_t header_line = line_;
  auto f = text::split_ws(header);
  if (f.empty() || f[0] != "S") throw LineError("expected scan header 'S'", header_line);
  Scan s;
  try {
    if (f.size() < 3) throw InputError("scan header needs id and ms level");
    s.scan_id = text::parse_int(f[1], "scan id");
    s.ms_level = static_cast<int>(text::parse_int(f[2], "ms level"));
    if (s.ms_level < 1) throw InputError("ms level must be at least 1");
    if (s.ms_level == 1) {
      if (f.size() != 3) throw InputError("MS1 scan header takes no precursor fields");
    } else {
      if (f.size() < 5 || f.size() > 6)
        throw InputError("MSn scan header needs parent id, precursor m/z and optional charge");
      s.parent_scan_id = text::parse_int(f[3], "parent scan id");
      s.precursor_mz = text::parse_double(f[4], "precursor m/z");
      if (f.size() == 6 && f[5] != "?") {
        s.precursor_charge = static_cast<int>(text::parse_int(f[5], "precursor charge"));
        if (*s.precursor_charge == 0) throw InputError("precursor charge cannot be 0");
      }
    }
  } catch (const LineError&) {
    throw;
  } catch (const InputError& e) {
    throw LineError(e.what(), header_line);
  }

  std::string peaks;
  if (!next_content_line(peaks)) throw LineError("scan without peak line", header_line);
  auto p = text::split_ws(peaks);
  if (p.empty() || p[0] != "P") throw LineError("expected peak line 'P'", line_);
  try {
    s.peaks.reserve(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) {
      auto colon = p[i].find(':');
      if (colon == std::string_view::npos) throw InputError("peak must be <mz>:<intensity>");
      s.peaks.push_back({text::parse_double(p[i].substr(0, colon), "peak m/z"),
                         text::parse_double(p[i].substr(colon + 1), "peak intensity")});
    }
    normalize_peaks(s);
  } catch (const InputError& e) {
    throw LineError(e.what(), line_);
  }
  return s;
}

ScanTree read_canonical(std::istream& in) {
  CanonicalScanReader reader(in);
  std::vector<Scan> scans;
  while (auto s = reader.next()) scans.push_back(std::move(*s));
  return link_precursors(std::move(scans));
}

void write_canonical_scan(std::ostream& out, const Scan& s) {
  out << "S " << s.scan_id << ' ' << s.ms_level;
  if (s.ms_level >= 2) {
    out << ' ' << (s.parent_scan_id ? std::to_string(*s.parent_scan_id) : "?") << ' '
        << text::format_double(s.precursor_mz.value_or(0.0)) << ' '
        << (s.precursor_charge ? std::to_string(*s.precursor_charge) : "?");
  }
  out << "\nP";
  for (const auto& p : s.peaks)
    out << ' ' << text::format_double(p.mz) << ':' << text::format_double(p.intensity);
  out << '\n';
}

void write_canonical(std::ostream& out, const ScanTree& tree) {
  for (const auto& [id, s] : tree.scans()) write_canonical_scan(out, s);
}

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

} // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    unsigned v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  unsigned acc = 0;
  int bits = 0, symbols = 0, padding = 0;
  for (char c : text) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    if (c == '=') {
      ++padding;
      ++symbols;
      continue;
    }
    if (padding) throw InputError("base64: data after padding");
    int v = b64_value(c);
    if (v < 0) throw InputError(std::string("base64: invalid character '") + c + "'");
    acc = (acc << 6) | static_cast<unsigned>(v);
    bits += 6;
    ++symbols;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  if (symbols % 4 != 0 || padding > 2) throw InputError("base64: truncated payload");
  return out;
}

} // namespace glyco
