#include <expat.h>
#include <zlib.h>

#include <cstring>
#include <istream>
#include <memory>
#include <ostream>

#include "glyco/errors.hpp"
#include "glyco/spectra.hpp"
#include "glyco/text.hpp"

namespace glyco {
namespace {

struct PeakEncoding {
  int precision = 32;
  bool zlib = false;
};

std::vector<unsigned char> inflate_bytes(const std::vector<unsigned char>& in) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw InputError("zlib: cannot initialise inflate");
  std::vector<unsigned char> out;
  unsigned char buf[16384];
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw InputError("zlib: corrupt or truncated peak payload");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw InputError("zlib: truncated peak payload");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::uint64_t read_be(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

std::vector<Peak> decode_peaks(const std::string& payload, const PeakEncoding& enc) {
  auto bytes = base64_decode(payload);
  if (enc.zlib && !bytes.empty()) bytes = inflate_bytes(bytes);
  const int width = enc.precision / 8;
  if (bytes.size() % (2 * width) != 0) throw InputError("truncated peak payload");
  std::vector<Peak> peaks;
  peaks.reserve(bytes.size() / (2 * width));
  for (std::size_t i = 0; i < bytes.size(); i += 2 * width) {
    double v[2];
    for (int k = 0; k < 2; ++k) {
      std::uint64_t raw = read_be(bytes.data() + i + k * width, width);
      if (width == 4) {
        auto r32 = static_cast<std::uint32_t>(raw);
        float f;
        std::memcpy(&f, &r32, 4);
        v[k] = f;
      } else {
        std::memcpy(&v[k], &raw, 8);
      }
    }
    peaks.push_back({v[0], v[1]});
  }
  return peaks;
}

struct OpenScan {
  Scan scan;
  bool explicit_parent = false;
};

class MzxmlParser {
public:
  MzxmlParser(const std::function<void(Scan&&)>& sink) : sink_(sink) {
    parser_ = XML_ParserCreate(nullptr);
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &MzxmlParser::on_start, &MzxmlParser::on_end);
    XML_SetCharacterDataHandler(parser_, &MzxmlParser::on_text);
  }
  ~MzxmlParser() { XML_ParserFree(parser_); }

  MzxmlStats run(std::istream& in) {
    std::vector<char> buf(1 << 16);
    for (;;) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      auto n = in.gcount();
      bool last = n < static_cast<std::streamsize>(buf.size());
      if (XML_Parse(parser_, buf.data(), static_cast<int>(n), last) == XML_STATUS_ERROR) {
        if (!error_.empty()) throw InputError("mzXML: " + error_);
        throw InputError(std::string("mzXML: ") + XML_ErrorString(XML_GetErrorCode(parser_)) +
                         " at line " + std::to_string(XML_GetCurrentLineNumber(parser_)));
      }
      if (last) break;
    }
    if (!open_.empty()) throw InputError("mzXML: unterminated scan element");
    return stats_;
  }

private:
  static const char* attr(const XML_Char** atts, const char* name) {
    for (int i = 0; atts[i]; i += 2)
      if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
    return nullptr;
  }

  void fail(const std::string& msg) {
    if (error_.empty()) error_ = msg;
    XML_StopParser(parser_, XML_FALSE);
  }

  static void on_start(void* self, const XML_Char* name, const XML_Char** atts) {
    auto* p = static_cast<MzxmlParser*>(self);
    try {
      p->start(name, atts);
    } catch (const std::exception& e) {
      p->fail(e.what());
    }
  }
  static void on_end(void* self, const XML_Char* name) {
    auto* p = static_cast<MzxmlParser*>(self);
    try {
      p->end(name);
    } catch (const std::exception& e) {
      p->fail(e.what());
    }
  }
  static void on_text(void* self, const XML_Char* s, int len) {
    auto* p = static_cast<MzxmlParser*>(self);
    if (p->capture_) p->text_.append(s, static_cast<std::size_t>(len));
  }

  void start(std::string_view name, const XML_Char** atts) {
    if (name == "scan") {
      OpenScan o;
      const char* num = attr(atts, "num");
      const char* level = attr(atts, "msLevel");
      if (!num || !level) throw InputError("scan element needs num and msLevel");
      o.scan.scan_id = text::parse_int(num, "scan num");
      o.scan.ms_level = static_cast<int>(text::parse_int(level, "msLevel"));
      if (!open_.empty()) o.scan.parent_scan_id = open_.back().scan.scan_id;
      open_.push_back(std::move(o));
    } else if (name == "precursorMz") {
      if (open_.empty()) throw InputError("precursorMz outside scan");
      auto& o = open_.back();
      if (const char* z = attr(atts, "precursorCharge")) {
        o.scan.precursor_charge = static_cast<int>(text::parse_int(z, "precursorCharge"));
        if (*o.scan.precursor_charge == 0) o.scan.precursor_charge.reset();
      }
      if (const char* parent = attr(atts, "precursorScanNum")) {
        o.scan.parent_scan_id = text::parse_int(parent, "precursorScanNum");
        o.explicit_parent = true;
      }
      begin_text();
    } else if (name == "peaks") {
      if (open_.empty()) throw InputError("peaks outside scan");
      encoding_ = PeakEncoding{};
      if (const char* prec = attr(atts, "precision")) {
        std::string_view v(prec);
        if (v == "32") encoding_.precision = 32;
        else if (v == "64") encoding_.precision = 64;
        else throw InputError("unsupported peak precision '" + std::string(v) + "'");
      }
      if (const char* order = attr(atts, "byteOrder"); order && std::string_view(order) != "network")
        throw InputError("unsupported byteOrder '" + std::string(order) + "'");
      for (const char* key : {"pairOrder", "contentType"})
        if (const char* pairs = attr(atts, key); pairs && std::string_view(pairs) != "m/z-int")
          throw InputError("unsupported " + std::string(key) + " '" + pairs + "'");
      if (const char* comp = attr(atts, "compressionType")) {
        std::string_view v(comp);
        if (v == "zlib") encoding_.zlib = true;
        else if (v != "none") throw InputError("unsupported compressionType '" + std::string(v) + "'");
      }
      begin_text();
    } else if (name != "mzXML" && name != "msRun") {
      ++stats_.warnings;
    }
  }

  void end(std::string_view name) {
    if (name == "precursorMz") {
      open_.back().scan.precursor_mz = text::parse_double(text::trim(text_), "precursorMz");
      capture_ = false;
    } else if (name == "peaks") {
      auto& scan = open_.back().scan;
      scan.peaks = decode_peaks(text_, encoding_);
      capture_ = false;
      text_.clear();
      text_.shrink_to_fit();
      std::size_t resident = 0;
      for (const auto& o : open_) resident += o.scan.peaks.size();
      stats_.max_resident_peaks = std::max(stats_.max_resident_peaks, resident);
    } else if (name == "scan") {
      Scan s = std::move(open_.back().scan);
      open_.pop_back();
      normalize_peaks(s);
      ++stats_.scans;
      sink_(std::move(s));
    }
  }

  void begin_text() {
    text_.clear();
    capture_ = true;
  }

  XML_Parser parser_;
  const std::function<void(Scan&&)>& sink_;
  std::vector<OpenScan> open_;
  PeakEncoding encoding_;
  std::string text_;
  bool capture_ = false;
  std::string error_;
  MzxmlStats stats_;
};

void append_be(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

} // namespace

MzxmlStats read_mzxml_stream(std::istream& in, const std::function<void(Scan&&)>& sink) {
  MzxmlParser parser(sink);
  return parser.run(in);
}

ScanTree read_mzxml_subset(std::istream& in, MzxmlStats* stats) {
  std::vector<Scan> scans;
  auto s = read_mzxml_stream(in, [&](Scan&& scan) { scans.push_back(std::move(scan)); });
  if (stats) *stats = s;
  return link_precursors(std::move(scans));
}

void write_mzxml_subset(std::ostream& out, const ScanTree& tree, int precision) {
  if (precision != 32 && precision != 64) throw InputError("precision must be 32 or 64");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<mzXML>\n<msRun scanCount=\"" << tree.size()
      << "\">\n";
  for (const auto& [id, s] : tree.scans()) {
    out << "<scan num=\"" << id << "\" msLevel=\"" << s.ms_level << "\" peaksCount=\""
        << s.peaks.size() << "\">\n";
    if (s.precursor_mz) {
      out << "<precursorMz";
      if (s.parent_scan_id) out << " precursorScanNum=\"" << *s.parent_scan_id << "\"";
      if (s.precursor_charge) out << " precursorCharge=\"" << *s.precursor_charge << "\"";
      out << ">" << text::format_double(*s.precursor_mz) << "</precursorMz>\n";
    }
    std::vector<unsigned char> bytes;
    for (const auto& p : s.peaks)
      for (double v : {p.mz, p.intensity}) {
        if (precision == 32) {
          float f = static_cast<float>(v);
          std::uint32_t raw;
          std::memcpy(&raw, &f, 4);
          append_be(bytes, raw, 4);
        } else {
          std::uint64_t raw;
          std::memcpy(&raw, &v, 8);
          append_be(bytes, raw, 8);
        }
      }
    out << "<peaks precision=\"" << precision
        << "\" byteOrder=\"network\" pairOrder=\"m/z-int\">" << base64_encode(bytes)
        << "</peaks>\n</scan>\n";
  }
  out << "</msRun>\n</mzXML>\n";
}

} // namespace glyco
