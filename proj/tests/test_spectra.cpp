#include <doctest.h>

#include <sstream>

#include "glyco/errors.hpp"
#include "glyco/spectra.hpp"
#include "support.hpp"

using namespace glyco;
using namespace glyco::testing;

namespace {

ScanTree canonical(const std::string& text) {
  std::istringstream in(text);
  return read_canonical(in);
}

ScanTree mzxml(const std::string& text, MzxmlStats* stats = nullptr) {
  std::istringstream in(text);
  return read_mzxml_subset(in, stats);
}

std::string wrap(const std::string& scans) {
  return "<?xml version=\"1.0\"?>\n<mzXML><msRun>" + scans + "</msRun></mzXML>\n";
}

// (100, 1), (200, 2) as network-order floats
const char* const kPeaks32 = "QsgAAD+AAABDSAAAQAAAAA==";
const char* const kPeaks64 = "QFkAAAAAAAA/8AAAAAAAAEBpAAAAAAAAQAAAAAAAAAA=";
const char* const kPeaks64Zlib = "eJxziGQAA/sPENohE0pDKAYAOoYCsg==";

ScanTree sample_tree() {
  return canonical(
      "# sample\n"
      "S 1 1\n"
      "P 300.5:10 150.25:0 900:5\n"
      "S 2 2 1 900 2\n"
      "P 100:1 200:2\n"
      "S 3 2 1 300.5 ?\n"
      "P\n"
      "S 4 3 2 200 1\n"
      "P 50:3\n");
}

} // namespace

TEST_CASE("canonical reader") {
  auto one = canonical("S 7 1\nP 1:1 2:2 3:3\n");
  CHECK(one.size() == 1);
  CHECK(one.roots() == std::vector<ScanId>{7});
  CHECK(one.max_ms_level() == 1);

  auto t = sample_tree();
  CHECK(t.roots() == std::vector<ScanId>{1});
  CHECK(t.children(1) == std::vector<ScanId>{2, 3});
  CHECK(t.children(3).empty());
  CHECK(t.max_ms_level() == 3);
  CHECK(t.at(2).precursor_charge == 2);
  CHECK_FALSE(t.at(3).precursor_charge.has_value());
  CHECK(t.at(3).peaks.empty());
  // sorted ascending, zero intensity kept
  REQUIRE(t.at(1).peaks.size() == 3);
  CHECK(t.at(1).peaks[0] == Peak{150.25, 0});
  CHECK(t.at(1).peaks[2] == Peak{900, 5});
  CHECK(t.depth_first_order() == std::vector<ScanId>{1, 2, 4, 3});
}

TEST_CASE("scan hierarchy errors") {
  CHECK_THROWS_WITH_AS(canonical("S 1 1\nP 1:1\nS 2 2 9 100 1\nP 1:1\n"), doctest::Contains("2"), InputError);
  CHECK_THROWS_AS(canonical("S 1 1\nP 1:1\nS 1 1\nP 1:1\n"), InputError);
  CHECK_THROWS_AS(canonical("S 2 2 2 100 1\nP 1:1\n"), InputError);
  CHECK_THROWS_AS(canonical("S 1 1\nP 1:1\nS 2 3 1 100 1\nP 1:1\n"), InputError);
  CHECK_THROWS_AS(canonical("S 1 1\nP 1:-1\n"), InputError);
  CHECK_THROWS_AS(canonical("S 1 1\nP 0:1\n"), InputError);
  CHECK_THROWS_AS(canonical("S 1 1\nP 1:1 2\n"), LineError);
  CHECK_THROWS_AS(canonical("S 1 1\n"), LineError);
  CHECK_THROWS_AS(canonical("X 1 1\n"), LineError);
  try {
    canonical("S 1 1\nP 1:1\nS 2 2 1 abc 1\nP 1:1\n");
    FAIL("expected LineError");
  } catch (const LineError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("canonical round trip is byte identical") {
  auto t = sample_tree();
  std::ostringstream a;
  write_canonical(a, t);
  auto back = canonical(a.str());
  CHECK(back == t);
  std::ostringstream b;
  write_canonical(b, back);
  CHECK(a.str() == b.str());
}

TEST_CASE("minimal mzXML") {
  auto t = mzxml(wrap("<scan num=\"1\" msLevel=\"1\" peaksCount=\"2\"><peaks precision=\"32\" byteOrder=\"network\" "
                      "pairOrder=\"m/z-int\">" +
                      std::string(kPeaks32) + "</peaks></scan>"));
  REQUIRE(t.size() == 1);
  CHECK(t.roots() == std::vector<ScanId>{1});
  CHECK(t.at(1).peaks == std::vector<Peak>{{100, 1}, {200, 2}});
}

TEST_CASE("32 and 64 bit encodings agree; zlib payloads decode") {
  auto scan = [](const char* precision, const char* payload, const char* comp) {
    return wrap(std::string("<scan num=\"1\" msLevel=\"1\"><peaks precision=\"") + precision +
                "\" byteOrder=\"network\" pairOrder=\"m/z-int\" compressionType=\"" + comp + "\">" + payload +
                "</peaks></scan>");
  };
  auto a = mzxml(scan("32", kPeaks32, "none"));
  auto b = mzxml(scan("64", kPeaks64, "none"));
  auto c = mzxml(scan("64", kPeaks64Zlib, "zlib"));
  REQUIRE(a.at(1).peaks.size() == b.at(1).peaks.size());
  for (std::size_t i = 0; i < a.at(1).peaks.size(); ++i) {
    CHECK(a.at(1).peaks[i].mz == doctest::Approx(b.at(1).peaks[i].mz).epsilon(1e-4));
    CHECK(a.at(1).peaks[i].intensity == doctest::Approx(b.at(1).peaks[i].intensity).epsilon(1e-4));
  }
  CHECK(b == c);
  CHECK_THROWS_AS(mzxml(scan("64", "QFkAAAAAAAA/8AAA", "none")), InputError);
  CHECK_THROWS_AS(mzxml(scan("16", kPeaks32, "none")), InputError);
  CHECK_THROWS_AS(mzxml(scan("64", "eJxziGQAA", "zlib")), InputError);
}

TEST_CASE("nested mzXML scans and missing charge") {
  const std::string nested = wrap(
      "<scan num=\"1\" msLevel=\"1\"><peaks precision=\"32\">" + std::string(kPeaks32) +
      "</peaks>"
      "<scan num=\"2\" msLevel=\"2\"><precursorMz>200</precursorMz><peaks precision=\"32\">" + kPeaks32 +
      "</peaks></scan>"
      "<scan num=\"3\" msLevel=\"2\"><precursorMz precursorCharge=\"2\">100</precursorMz><peaks precision=\"32\">" +
      kPeaks32 + "</peaks></scan></scan>");
  auto t = mzxml(nested);
  CHECK(t.children(1) == std::vector<ScanId>{2, 3});
  CHECK_FALSE(t.at(2).precursor_charge.has_value());
  CHECK(t.at(3).precursor_charge == 2);

  const std::string flat = wrap(
      "<scan num=\"1\" msLevel=\"1\"><peaks precision=\"32\">" + std::string(kPeaks32) +
      "</peaks></scan>"
      "<scan num=\"2\" msLevel=\"2\"><precursorMz precursorScanNum=\"1\">200</precursorMz><peaks "
      "precision=\"32\">" +
      kPeaks32 +
      "</peaks></scan>"
      "<scan num=\"3\" msLevel=\"2\"><precursorMz precursorScanNum=\"1\" precursorCharge=\"2\">100</precursorMz>"
      "<peaks precision=\"32\">" +
      kPeaks32 + "</peaks></scan>");
  CHECK(mzxml(flat) == t);

  CHECK_THROWS_AS(mzxml(wrap("<scan num=\"1\" msLevel=\"2\"><precursorMz precursorScanNum=\"1\">5</precursorMz>"
                             "<peaks precision=\"32\"></peaks></scan>")),
                  InputError);
  CHECK_THROWS_AS(mzxml("<mzXML><msRun><scan num=\"1\""), InputError);
}

TEST_CASE("unknown elements are skipped with a warning count") {
  MzxmlStats stats;
  auto t = mzxml(wrap("<parentFile name=\"x\"/><scan num=\"1\" msLevel=\"1\"><peaks precision=\"32\">" +
                      std::string(kPeaks32) + "</peaks></scan><index/>"),
                 &stats);
  CHECK(t.size() == 1);
  CHECK(stats.warnings == 2);
}

TEST_CASE("property: canonical and mzXML readers agree") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Scan> scans;
    ScanId id = 1;
    for (int ms1 = 0; ms1 < 3; ++ms1) {
      const ScanId root = id++;
      Scan s{root, 1, {}, {}, {}, {}};
      for (int k = 0; k < 5; ++k) s.peaks.push_back({100.0 + 900.0 * (rng() % 10000) / 10000.0, double(rng() % 1000)});
      normalize_peaks(s);
      scans.push_back(s);
      for (int c = 0; c < 2; ++c) {
        Scan child{id++, 2, 500.0 + c, (rng() % 2) ? std::optional<int>(2) : std::nullopt, root, {}};
        for (int k = 0; k < 4; ++k) child.peaks.push_back({50.0 + (rng() % 40000) / 100.0, double(rng() % 500)});
        normalize_peaks(child);
        scans.push_back(child);
      }
    }
    auto tree = link_precursors(scans);
    for (int precision : {32, 64}) {
      std::ostringstream xml;
      write_mzxml_subset(xml, tree, precision);
      auto back = mzxml(xml.str());
      REQUIRE(back.size() == tree.size());
      for (const auto& [sid, s] : tree.scans()) {
        const auto& b = back.at(sid);
        CHECK(b.ms_level == s.ms_level);
        CHECK(b.parent_scan_id == s.parent_scan_id);
        CHECK(b.precursor_charge == s.precursor_charge);
        REQUIRE(b.peaks.size() == s.peaks.size());
        for (std::size_t i = 0; i < s.peaks.size(); ++i)
          CHECK(std::abs(b.peaks[i].mz - s.peaks[i].mz) <= 1e-4 * s.peaks[i].mz);
      }
      if (precision == 64) CHECK(back == tree);
    }
  }
}

TEST_CASE("streaming reader holds one scan at a time") {
  std::ostringstream xml;
  xml << "<mzXML><msRun>\n";
  const int n = 100000;
  for (int i = 1; i <= n; ++i)
    xml << "<scan num=\"" << i << "\" msLevel=\"1\"><peaks precision=\"32\">" << kPeaks32 << "</peaks></scan>\n";
  xml << "</msRun></mzXML>\n";
  std::istringstream in(xml.str());
  std::size_t seen = 0;
  auto stats = read_mzxml_stream(in, [&](Scan&& s) {
    ++seen;
    CHECK(s.peaks.size() == 2);
  });
  CHECK(seen == static_cast<std::size_t>(n));
  CHECK(stats.scans == static_cast<std::size_t>(n));
  CHECK(stats.max_resident_peaks <= 2);
}

TEST_CASE("base64") {
  std::vector<unsigned char> bytes{0, 1, 2, 250, 251, 252, 253};
  CHECK(base64_decode(base64_encode(bytes)) == bytes);
  CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
  CHECK_THROWS_AS(base64_decode("TWF"), InputError);
  CHECK_THROWS_AS(base64_decode("TW!u"), InputError);
}
