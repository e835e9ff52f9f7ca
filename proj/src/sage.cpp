#include "glyco/sage.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "glyco/text.hpp"

namespace glyco {

SageGraph::SageGraph(MzTolerance bucket) : bucket_(bucket) {
  if (!(bucket_.value > 0.0)) throw InputError("bucket width must be positive");
}

std::int64_t SageGraph::bucket_of(double mz) const {
  if (!(mz > 0.0)) throw InputError("precursor m/z must be positive");
  if (bucket_.unit == ToleranceUnit::Da) return static_cast<std::int64_t>(std::floor(mz / bucket_.value));
  return static_cast<std::int64_t>(std::floor(std::log(mz) / std::log1p(bucket_.value * 1e-6)));
}

std::string SageGraph::root_label(const std::string& glycan_id, double precursor_mz) const {
  return glycan_id + "@" + std::to_string(bucket_of(precursor_mz));
}

std::string SageGraph::glycan_of(const std::string& root_label) {
  return root_label.substr(0, root_label.rfind('@'));
}

std::pair<std::int64_t, std::int64_t> SageGraph::bucket_range(double mz, const MzTolerance& tol) const {
  const double w = tol.window(mz);
  return {bucket_of(std::max(mz - w, mz * 1e-12)), bucket_of(mz + w)};
}

void SageGraph::add_node(int level, const std::string& label, std::int64_t count) {
  if (level < 0) throw InputError("negative graph level");
  if (!text::is_token(label)) throw InputError("graph labels must be tokens without whitespace");
  nodes_[{level, label}] += count;
}

void SageGraph::add_edge(int parent_level, const std::string& parent, const std::string& child,
                         std::int64_t count) {
  if (parent_level < 0) throw InputError("negative graph level");
  if (!text::is_token(parent) || !text::is_token(child))
    throw InputError("graph labels must be tokens without whitespace");
  edges_[{parent_level, parent, child}] += count;
  child_totals_[{parent_level + 1, child}] += count;
}

std::int64_t SageGraph::node_frequency(int level, const std::string& label) const {
  auto it = nodes_.find({level, label});
  return it == nodes_.end() ? 0 : it->second;
}

std::int64_t SageGraph::edge_frequency(int parent_level, const std::string& parent, const std::string& child) const {
  auto it = edges_.find({parent_level, parent, child});
  return it == edges_.end() ? 0 : it->second;
}

std::int64_t SageGraph::child_total(int level, const std::string& label) const {
  auto it = child_totals_.find({level, label});
  return it == child_totals_.end() ? 0 : it->second;
}

int SageGraph::levels() const {
  if (nodes_.empty()) return 0;
  return std::prev(nodes_.end())->first.first + 1;
}

bool SageGraph::child_totals_consistent() const {
  std::map<NodeKey, std::int64_t> fresh;
  for (const auto& [k, f] : edges_) fresh[{std::get<0>(k) + 1, std::get<2>(k)}] += f;
  return fresh == child_totals_;
}

TrainingRecord training_record(const AnnotationRecord& record, const ArchiveScan& scan) {
  TrainingRecord t;
  t.ms_level = scan.ms_level;
  t.precursor_mz = scan.precursor_mz.value_or(0.0);
  t.glycan_id = record.glycan_id;
  t.candidate_key = record.candidate_key;
  for (const auto& p : record.peak_annotations)
    if (!p.feature_key.empty()) t.features.insert(p.feature_key);
  return t;
}

void train(SageGraph& graph, const std::vector<TrainingRecord>& records) {
  // Validate first so a bad record leaves the graph untouched.
  for (const auto& r : records) {
    if (r.ms_level < 2) throw InputError("training records start at MS2");
    if (r.ms_level == 2 && !(r.precursor_mz > 0.0)) throw InputError("MS2 training record without precursor m/z");
    if (r.ms_level > 2 && r.candidate_key.empty())
      throw InputError("MS" + std::to_string(r.ms_level) + " training record without parent fragment");
  }
  for (const auto& r : records) {
    const int level = r.ms_level - 2;
    const std::string precursor = level == 0 ? graph.root_label(r.glycan_id, r.precursor_mz) : r.candidate_key;
    graph.add_node(level, precursor);
    for (const auto& f : r.features) {
      graph.add_node(level + 1, f);
      graph.add_edge(level, precursor, f);
    }
  }
}

std::size_t train(SageGraph& graph, const std::vector<Selection>& selections,
                  const std::vector<ArchiveBlock>& archive) {
  std::map<std::tuple<ScanId, std::string, std::string>, std::pair<const AnnotationRecord*, const ArchiveScan*>> index;
  for (const auto& b : archive)
    for (const auto& r : b.records) index[{r.scan_id, r.glycan_id, r.config_signature}] = {&r, &b.scan};
  std::vector<TrainingRecord> records;
  for (const auto& s : current_selections(selections)) {
    if (!s.approved) continue;
    auto it = index.find({s.scan_id, s.glycan_id, s.config_signature});
    if (it == index.end())
      throw InputError("selection for scan " + std::to_string(s.scan_id) + " glycan " + s.glycan_id +
                       " names no archived annotation");
    if (it->second.second->ms_level < 2) continue;
    records.push_back(training_record(*it->second.first, *it->second.second));
  }
  train(graph, records);
  return records.size();
}

namespace {

double absent_value(const SageGraph& graph, int level, const std::string& child, const SmoothingConfig& s) {
  if (s.kind == SmoothingConfig::Kind::floor) return s.floor;
  return s.m * s.p / (static_cast<double>(graph.child_total(level, child)) + s.m);
}

// Conditional with unknown children treated as absent edges.
double soft_conditional(const SageGraph& graph, int parent_level, const std::string& parent,
                        const std::string& child, const SmoothingConfig& s, bool* found = nullptr) {
  const auto edge = graph.edge_frequency(parent_level, parent, child);
  if (found) *found = edge > 0;
  if (edge > 0) return static_cast<double>(edge) / static_cast<double>(graph.child_total(parent_level + 1, child));
  return absent_value(graph, parent_level + 1, child, s);
}

} // namespace

double conditional(const SageGraph& graph, int parent_level, const std::string& parent, const std::string& child,
                   const SmoothingConfig& smoothing) {
  if (!graph.has_node(parent_level + 1, child))
    throw InputError("unknown node '" + child + "' at level " + std::to_string(parent_level + 1));
  return soft_conditional(graph, parent_level, parent, child, smoothing);
}

double score(const SageGraph& graph, const std::string& root_label, const ScanFeatures& features,
             const SmoothingConfig& smoothing) {
  double p = 1.0;
  for (std::size_t i = 0; i < features.levels.size(); ++i) {
    const int child_level = static_cast<int>(i) + 1;
    for (const auto& f : features.levels[i]) {
      if (i == 0) {
        p *= soft_conditional(graph, 0, root_label, f, smoothing);
        continue;
      }
      double best = 0.0;
      bool any = false;
      for (const auto& parent : features.levels[i - 1]) {
        bool found = false;
        double c = soft_conditional(graph, child_level - 1, parent, f, smoothing, &found);
        if (found) {
          best = std::max(best, c);
          any = true;
        }
      }
      p *= any ? best : absent_value(graph, child_level, f, smoothing);
    }
  }
  return p;
}

std::vector<Classification> classify(const SageGraph& graph, const ScanFeatures& features,
                                     const MzTolerance& precursor_tolerance, const SmoothingConfig& smoothing,
                                     std::optional<int> k, const std::set<std::string>* allowed) {
  std::map<std::string, Classification> best;
  if (features.precursor_mz > 0.0) {
    auto [lo, hi] = graph.bucket_range(features.precursor_mz, precursor_tolerance);
    auto first = graph.nodes().lower_bound({0, std::string()});
    auto last = graph.nodes().lower_bound({1, std::string()});
    for (auto it = first; it != last; ++it) {
      const auto& label = it->first.second;
      const auto at = label.rfind('@');
      if (at == std::string::npos) continue;
      const auto bucket = text::parse_int(std::string_view(label).substr(at + 1), "bucket");
      if (bucket < lo || bucket > hi) continue;
      std::string glycan = label.substr(0, at);
      if (allowed && !allowed->count(glycan)) continue;
      double p = score(graph, label, features, smoothing);
      auto [slot, inserted] = best.emplace(glycan, Classification{glycan, label, p});
      if (!inserted && p > slot->second.probability) slot->second = Classification{glycan, label, p};
    }
  }
  std::vector<Classification> out;
  for (auto& [g, c] : best) out.push_back(std::move(c));
  std::stable_sort(out.begin(), out.end(), [](const Classification& a, const Classification& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.glycan_id < b.glycan_id;
  });
  if (k && static_cast<std::size_t>(*k) < out.size()) out.resize(static_cast<std::size_t>(*k));
  return out;
}

namespace {

// MS2 ancestor of each scan at level >= 2.
std::map<ScanId, ScanId> ms2_ancestors(const std::vector<ArchiveBlock>& archive) {
  std::map<ScanId, const ArchiveScan*> scans;
  for (const auto& b : archive) scans[b.scan.scan_id] = &b.scan;
  std::map<ScanId, ScanId> out;
  for (const auto& b : archive) {
    const ArchiveScan* s = &b.scan;
    while (s && s->ms_level > 2 && s->parent_scan_id) {
      auto it = scans.find(*s->parent_scan_id);
      s = it == scans.end() ? nullptr : it->second;
    }
    if (s && s->ms_level == 2 && b.scan.ms_level >= 2) out[b.scan.scan_id] = s->scan_id;
  }
  return out;
}

} // namespace

std::map<ScanId, ScanFeatures> archive_features(const std::vector<ArchiveBlock>& archive) {
  auto ancestors = ms2_ancestors(archive);
  std::map<ScanId, ScanFeatures> out;
  for (const auto& b : archive)
    if (b.scan.ms_level == 2) out[b.scan.scan_id].precursor_mz = b.scan.precursor_mz.value_or(0.0);
  for (const auto& b : archive) {
    auto a = ancestors.find(b.scan.scan_id);
    if (a == ancestors.end()) continue;
    auto& f = out[a->second];
    const auto depth = static_cast<std::size_t>(b.scan.ms_level - 2);
    if (f.levels.size() <= depth) f.levels.resize(depth + 1);
    for (const auto& r : b.records)
      for (const auto& p : r.peak_annotations)
        if (!p.feature_key.empty()) f.levels[depth].insert(p.feature_key);
  }
  return out;
}

std::vector<ArchiveBlock> post_filter(const SageGraph& graph, const std::vector<ArchiveBlock>& archive,
                                      const FilterPolicy& policy, const SmoothingConfig& smoothing,
                                      const MzTolerance& precursor_tolerance) {
  const auto features = archive_features(archive);
  const auto ancestors = ms2_ancestors(archive);
  std::map<ScanId, std::set<std::string>> survivors;
  for (const auto& b : archive) {
    if (b.scan.ms_level != 2) continue;
    std::set<std::string> candidates;
    for (const auto& r : b.records) candidates.insert(r.glycan_id);
    auto ranked = classify(graph, features.at(b.scan.scan_id), precursor_tolerance, smoothing, policy.top_k,
                           &candidates);
    auto& keep = survivors[b.scan.scan_id];
    for (const auto& c : ranked)
      if (!policy.min_probability || c.probability >= *policy.min_probability) keep.insert(c.glycan_id);
  }
  std::vector<ArchiveBlock> out;
  out.reserve(archive.size());
  for (const auto& b : archive) {
    ArchiveBlock kept{b.scan, {}};
    if (b.scan.ms_level == 1) {
      kept.records = b.records;
    } else if (auto a = ancestors.find(b.scan.scan_id); a != ancestors.end()) {
      const auto& keep = survivors[a->second];
      for (const auto& r : b.records)
        if (keep.count(r.root_glycan_id())) kept.records.push_back(r);
    }
    out.push_back(std::move(kept));
  }
  return out;
}

namespace {

std::string body_text(const SageGraph& g) {
  std::ostringstream o;
  o << "W " << text::format_double(g.bucket_width().value) << ' '
    << (g.bucket_width().unit == ToleranceUnit::Da ? "Da" : "ppm") << '\n';
  for (const auto& [k, f] : g.nodes()) o << "N " << k.first << ' ' << k.second << ' ' << f << '\n';
  for (const auto& [k, f] : g.edges())
    o << "E " << std::get<0>(k) << ' ' << std::get<1>(k) << ' ' << std::get<2>(k) << ' ' << f << '\n';
  return o.str();
}

std::string crc_hex(const std::string& body) {
  auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

} // namespace

void save(std::ostream& out, const SageGraph& graph) {
  auto body = body_text(graph);
  out << "SAGE v1 levels=" << graph.levels() << " checksum=" << crc_hex(body) << '\n' << body;
}

SageGraph load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ModelFormatError("empty model file");
  auto h = text::split_ws(header);
  if (h.size() != 4 || h[0] != "SAGE") throw ModelFormatError("not a SAGE model file");
  if (h[1] != "v1") throw ModelFormatError("unsupported model version '" + std::string(h[1]) + "'");
  if (!text::starts_with(h[2], "levels=") || !text::starts_with(h[3], "checksum="))
    throw ModelFormatError("malformed model header");
  const auto levels = text::parse_int(h[2].substr(7), "levels");
  const std::string checksum(h[3].substr(9));
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (crc_hex(body) != checksum) throw ModelFormatError("model checksum mismatch");

  std::istringstream lines(body);
  std::string line;
  std::size_t n = 1;
  std::optional<SageGraph> graph;
  try {
    while (std::getline(lines, line)) {
      ++n;
      auto f = text::split_ws(line);
      if (f.empty()) continue;
      if (f[0] == "W") {
        if (graph || f.size() != 3) throw InputError("bucket width line must come first: W <value> <unit>");
        graph.emplace(MzTolerance::parse(std::string(f[1]) + " " + std::string(f[2]), MsScope::MS1));
      } else if (!graph) {
        throw InputError("missing bucket width line");
      } else if (f[0] == "N" && f.size() == 4) {
        auto freq = text::parse_int(f[3], "frequency");
        if (freq < 1) throw InputError("node frequency must be positive");
        graph->add_node(static_cast<int>(text::parse_int(f[1], "level")), std::string(f[2]), freq);
      } else if (f[0] == "E" && f.size() == 5) {
        auto level = static_cast<int>(text::parse_int(f[1], "level"));
        auto freq = text::parse_int(f[4], "frequency");
        if (freq < 1) throw InputError("edge frequency must be positive");
        std::string parent(f[2]), child(f[3]);
        if (!graph->has_node(level, parent) || !graph->has_node(level + 1, child))
          throw InputError("edge references an unknown node");
        graph->add_edge(level, parent, child, freq);
      } else {
        throw InputError("unrecognised model line");
      }
    }
  } catch (const InputError& e) {
    throw ModelFormatError("model line " + std::to_string(n) + ": " + e.what());
  }
  if (!graph) throw ModelFormatError("missing bucket width line");
  if (graph->levels() != levels) throw ModelFormatError("level count differs from header");
  return std::move(*graph);
}

} // namespace glyco
