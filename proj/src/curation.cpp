#include "glyco/curation.hpp"

#include <httplib.h>

#include <algorithm>
#include <ctime>
#include <fstream>
#include <set>
#include <tuple>
#include <json.hpp>

#include "glyco/errors.hpp"
#include "glyco/text.hpp"

namespace glyco {

using json = nlohmann::json;

namespace {

HttpResponse reply(int status, const json& body) { return {status, body.dump()}; }
HttpResponse error(int status, const std::string& message) { return reply(status, json{{"error", message}}); }

json selection_json(const Selection& s) {
  return {{"scan", s.scan_id},         {"glycan", s.glycan_id}, {"config", s.config_signature},
          {"approved", s.approved},    {"reviewer", s.reviewer}, {"timestamp", s.timestamp}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

} // namespace

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CurationService::CurationService(ScanTree spectra, std::vector<ArchiveBlock> archive, std::string selections_path,
                                 RunSettings settings, std::optional<SageGraph> base_model,
                                 std::optional<std::string> model_out)
    : spectra_(std::move(spectra)), archive_(std::move(archive)), selections_path_(std::move(selections_path)),
      settings_(std::move(settings)), base_model_(std::move(base_model)), model_out_(std::move(model_out)),
      clock_(&utc_timestamp) {
  for (std::size_t i = 0; i < archive_.size(); ++i) block_of_[archive_[i].scan.scan_id] = i;
  std::ifstream in(selections_path_);
  if (in) history_ = read_selections(in);
}

bool CurationService::annotation_exists(ScanId scan, const std::string& glycan, const std::string& config) const {
  auto it = block_of_.find(scan);
  if (it == block_of_.end()) return false;
  const auto& records = archive_[it->second].records;
  return std::any_of(records.begin(), records.end(), [&](const AnnotationRecord& r) {
    return r.glycan_id == glycan && r.config_signature == config;
  });
}

HttpResponse CurationService::list_scans() const {
  std::shared_lock lock(mutex_);
  json scans = json::array();
  for (const auto& [id, s] : spectra_.scans()) {
    auto it = block_of_.find(id);
    scans.push_back({{"id", id},
                     {"level", s.ms_level},
                     {"precursor_mz", s.precursor_mz ? json(*s.precursor_mz) : json(nullptr)},
                     {"precursor_charge", s.precursor_charge ? json(*s.precursor_charge) : json(nullptr)},
                     {"parent", s.parent_scan_id ? json(*s.parent_scan_id) : json(nullptr)},
                     {"peak_count", s.peaks.size()},
                     {"annotation_count", it == block_of_.end() ? 0 : archive_[it->second].records.size()}});
  }
  return reply(200, json{{"scans", scans}});
}

HttpResponse CurationService::get_scan(ScanId id, std::size_t page, std::size_t page_size) const {
  std::shared_lock lock(mutex_);
  const Scan* s = spectra_.find(id);
  if (!s) return error(404, "unknown scan " + std::to_string(id));
  if (page_size == 0) return error(400, "page_size must be positive");

  double base = 0.0;
  for (const auto& p : s->peaks) base = std::max(base, p.intensity);
  json peaks = json::array();
  const std::size_t first = std::min(s->peaks.size(), page * page_size);
  const std::size_t last = std::min(s->peaks.size(), first + page_size);
  for (std::size_t i = first; i < last; ++i)
    peaks.push_back({{"index", i},
                     {"mz", s->peaks[i].mz},
                     {"relative_intensity", base > 0.0 ? 100.0 * s->peaks[i].intensity / base : 0.0}});

  std::map<std::tuple<std::string, std::string>, bool> decisions;
  for (const auto& sel : current_selections(history_))
    if (sel.scan_id == id) decisions[{sel.glycan_id, sel.config_signature}] = sel.approved;

  std::map<std::string, double> probabilities;
  json annotations = json::array();
  if (auto it = block_of_.find(id); it != block_of_.end()) {
    const auto& block = archive_[it->second];
    if (model_ && s->ms_level == 2) {
      auto features = archive_features(archive_);
      std::set<std::string> glycans;
      for (const auto& r : block.records) glycans.insert(r.glycan_id);
      for (const auto& c :
           classify(*model_, features[id], settings_.ms1_tolerance, settings_.smoothing, std::nullopt, &glycans))
        probabilities[c.glycan_id] = c.probability;
    }
    for (const auto& r : block.records) {
      json matches = json::array();
      for (const auto& p : r.peak_annotations)
        matches.push_back({{"peak_index", p.peak_index},
                           {"fragment", p.fragment_signature},
                           {"theoretical_mz", p.theoretical_mz},
                           {"delta", p.delta},
                           {"ion", p.ion_signature}});
      auto d = decisions.find({r.glycan_id, r.config_signature});
      auto prob = probabilities.find(r.glycan_id);
      annotations.push_back({{"glycan", r.glycan_id},
                             {"config", r.config_signature},
                             {"score_c", optional_number(r.score_c)},
                             {"score_i", optional_number(r.score_i)},
                             {"matches", matches},
                             {"decision", d == decisions.end() ? json(nullptr) : json(d->second)},
                             {"probability", prob == probabilities.end() ? json(nullptr) : json(prob->second)}});
    }
  }
  return reply(200, json{{"id", id},
                         {"level", s->ms_level},
                         {"precursor_mz", s->precursor_mz ? json(*s->precursor_mz) : json(nullptr)},
                         {"precursor_charge", s->precursor_charge ? json(*s->precursor_charge) : json(nullptr)},
                         {"peak_count", s->peaks.size()},
                         {"page", page},
                         {"page_size", page_size},
                         {"peaks", peaks},
                         {"annotations", annotations}});
}

HttpResponse CurationService::post_decision(const std::string& body) {
  Selection sel;
  try {
    auto j = json::parse(body);
    if (!j.is_object() || !j.contains("scan") || !j.contains("glycan") || !j.contains("config") ||
        !j.contains("approved") || !j["scan"].is_number_integer() || !j["glycan"].is_string() ||
        !j["config"].is_string() || !j["approved"].is_boolean())
      return error(400, "expected {scan, glycan, config, approved}");
    sel.scan_id = j["scan"].get<ScanId>();
    sel.glycan_id = j["glycan"].get<std::string>();
    sel.config_signature = j["config"].get<std::string>();
    sel.approved = j["approved"].get<bool>();
    sel.reviewer = j.contains("reviewer") && j["reviewer"].is_string() ? j["reviewer"].get<std::string>() : "analyst";
    if (!text::is_token(sel.reviewer)) return error(400, "reviewer must be a single token");
  } catch (const json::exception& e) {
    return error(400, std::string("malformed body: ") + e.what());
  }
  std::unique_lock lock(mutex_);
  if (!annotation_exists(sel.scan_id, sel.glycan_id, sel.config_signature))
    return error(409, "no such annotation");
  sel.timestamp = clock_();
  std::ofstream out(selections_path_, std::ios::app | std::ios::binary);
  out << format_selection(sel);
  out.flush();
  if (!out) return error(500, "cannot write selections file");
  history_.push_back(sel);
  return reply(200, selection_json(sel));
}

HttpResponse CurationService::get_selections() const {
  std::shared_lock lock(mutex_);
  json list = json::array();
  for (const auto& s : current_selections(history_)) list.push_back(selection_json(s));
  return reply(200, json{{"selections", list}});
}

HttpResponse CurationService::post_train() {
  std::unique_lock lock(mutex_);
  SageGraph graph = base_model_ ? *base_model_ : SageGraph(settings_.ms1_tolerance);
  std::size_t used = 0;
  try {
    used = train(graph, history_, archive_);
  } catch (const InputError& e) {
    return error(409, e.what());
  }
  if (model_out_) {
    std::ofstream out(*model_out_, std::ios::binary);
    save(out, graph);
    if (!out) return error(500, "cannot write model file");
  }
  model_ = std::move(graph);
  return reply(200, json{{"trained_records", used},
                         {"nodes", model_->node_count()},
                         {"edges", model_->edge_count()},
                         {"levels", model_->levels()}});
}

HttpResponse CurationService::post_filter(const std::string& body) const {
  FilterPolicy policy;
  try {
    auto j = json::parse(body.empty() ? "{}" : body);
    if (!j.is_object()) return error(400, "expected an object");
    if (j.contains("top_k")) {
      if (!j["top_k"].is_number_integer() || j["top_k"].get<int>() < 1) return error(400, "top_k must be >= 1");
      policy.top_k = j["top_k"].get<int>();
    }
    if (j.contains("min_probability")) {
      if (!j["min_probability"].is_number()) return error(400, "min_probability must be a number");
      policy.min_probability = j["min_probability"].get<double>();
    }
    if (!policy.top_k && !policy.min_probability) return error(400, "give top_k or min_probability");
  } catch (const json::exception& e) {
    return error(400, std::string("malformed body: ") + e.what());
  }
  std::shared_lock lock(mutex_);
  if (!model_) return error(409, "no trained model; POST /train first");
  auto filtered = glyco::post_filter(*model_, archive_, policy, settings_.smoothing, settings_.ms1_tolerance);
  json scans = json::array();
  for (const auto& b : filtered) {
    json kept = json::array();
    for (const auto& r : b.records) kept.push_back({{"glycan", r.glycan_id}, {"config", r.config_signature}});
    scans.push_back({{"id", b.scan.scan_id}, {"kept", kept}});
  }
  return reply(200, json{{"scans", scans}});
}

HttpResponse CurationService::model_stats() const {
  std::shared_lock lock(mutex_);
  if (!model_) return reply(200, json{{"trained", false}, {"nodes", 0}, {"edges", 0}, {"levels", 0}});
  return reply(200, json{{"trained", true},
                         {"nodes", model_->node_count()},
                         {"edges", model_->edge_count()},
                         {"levels", model_->levels()}});
}

HttpResponse CurationService::handle(const std::string& method, const std::string& path,
                                     const std::map<std::string, std::string>& query, const std::string& body) {
  auto number = [&](const char* key, std::size_t fallback) -> std::size_t {
    auto it = query.find(key);
    if (it == query.end()) return fallback;
    auto v = text::parse_int(it->second, key);
    if (v < 0) throw InputError(std::string(key) + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  try {
    if (method == "GET" && path == "/scans") return list_scans();
    if (method == "GET" && text::starts_with(path, "/scans/"))
      return get_scan(text::parse_int(path.substr(7), "scan id"), number("page", 0), number("page_size", 100));
    if (method == "POST" && path == "/decisions") return post_decision(body);
    if (method == "GET" && path == "/selections") return get_selections();
    if (method == "POST" && path == "/train") return post_train();
    if (method == "POST" && path == "/filter") return post_filter(body);
    if (method == "GET" && path == "/model/stats") return model_stats();
  } catch (const InputError& e) {
    return error(400, e.what());
  }
  return error(404, "no route " + method + " " + path);
}

void serve_curation(CurationService& service, const std::string& host, int port) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    auto r = service.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get(R"(/.*)", bridge);
  server.Post(R"(/.*)", bridge);
  if (!server.listen(host, port)) throw InputError("cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace glyco
