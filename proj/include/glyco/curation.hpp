#pragma once

// Curation service: serves scans and annotations to the review UI, records
// decisions in the selections file and triggers training and filtering.

#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "glyco/archive.hpp"
#include "glyco/sage.hpp"
#include "glyco/settings.hpp"
#include "glyco/spectra.hpp"

namespace glyco {

struct HttpResponse {
  int status = 200;
  std::string body; // JSON text
};

class CurationService {
public:
  /// `selections_path` is read if present and appended to on each decision.
  /// `base_model` seeds every training run; `model_out` receives the trained
  /// model when set.
  CurationService(ScanTree spectra, std::vector<ArchiveBlock> archive, std::string selections_path,
                  RunSettings settings, std::optional<SageGraph> base_model = std::nullopt,
                  std::optional<std::string> model_out = std::nullopt);

  HttpResponse list_scans() const;
  /// Peaks paginated (page from 0) with intensities relative to the base peak (100).
  HttpResponse get_scan(ScanId id, std::size_t page = 0, std::size_t page_size = 100) const;
  /// Body: {"scan": id, "glycan": str, "config": str, "approved": bool, "reviewer"?: str}.
  HttpResponse post_decision(const std::string& body);
  HttpResponse get_selections() const;
  HttpResponse post_train();
  /// Body: {"top_k": n} or {"min_probability": p}.
  HttpResponse post_filter(const std::string& body) const;
  HttpResponse model_stats() const;

  /// Routes one request; unknown routes give 404.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::map<std::string, std::string>& query, const std::string& body);

  /// Timestamp source for decisions; replaceable for tests.
  void set_clock(std::string (*clock)()) { clock_ = clock; }

private:
  bool annotation_exists(ScanId scan, const std::string& glycan, const std::string& config) const;

  ScanTree spectra_;
  std::vector<ArchiveBlock> archive_;
  std::map<ScanId, std::size_t> block_of_;
  std::string selections_path_;
  RunSettings settings_;
  std::optional<SageGraph> base_model_;
  std::optional<std::string> model_out_;

  mutable std::shared_mutex mutex_;
  std::vector<Selection> history_;
  std::optional<SageGraph> model_;
  std::string (*clock_)();
};

/// Blocks serving the service over HTTP on host:port.
void serve_curation(CurationService& service, const std::string& host, int port);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

} // namespace glyco
