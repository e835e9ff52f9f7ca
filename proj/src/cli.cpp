#include "glyco/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "glyco/archive.hpp"
#include "glyco/curation.hpp"
#include "glyco/engine.hpp"
#include "glyco/errors.hpp"
#include "glyco/evaluation.hpp"
#include "glyco/glycan.hpp"
#include "glyco/sage.hpp"
#include "glyco/settings.hpp"
#include "glyco/spectra.hpp"
#include "glyco/text.hpp"

namespace glyco {

namespace fs = std::filesystem;

namespace {

// Reads `path` with `read`, naming the file in any input error.
template <class Read>
auto read_file(const std::string& path, Read read) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  try {
    return read(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

struct Environment {
  MassModel model = MassModel::defaults();
  RunSettings settings = RunSettings::defaults();
};

// Config lookup: explicit directory, else $GLYC_HOME, else built-in tables.
// Files missing from the directory fall back to the built-in ones.
Environment load_environment(const std::string& config_dir, const std::string& settings_path) {
  Environment env;
  std::string dir = config_dir;
  if (dir.empty()) {
    if (const char* home = std::getenv("GLYC_HOME")) dir = home;
  }
  if (!dir.empty()) {
    if (!fs::is_directory(dir)) throw InputError("config directory not found: " + dir);
    if (fs::exists(fs::path(dir) / "elements.cfg")) {
      env.model.elements = read_file((fs::path(dir) / "elements.cfg").string(),
                                     [](std::istream& in) { return ElementMassTable::parse(in); });
    }
    if (fs::exists(fs::path(dir) / "residues.cfg")) {
      env.model.residues = read_file((fs::path(dir) / "residues.cfg").string(),
                                     [](std::istream& in) { return ResidueRegistry::parse(in); });
    }
  }
  std::string run = settings_path;
  if (run.empty() && !dir.empty() && fs::exists(fs::path(dir) / "run.cfg")) run = (fs::path(dir) / "run.cfg").string();
  if (!run.empty()) {
    env.settings = read_file(run, [&](std::istream& in) { return RunSettings::parse(in, env.model); });
  }
  return env;
}

std::vector<GlycanRecord> load_database(const std::string& path, const MassModel& model, std::ostream& err) {
  auto db = read_file(path, [&](std::istream& in) { return read_glycan_database(in, model.residues); });
  for (const auto& issue : db.issues)
    err << "warning: " << path << ":" << issue.line << ": " << issue.message << "\n";
  if (db.records.empty()) throw InputError("no valid glycans in " + path);
  return std::move(db.records);
}

ScanTree read_spectra(const std::string& path, std::istream& in, std::ostream& err) {
  std::string ext = fs::path(path).extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".mzxml" || ext == ".xml") {
    MzxmlStats stats;
    auto tree = read_mzxml_subset(in, &stats);
    if (stats.warnings) err << "warning: " << stats.warnings << " unsupported mzXML elements ignored\n";
    return tree;
  }
  return read_canonical(in);
}

ScanTree load_spectra(const std::string& path, std::ostream& err) {
  return read_file(path, [&](std::istream& in) { return read_spectra(path, in, err); });
}

std::vector<ArchiveBlock> load_archive(const std::string& path) {
  return read_file(path, [](std::istream& in) { return read_archive(in); });
}

SageGraph load_model(const std::string& path) {
  return read_file(path, [](std::istream& in) { return load(in); });
}

void save_model(const std::string& path, const SageGraph& graph) {
  auto out = open_out(path);
  save(out, graph);
  if (!out) throw InputError("cannot write " + path);
}

std::optional<int> parse_top_k(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (text == "all") return std::nullopt;
  auto k = text::parse_int(text, "top-k");
  if (k < 1) throw InputError("top-k must be >= 1 or 'all'");
  return static_cast<int>(k);
}

std::vector<Dataset> load_datasets(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputError("datasets directory not found: " + dir);
  std::vector<fs::path> spectra;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".scn") spectra.push_back(entry.path());
  std::sort(spectra.begin(), spectra.end());
  std::vector<Dataset> datasets;
  for (const auto& p : spectra) {
    Dataset d;
    d.name = p.stem().string();
    d.spectra = read_file(p.string(), [](std::istream& in) { return read_canonical(in); });
    auto sel_path = fs::path(p).replace_extension(".sel");
    if (fs::exists(sel_path)) {
      d.selections = read_file(sel_path.string(), [](std::istream& in) { return read_selections(in); });
    }
    datasets.push_back(std::move(d));
  }
  return datasets;
}

} // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Glycan MSn annotation, curation and structure learning"};
  app.require_subcommand(1);
  std::string config_dir, settings_path;
  app.add_option("--config-dir", config_dir, "Directory with elements.cfg, residues.cfg, run.cfg (default $GLYC_HOME)");
  app.add_option("--settings", settings_path, "Run settings file");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides settings)")->check(CLI::PositiveNumber);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Annotate spectra against a glycan database");
  std::string spectra_path, db_path, archive_out;
  annotate->add_option("--spectra", spectra_path, "Canonical scan file or mzXML")->required();
  annotate->add_option("--db", db_path, "Glycan database")->required();
  annotate->add_option("--out", archive_out, "Annotation archive to write")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the structure model from approved selections");
  std::string selections_path, archive_path, model_in, model_out;
  train_cmd->add_option("--selections", selections_path, "Selections file")->required();
  train_cmd->add_option("--archive", archive_path, "Annotation archive the selections refer to")->required();
  train_cmd->add_option("--model-in", model_in, "Existing model to extend");
  train_cmd->add_option("--model-out", model_out, "Model file to write")->required();

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "Rank glycans per MS2 scan with a trained model");
  std::string model_path, top_k_text;
  classify_cmd->add_option("--model", model_path, "Model file")->required();
  classify_cmd->add_option("--archive", archive_path, "Annotation archive")->required();
  classify_cmd->add_option("--top-k", top_k_text, "Ranks to report per scan, or 'all'");

  // filter
  auto* filter_cmd = app.add_subcommand("filter", "Keep annotations whose glycan the model ranks highly");
  std::string filtered_out;
  std::optional<double> min_probability;
  filter_cmd->add_option("--model", model_path, "Model file")->required();
  filter_cmd->add_option("--archive", archive_path, "Annotation archive")->required();
  filter_cmd->add_option("--out", filtered_out, "Filtered archive to write")->required();
  filter_cmd->add_option("--top-k", top_k_text, "Glycans kept per scan (default from settings)");
  filter_cmd->add_option("--min-probability", min_probability, "Probability threshold");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Leave-one-out cross-validation over datasets");
  std::string datasets_dir, report_path, csv_path;
  bool baseline = false;
  evaluate_cmd->add_option("--datasets", datasets_dir, "Directory of <name>.scn with <name>.sel")->required();
  evaluate_cmd->add_option("--db", db_path, "Glycan database")->required();
  evaluate_cmd->add_option("--top-k", top_k_text, "Predictions counted per scan, or 'all' (default)");
  evaluate_cmd->add_flag("--baseline", baseline, "Score with the naive Bayes baseline");
  evaluate_cmd->add_option("--report", report_path, "Write the text report here instead of stdout");
  evaluate_cmd->add_option("--csv", csv_path, "Per-fold CSV");

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "Write synthetic datasets with known annotations");
  std::uint64_t seed = 1;
  std::size_t n_datasets = 5, n_glycans = 20;
  double noise = 0.0;
  std::string out_dir;
  generate_cmd->add_option("--seed", seed, "Random seed");
  generate_cmd->add_option("--datasets", n_datasets, "Number of datasets")->check(CLI::PositiveNumber);
  generate_cmd->add_option("--db", db_path, "Glycan database (default: random glycans)");
  generate_cmd->add_option("--glycans", n_glycans, "Random glycans when no --db is given")->check(CLI::PositiveNumber);
  generate_cmd->add_option("--noise", noise, "Noise peaks per true peak")->check(CLI::NonNegativeNumber);
  generate_cmd->add_option("--out", out_dir, "Output directory")->required();

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Serve the curation API on the loopback interface");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--spectra", spectra_path, "Scan file")->required();
  serve_cmd->add_option("--archive", archive_path, "Annotation archive")->required();
  serve_cmd->add_option("--selections", selections_path, "Selections file (created if missing)")->required();
  serve_cmd->add_option("--model-in", model_in, "Base model every training run starts from");
  serve_cmd->add_option("--model-out", model_out, "Where POST /train writes the model");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    Environment env = load_environment(config_dir, settings_path);
    if (threads > 0) env.settings.threads = threads;
    env.settings.validate();

    if (*annotate) {
      auto db = load_database(db_path, env.model, err);
      auto tree = load_spectra(spectra_path, err);
      ArchiveWriter writer(archive_out);
      auto stats = annotate_run(tree, db, env.settings, writer, env.model);
      for (const auto& d : stats.diagnostics) err << "warning: " << d << "\n";
      err << "annotated " << stats.scans << " scans, " << stats.records << " records\n";
    } else if (*train_cmd) {
      SageGraph graph = model_in.empty() ? SageGraph(env.settings.ms1_tolerance) : load_model(model_in);
      auto archive = load_archive(archive_path);
      auto selections = read_file(selections_path, [](std::istream& in) { return read_selections(in); });
      auto used = train(graph, selections, archive);
      save_model(model_out, graph);
      err << "trained on " << used << " records: " << graph.node_count() << " nodes, " << graph.edge_count()
          << " edges\n";
    } else if (*classify_cmd) {
      auto graph = load_model(model_path);
      auto archive = load_archive(archive_path);
      std::optional<int> k = top_k_text.empty() ? env.settings.top_k : parse_top_k(top_k_text);
      for (const auto& [scan, features] : archive_features(archive)) {
        std::set<std::string> glycans;
        for (const auto& b : archive)
          if (b.scan.scan_id == scan)
            for (const auto& r : b.records) glycans.insert(r.glycan_id);
        auto ranked = classify(graph, features, env.settings.ms1_tolerance, env.settings.smoothing, k, &glycans);
        for (std::size_t i = 0; i < ranked.size(); ++i)
          out << scan << '\t' << i + 1 << '\t' << ranked[i].glycan_id << '\t'
              << text::format_double(ranked[i].probability) << '\n';
      }
    } else if (*filter_cmd) {
      auto graph = load_model(model_path);
      auto archive = load_archive(archive_path);
      FilterPolicy policy;
      policy.min_probability = min_probability;
      if (!top_k_text.empty())
        policy.top_k = parse_top_k(top_k_text);
      else if (!min_probability)
        policy.top_k = env.settings.top_k;
      auto filtered = post_filter(graph, archive, policy, env.settings.smoothing, env.settings.ms1_tolerance);
      auto data = open_out(filtered_out);
      auto index = open_out(filtered_out + ".idx");
      write_archive(data, filtered, &index);
      if (!data || !index) throw InputError("cannot write " + filtered_out);
    } else if (*evaluate_cmd) {
      auto db = load_database(db_path, env.model, err);
      auto datasets = load_datasets(datasets_dir);
      LooOptions options;
      options.top_k = parse_top_k(top_k_text);
      options.threads = env.settings.threads;
      options.baseline = baseline;
      auto report = leave_one_out(datasets, db, env.settings, options, env.model);
      for (const auto& w : report.warnings) err << "warning: " << w << "\n";
      if (report_path.empty()) {
        write_report(out, report);
      } else {
        auto f = open_out(report_path);
        write_report(f, report);
      }
      if (!csv_path.empty()) {
        auto f = open_out(csv_path);
        write_report_csv(f, report);
      }
    } else if (*generate_cmd) {
      std::vector<GlycanRecord> db =
          db_path.empty() ? synthetic_database(seed, n_glycans, 2, 6, env.model) : load_database(db_path, env.model, err);
      auto run = generate_synthetic(seed, n_datasets, db, noise, env.settings, env.model);
      fs::create_directories(out_dir);
      {
        auto f = open_out((fs::path(out_dir) / "glycans.gdb").string());
        write_glycan_database(f, db);
      }
      for (const auto& d : run.datasets) {
        auto scans = open_out((fs::path(out_dir) / (d.name + ".scn")).string());
        write_canonical(scans, d.spectra);
        auto sel = open_out((fs::path(out_dir) / (d.name + ".sel")).string());
        write_selections(sel, d.selections);
        if (!scans || !sel) throw InputError("cannot write dataset " + d.name);
      }
      err << "wrote " << run.datasets.size() << " datasets to " << out_dir << "\n";
    } else if (*serve_cmd) {
      auto tree = load_spectra(spectra_path, err);
      auto archive = load_archive(archive_path);
      std::optional<SageGraph> base;
      if (!model_in.empty()) base = load_model(model_in);
      std::optional<std::string> model_target;
      if (!model_out.empty()) model_target = model_out;
      CurationService service(std::move(tree), std::move(archive), selections_path, env.settings, std::move(base),
                              model_target);
      err << "serving on http://" << host << ":" << port << "\n";
      serve_curation(service, host, port);
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

} // namespace glyco
