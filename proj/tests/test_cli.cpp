#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "glyco/cli.hpp"
#include "glyco/engine.hpp"
#include "glyco/sage.hpp"
#include "support.hpp"

using namespace glyco;
using namespace glyco::testing;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "glyco");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class ScopedEnv {
public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_, old_->c_str(), 1);
    else ::unsetenv(name_);
  }

private:
  const char* name_;
  std::optional<std::string> old_;
};

} // namespace

TEST_CASE("cli pipeline matches direct module calls") {
  TempDir dir("cli");
  const auto data = dir / "data";
  auto g = run({"generate", "--seed", "3", "--datasets", "3", "--glycans", "8", "--out", data});
  REQUIRE_MESSAGE(g.code == 0, g.err);
  const auto scn = data + "/dataset_1.scn";
  const auto sel = data + "/dataset_1.sel";
  const auto gdb = data + "/glycans.gdb";
  CHECK(std::filesystem::exists(scn));
  CHECK(std::filesystem::exists(sel));
  CHECK(std::filesystem::exists(gdb));

  auto a = run({"annotate", "--spectra", scn, "--db", gdb, "--out", dir / "run.arc"});
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(std::filesystem::exists(dir / "run.arc.idx"));

  // same archive bytes from the library
  std::ifstream scn_in(scn), gdb_in(gdb);
  auto tree = read_canonical(scn_in);
  auto db = read_glycan_database(gdb_in, ResidueRegistry::defaults()).records;
  std::ostringstream direct;
  {
    ArchiveWriter w(direct);
    annotate_run(tree, db, RunSettings::defaults(), w);
    w.close();
  }
  CHECK(read_file(dir / "run.arc") == direct.str());

  auto t = run({"train", "--selections", sel, "--archive", dir / "run.arc", "--model-out", dir / "m.sage"});
  REQUIRE_MESSAGE(t.code == 0, t.err);
  std::istringstream arc_in(direct.str());
  auto archive = read_archive(arc_in);
  std::ifstream sel_in(sel);
  SageGraph graph(RunSettings::defaults().ms1_tolerance);
  train(graph, read_selections(sel_in), archive);
  std::ostringstream model;
  save(model, graph);
  CHECK(read_file(dir / "m.sage") == model.str());

  auto c = run({"classify", "--model", dir / "m.sage", "--archive", dir / "run.arc", "--top-k", "1"});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  std::istringstream lines(c.out);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), '\t') == 3);
    CHECK(line.find("\t1\t") != std::string::npos);
  }
  CHECK(rows > 0);

  auto f = run({"filter", "--model", dir / "m.sage", "--archive", dir / "run.arc", "--out", dir / "f.arc"});
  REQUIRE_MESSAGE(f.code == 0, f.err);
  auto filtered = post_filter(graph, archive, {1, std::nullopt}, RunSettings::defaults().smoothing,
                              RunSettings::defaults().ms1_tolerance);
  std::ostringstream filtered_text;
  write_archive(filtered_text, filtered);
  CHECK(read_file(dir / "f.arc") == filtered_text.str());
  CHECK(std::filesystem::exists(dir / "f.arc.idx"));

  auto e = run({"evaluate", "--datasets", data, "--db", gdb, "--top-k", "1", "--csv", dir / "folds.csv"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out.find("folds 3") != std::string::npos);
  CHECK(e.out.find("accuracy 1\n") != std::string::npos);
  CHECK(e.out.find("coverage 1\n") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "folds.csv"));

  auto b = run({"evaluate", "--datasets", data, "--db", gdb, "--top-k", "1", "--baseline"});
  CHECK(b.code == 0);
}

TEST_CASE("cli runs are repeatable") {
  TempDir dir("cli_repeat");
  REQUIRE(run({"generate", "--seed", "5", "--datasets", "2", "--out", dir / "a"}).code == 0);
  REQUIRE(run({"generate", "--seed", "5", "--datasets", "2", "--out", dir / "b"}).code == 0);
  for (const char* name : {"/glycans.gdb", "/dataset_1.scn", "/dataset_2.sel"})
    CHECK(read_file(dir / "a" + name) == read_file(dir / "b" + name));
  const auto spectra = dir / "a" + "/dataset_1.scn";
  const auto gdb = dir / "a" + "/glycans.gdb";
  REQUIRE(run({"annotate", "--spectra", spectra, "--db", gdb, "--out", dir / "1.arc"}).code == 0);
  REQUIRE(run({"--threads", "4", "annotate", "--spectra", spectra, "--db", gdb, "--out", dir / "2.arc"}).code == 0);
  CHECK(read_file(dir / "1.arc") == read_file(dir / "2.arc"));
}

TEST_CASE("cli exit codes") {
  TempDir dir("cli_exit");
  CHECK(run({}).code == 1);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"annotate", "--spectra", dir / "missing.scn"}).code == 1);
  auto missing = run({"annotate", "--spectra", dir / "missing.scn", "--db", dir / "x.gdb", "--out", dir / "o.arc"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") != std::string::npos);

  write_file(dir / "bad.scn", "S 1 1\nP 1:x\n");
  write_file(dir / "db.gdb", "G1\tHex(b1-4)Hex\tx\n");
  auto bad = run({"annotate", "--spectra", dir / "bad.scn", "--db", dir / "db.gdb", "--out", dir / "o.arc"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.scn: line 2") != std::string::npos);

  write_file(dir / "corrupt.sage", "SAGE v1 levels=1 checksum=00000000\nN 0 G@1 1\n");
  write_file(dir / "empty.arc", "");
  CHECK(run({"classify", "--model", dir / "corrupt.sage", "--archive", dir / "empty.arc"}).code == 1);
  CHECK(run({"generate", "--datasets", "0", "--out", dir / "g"}).code == 1);
}

TEST_CASE("configuration comes from --config-dir or GLYC_HOME") {
  TempDir dir("cli_home");
  REQUIRE(run({"generate", "--seed", "1", "--datasets", "1", "--glycans", "4", "--out", dir / "d"}).code == 0);
  const auto spectra = dir / "d" + "/dataset_1.scn";
  const auto gdb = dir / "d" + "/glycans.gdb";
  std::filesystem::create_directories(dir / "home");
  write_file(dir / "home" + "/run.cfg", "max_charge = nonsense\n");
  {
    ScopedEnv env("GLYC_HOME", dir / "home");
    auto r = run({"annotate", "--spectra", spectra, "--db", gdb, "--out", dir / "o.arc"});
    CHECK(r.code == 1);
    CHECK(r.err.find("run.cfg") != std::string::npos);
    write_file(dir / "home" + "/run.cfg", RunSettings::defaults().to_text());
    CHECK(run({"annotate", "--spectra", spectra, "--db", gdb, "--out", dir / "o.arc"}).code == 0);
  }
  {
    ScopedEnv env("GLYC_HOME", dir / "nowhere");
    CHECK(run({"annotate", "--spectra", spectra, "--db", gdb, "--out", dir / "o.arc"}).code == 1);
  }
  // an explicit settings file overrides the directory
  write_file(dir / "tight.cfg", RunSettings::defaults().to_text());
  CHECK(run({"--config-dir", dir / "home", "--settings", dir / "tight.cfg", "annotate", "--spectra", spectra, "--db",
             gdb, "--out", dir / "o.arc"})
            .code == 0);
}
