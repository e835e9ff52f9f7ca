#include <doctest.h>

#include <sstream>

#include "glyco/errors.hpp"
#include "glyco/evaluation.hpp"
#include "support.hpp"

using namespace glyco;
using namespace glyco::testing;

namespace {

std::string canonical_text(const ScanTree& t) {
  std::ostringstream o;
  write_canonical(o, t);
  return o.str();
}

std::string selections_text(const std::vector<Selection>& s) {
  std::ostringstream o;
  write_selections(o, s);
  return o.str();
}

// Mean score_c over the generating annotations of every dataset.
double true_score_c(const SyntheticRun& run, const std::vector<GlycanRecord>& db, const RunSettings& settings) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : run.datasets) {
    auto archive = annotate_in_memory(d.spectra, db, settings);
    for (const auto& s : d.selections)
      for (const auto& b : archive)
        for (const auto& r : b.records)
          if (r.scan_id == s.scan_id && r.glycan_id == s.glycan_id && r.config_signature == s.config_signature &&
              b.scan.ms_level == 2) {
            sum += *r.score_c;
            ++n;
          }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace

TEST_CASE("accuracy and coverage") {
  std::set<AnnotationKey> approved{{1, "A"}, {2, "B"}, {3, "C"}};
  auto same = evaluate(approved, approved);
  CHECK(*same.accuracy == 1.0);
  CHECK(same.coverage == 1.0);

  auto extra = approved;
  extra.insert({4, "D"});
  auto sup = evaluate(extra, approved);
  CHECK(sup.coverage == 1.0);
  CHECK(*sup.accuracy == doctest::Approx(3.0 / 4.0).epsilon(1e-15));

  auto disjoint = evaluate({{9, "Z"}}, approved);
  CHECK(*disjoint.accuracy == 0.0);
  CHECK(disjoint.coverage == 0.0);

  auto nothing = evaluate({}, approved);
  CHECK_FALSE(nothing.accuracy.has_value());
  CHECK(nothing.coverage == 0.0);
}

TEST_CASE("approved keys use current MS2 decisions only") {
  auto tree = link_precursors({{1, 1, {}, {}, {}, {}}, {2, 2, 500.0, 1, 1, {}}});
  std::vector<Selection> sel{{2, "A", "c", true, "r", "t0"},
                             {2, "B", "c", true, "r", "t1"},
                             {2, "B", "c", false, "r", "t2"},
                             {1, "C", "c", true, "r", "t3"}};
  CHECK(approved_keys(sel, tree) == std::set<AnnotationKey>{{2, "A"}});
}

TEST_CASE("synthetic generation is deterministic") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(1, 10);
  CHECK(db.size() == 10);
  auto again_db = synthetic_database(1, 10);
  for (std::size_t i = 0; i < db.size(); ++i) CHECK(db[i].structure.serialize() == again_db[i].structure.serialize());

  auto a = generate_synthetic(42, 3, db, 0.3, settings);
  auto b = generate_synthetic(42, 3, db, 0.3, settings);
  auto c = generate_synthetic(43, 3, db, 0.3, settings);
  REQUIRE(a.datasets.size() == 3);
  bool differs = false;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(canonical_text(a.datasets[i].spectra) == canonical_text(b.datasets[i].spectra));
    CHECK(selections_text(a.datasets[i].selections) == selections_text(b.datasets[i].selections));
    differs = differs || canonical_text(a.datasets[i].spectra) != canonical_text(c.datasets[i].spectra);
  }
  CHECK(differs);
}

TEST_CASE("noise-free synthetic annotations are found by the engine") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(2, 12);
  auto run = generate_synthetic(3, 2, db, 0.0, settings);
  for (const auto& d : run.datasets) {
    auto archive = annotate_in_memory(d.spectra, db, settings);
    REQUIRE_FALSE(d.selections.empty());
    for (const auto& s : d.selections) {
      bool found = false;
      for (const auto& b : archive)
        for (const auto& r : b.records)
          found = found || (r.scan_id == s.scan_id && r.glycan_id == s.glycan_id &&
                            r.config_signature == s.config_signature);
      CHECK_MESSAGE(found, "scan ", s.scan_id, " glycan ", s.glycan_id, " ", s.config_signature);
    }
  }
}

TEST_CASE("spurious peaks lower score_c of the true annotations") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(4, 8);
  const double clean = true_score_c(generate_synthetic(11, 2, db, 0.0, settings), db, settings);
  const double some = true_score_c(generate_synthetic(11, 2, db, 0.5, settings), db, settings);
  const double more = true_score_c(generate_synthetic(11, 2, db, 2.0, settings), db, settings);
  CHECK(clean == doctest::Approx(1.0));
  CHECK(some < clean);
  CHECK(more < some);
}

TEST_CASE("leave-one-out on noise-free synthetic data recovers every annotation") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(7, 15);
  auto run = generate_synthetic(7, 10, db, 0.0, settings);
  LooOptions opts;
  opts.top_k = 1;
  auto r = leave_one_out(run.datasets, db, settings, opts);
  CHECK(r.fold_count == 10);
  REQUIRE(r.accuracy);
  CHECK(*r.accuracy >= 0.99);
  CHECK(r.coverage >= 0.99);
  CHECK(r.train_ms >= 0.0);

  opts.threads = 4;
  auto parallel = leave_one_out(run.datasets, db, settings, opts);
  CHECK(*parallel.accuracy == *r.accuracy);
  CHECK(parallel.coverage == r.coverage);

  CHECK_THROWS_AS(leave_one_out({run.datasets[0]}, db, settings, opts), InputError);
}

TEST_CASE("disjoint glycan vocabularies transfer nothing") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(9, 8);
  std::vector<GlycanRecord> left(db.begin(), db.begin() + 4), right(db.begin() + 4, db.end());
  auto a = generate_synthetic(1, 1, left, 0.0, settings);
  auto b = generate_synthetic(2, 1, right, 0.0, settings);
  std::vector<Dataset> ds{a.datasets[0], b.datasets[0]};
  auto r = leave_one_out(ds, db, settings, {1, 1, false});
  REQUIRE(r.folds.size() == 2);
  for (const auto& f : r.folds) CHECK(f.coverage == 0.0);
  CHECK(r.coverage == 0.0);
}

TEST_CASE("folds without approved annotations are skipped with a warning") {
  auto settings = RunSettings::defaults();
  auto db = synthetic_database(9, 4);
  auto run = generate_synthetic(1, 3, db, 0.0, settings);
  run.datasets[1].selections.clear();
  auto r = leave_one_out(run.datasets, db, settings, {1, 1, false});
  CHECK(r.fold_count == 2);
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("naive Bayes baseline") {
  NaiveBayesBaseline single;
  single.add("G", {"F1"});
  single.add("G", {"F2"});
  CHECK(single.classify({"F9"}).at(0).glycan_id == "G");

  NaiveBayesBaseline counts;
  for (int i = 0; i < 50; ++i) counts.add("G1", i < 20 ? std::set<std::string>{"F1", "F3"} : std::set<std::string>{"F1"});
  for (int i = 0; i < 40; ++i) counts.add("G2", i < 15 ? std::set<std::string>{"F3", "F4"} : std::set<std::string>{"F3"});
  auto ranked = counts.classify({"F1", "F3"});
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0].glycan_id == "G1");
  // n(G)/N * prod (n(G,f)+1)/(n(G)+2)
  CHECK(ranked[0].probability == doctest::Approx(50.0 / 90 * 51.0 / 52 * 21.0 / 52).epsilon(1e-12));
  CHECK(ranked[1].probability == doctest::Approx(40.0 / 90 * 1.0 / 42 * 41.0 / 42).epsilon(1e-12));
  // the graph model agrees on the order
  auto sage = classify(example_graph(), example_features(), {10.0, ToleranceUnit::ppm, MsScope::MS1},
                       SmoothingConfig::fixed_floor(0.1));
  CHECK(sage[0].glycan_id == ranked[0].glycan_id);

  NaiveBayesBaseline uniform;
  uniform.add("B", {"F"});
  uniform.add("A", {"F"});
  CHECK(uniform.classify({"F"}).at(0).glycan_id == "A");
  CHECK(uniform.classify({"F"}, 1).size() == 1);
}

TEST_CASE("metrics ignore record order") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AnnotationKey> p, a;
    for (int i = 0; i < 30; ++i) p.emplace_back(rng() % 10, "G" + std::to_string(rng() % 4));
    for (int i = 0; i < 30; ++i) a.emplace_back(rng() % 10, "G" + std::to_string(rng() % 4));
    auto r1 = evaluate({p.begin(), p.end()}, {a.begin(), a.end()});
    std::shuffle(p.begin(), p.end(), rng);
    std::shuffle(a.begin(), a.end(), rng);
    auto r2 = evaluate({p.begin(), p.end()}, {a.begin(), a.end()});
    CHECK(r1.accuracy == r2.accuracy);
    CHECK(r1.coverage == r2.coverage);
  }
}

TEST_CASE("report formats") {
  EvaluationReport r = evaluate({{1, "A"}}, {{1, "A"}, {2, "B"}});
  r.fold_count = 1;
  std::ostringstream text, csv;
  write_report(text, r);
  write_report_csv(csv, r);
  CHECK(text.str().find("coverage 0.5") != std::string::npos);
  CHECK(text.str().find("accuracy 1") != std::string::npos);
  CHECK(csv.str().find("accuracy") != std::string::npos);
}
