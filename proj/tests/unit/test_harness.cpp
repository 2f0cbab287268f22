#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfstune/config.hpp"
#include "mfstune/errors.hpp"
#include "mfstune/experiment.hpp"
#include "mfstune/persistence.hpp"

using namespace mfstune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mfstune_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig synthetic_config() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.objective = ObjectiveKind::synthetic;
  c.j_max = 60;
  c.n_avg = 5;
  c.n_min = 2;
  c.j_init = 15;
  c.repetitions = 2;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("presets") {
  const auto desk = ExperimentConfig::desk();
  CHECK(desk.n_colloc == 150);
  CHECK(desk.k_test == 200);
  CHECK(desk.j_max == 200);
  CHECK(desk.n_avg == 10);
  CHECK(desk.n_min == 3);
  CHECK(desk.j_init == 50);
  CHECK(desk.repetitions == 10);
  const auto paper = ExperimentConfig::paper();
  CHECK(paper.n_colloc == 300);
  CHECK(paper.k_test == 1000);
  CHECK(paper.j_max == 800);
  CHECK(paper.n_avg == 30);
  CHECK(paper.n_min == 5);
  CHECK(paper.j_init == 150);
  CHECK(paper.repetitions == 30);
  CHECK(paper.counts.total() == 540);
  CHECK_THROWS_AS(ExperimentConfig::from_preset("huge"), ConfigError);
}

TEST_CASE("config round-trips through JSON") {
  ExperimentConfig c = ExperimentConfig::paper();
  c.seed = 99;
  c.strategy = Strategy::random;
  c.metric.log_base = LogBase::ten;
  c.metric.common_average_reference = true;
  c.region_index = 0;
  DipoleRegion r = catalog_region(4);
  r.name = "custom";
  c.region_inline = r;
  c.objective = ObjectiveKind::synthetic;
  c.synthetic.noise_sd = 0.25;
  const json j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_from_json(to_json(back)).region().name == "custom");
  CHECK(to_json(config_from_json(to_json(ExperimentConfig::desk()))) == to_json(ExperimentConfig::desk()));
}

TEST_CASE("partial configs inherit the preset and unknown keys are fatal") {
  const auto c = config_from_json(json::parse(R"({"preset": "paper", "seed": 4, "tuner": {"n_min": 7}})"));
  CHECK(c.n_colloc == 300);
  CHECK(c.n_min == 7);
  CHECK(c.seed == 4);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sed": 4})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"tuner": {"jmax": 4}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seed": "four"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"tuner": {"n_min": 50}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"bounds": {"lower": [1.0, 0.2, 1.05, 0.2, 1.05]}})")), ConfigError);
  const fs::path dir = scratch("config");
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_config((dir / "bad.json").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("ledger files replay to the same ledger") {
  const fs::path dir = scratch("ledger");
  const ExperimentConfig c = synthetic_config();
  const TuneOutcome out = run_tune(c, dir / "run.ndjson", false);
  const LedgerFile f = read_ledger(dir / "run.ndjson");
  CHECK(f.ledger == out.result.ledger);
  REQUIRE(f.result.has_value());
  CHECK(f.result->at("best_mean").get<double>() == out.result.best_mean);
  CHECK(f.header.at("format") == kLedgerFormat);
  CHECK(config_from_json(f.header.at("config")).seed == c.seed);
}

TEST_CASE("fixed seeds give byte-identical ledgers") {
  const fs::path dir = scratch("bytes");
  const ExperimentConfig c = synthetic_config();
  run_tune(c, dir / "a.ndjson", false);
  run_tune(c, dir / "b.ndjson", false);
  CHECK(slurp(dir / "a.ndjson") == slurp(dir / "b.ndjson"));
  ExperimentConfig other = c;
  other.seed = 8;
  run_tune(other, dir / "c.ndjson", false);
  CHECK(slurp(dir / "a.ndjson") != slurp(dir / "c.ndjson"));
}

TEST_CASE("resume after a crash reproduces the uninterrupted ledger") {
  const fs::path dir = scratch("resume");
  const ExperimentConfig c = synthetic_config();
  run_tune(c, dir / "full.ndjson", false);
  const std::string full = slurp(dir / "full.ndjson");
  std::vector<std::string> lines;
  std::istringstream in(full);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  for (std::size_t keep : {std::size_t(1), std::size_t(3)}) {
    const fs::path p = dir / ("cut" + std::to_string(keep) + ".ndjson");
    {
      std::ofstream out(p, std::ios::binary);
      for (std::size_t i = 0; i <= keep; ++i) out << lines[i] << "\n";  // header + entries
    }
    const TuneOutcome r = run_tune(c, p, true);
    CHECK(r.resumed);
    CHECK(r.replayed_entries == keep);
    CHECK(slurp(p) == full);
  }
  // A finished ledger resumes to itself.
  const TuneOutcome done = run_tune(c, dir / "full.ndjson", true);
  CHECK(done.resumed);
  CHECK(slurp(dir / "full.ndjson") == full);
}

TEST_CASE("corrupt ledgers are rejected on resume") {
  const fs::path dir = scratch("corrupt");
  const ExperimentConfig c = synthetic_config();
  run_tune(c, dir / "good.ndjson", false);
  const std::string good = slurp(dir / "good.ndjson");

  std::ofstream(dir / "torn.ndjson", std::ios::binary) << good.substr(0, good.size() / 2);
  CHECK_THROWS_AS(run_tune(c, dir / "torn.ndjson", true), ResumeIntegrityError);

  std::ofstream(dir / "garbage.ndjson", std::ios::binary) << "{\"kind\":\"header\"\n";
  CHECK_THROWS_AS(read_ledger(dir / "garbage.ndjson"), ResumeIntegrityError);

  std::string skipped = good;
  const auto first = skipped.find("\"index\":1,");
  REQUIRE(first != std::string::npos);
  skipped.replace(first, 10, "\"index\":5,");
  std::ofstream(dir / "skipped.ndjson", std::ios::binary) << skipped;
  CHECK_THROWS_AS(read_ledger(dir / "skipped.ndjson"), ResumeIntegrityError);

  ExperimentConfig other = c;
  other.seed = 123;
  CHECK_THROWS_AS(run_tune(other, dir / "good.ndjson", true), ResumeIntegrityError);
}

TEST_CASE("dipole noise is standard normal") {
  RngStream rng(1, 0);
  const HeadModel h;
  const DipoleRegion r = catalog_region(1, h);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = dipole_noise(sample_dipole(r, h, rng));
    s += z;
    s2 += z * z;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 4 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1) < 0.05);
}

TEST_CASE("synthetic objective peaks at its centre") {
  const ExperimentConfig c = synthetic_config();
  SyntheticObjective f(c.synthetic, c.bounds);
  const ThetaVector top = f.argmax();
  CHECK(f.value(top) == doctest::Approx(c.synthetic.baseline + c.synthetic.peak_height));
  CHECK(f.value(ThetaVector{1.06, 0.21, 2.4, 0.21, 2.4}) < f.value(top));
}

TEST_CASE("compare emits a table with all four arms") {
  const fs::path dir = scratch("compare");
  const ExperimentConfig c = synthetic_config();
  const auto rows = run_compare(c, dir, 2);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.repetitions == 2);
    CHECK(row.index == 1);
    CHECK(row.comparison.insufficient_n);
  }
  CHECK(rows[0].strategy == Strategy::sko);
  CHECK(rows[1].strategy == Strategy::random);
  for (const char* f : {"report.csv", "report.txt", "report.json"}) CHECK(fs::exists(dir / f));
  const std::string csv = slurp(dir / "report.csv");
  CHECK(csv.rfind("index,strategy,median_q,bonus,p_value,significant\n", 0) == 0);
  for (const char* arm : {"sko-standard", "sko-preemptive", "random-standard", "random-preemptive"})
    CHECK(csv.find(arm) != std::string::npos);
  std::size_t ledgers = 0;
  for (const auto& e : fs::directory_iterator(dir)) ledgers += e.path().extension() == ".ndjson";
  CHECK(ledgers == 8);
  const auto again = build_report(dir);
  CHECK(report_json(again) == report_json(rows));
}

TEST_CASE("single repetition suppresses significance") {
  const fs::path dir = scratch("single");
  ExperimentConfig c = synthetic_config();
  c.repetitions = 1;
  const auto rows = run_compare(c, dir, 1);
  for (const auto& row : rows) {
    CHECK(row.comparison.insufficient_n);
    CHECK_FALSE(row.comparison.significant);
    CHECK(row.comparison.bonus == std::round(row.comparison.bonus));
  }
  const auto j = report_json(rows);
  CHECK(j.at("rows").size() == 2);
}

TEST_CASE("significance marker follows the Mann-Whitney p value") {
  std::vector<RunSummary> a, b;
  std::vector<double> qa, qb;
  for (int i = 0; i < 30; ++i) {
    a.push_back({1.0 + 0.01 * i, 10});
    b.push_back({1.1 + 0.01 * i, 12});
    qa.push_back(a.back().best_q);
    qb.push_back(b.back().best_q);
  }
  std::vector<ReportRow> rows(1);
  rows[0].index = 2;
  rows[0].repetitions = 30;
  rows[0].comparison = compare_strategies(a, b);
  const double p = mann_whitney_u(qb, qa).p_value;
  CHECK(rows[0].comparison.p_value == doctest::Approx(p));
  CHECK(rows[0].comparison.significant == (p < 0.05));
  CHECK(report_text(rows).find('*') != report_text(rows).rfind('*'));  // marked cell plus the legend
  CHECK(report_csv(rows).find(",yes\n") != std::string::npos);

  for (auto& x : b) x.best_q -= 0.1;
  rows[0].comparison = compare_strategies(a, b);
  CHECK_FALSE(rows[0].comparison.significant);
  CHECK(report_csv(rows).find(",no\n") != std::string::npos);
}

TEST_CASE("oracle self checks") {
  const ExperimentConfig c = ExperimentConfig::desk();
  for (const auto& r : oracle_checks(c)) CHECK_MESSAGE(r.passed, r.name);
  ExperimentConfig loose = c;
  loose.oracle_tol = 1e-2;
  bool stability_failed = false;
  for (const auto& r : oracle_checks(loose, 1e-10))
    if (r.name == "truncation-stability") stability_failed = !r.passed;
  CHECK(stability_failed);
  ExperimentConfig uniform = c;
  uniform.head.sigma_skull = uniform.head.sigma_scalp = uniform.head.sigma_brain;
  for (const auto& r : oracle_checks(uniform))
    if (r.name == "homogeneous-reduction") CHECK(r.value < 1e-8);
}
