#include <cmath>
#include <sstream>

#include "doctest.h"
#include "vbmdd/error.hpp"
#include "vbmdd/harness/config.hpp"
#include "vbmdd/harness/experiment.hpp"
#include "vbmdd/harness/ingest.hpp"
#include "vbmdd/harness/output.hpp"

using namespace vbmdd;

namespace {

ExperimentConfig small_var_config() {
  ExperimentConfig c;
  c.model = "var-conjugate";
  c.synth.N = 2;
  c.synth.T = 60;
  c.draws = 1000;
  c.burn_in = 100;
  c.repetitions = 6;
  c.estimators = {"ris-vb", "bs-vb", "is-vb", "ris-pmd"};
  c.draws_is = 1000;
  c.threads = 3;
  return c;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config file grammar and round trip") {
  const ExperimentConfig c = parse_config(
      "# conjugate VAR\n"
      "model = var-independent\n"
      "estimators = ris-vb, bs-vb , chib  # trailing comment\n"
      "repetitions = 7\n"
      "upper_bound = -3.5\n"
      "synth.T = 44\n"
      "formats = csv\n");
  CHECK(c.model == "var-independent");
  CHECK(c.estimators == std::vector<std::string>{"ris-vb", "bs-vb", "chib"});
  CHECK(c.repetitions == 7);
  CHECK(*c.upper_bound == -3.5);
  CHECK(c.synth.T == 44);
  CHECK(format_config(parse_config(format_config(c))) == format_config(c));

  CHECK_THROWS_AS(parse_config("colour = blue\n"), ModelConfigError);
  CHECK_THROWS_AS(parse_config("draws = many\n"), ModelConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ModelConfigError);
  ExperimentConfig bad;
  bad.estimators = {"ris-vb", "magic"};
  CHECK_THROWS_AS(bad.validate(), ModelConfigError);
  bad.estimators = {"ris-vb"};
  bad.repetitions = 0;
  CHECK_THROWS_AS(bad.validate(), ModelConfigError);
}

TEST_CASE("var csv ingestion consumes presample rows and skips a date column") {
  std::ostringstream os;
  os << "date,a,b,c,d,e,f,g\n";
  for (int t = 0; t < 200; ++t) {
    os << 1960 + t / 4 << "-" << (t % 4) * 3 + 1 << (t % 4 == 3 ? "0" : "") << "-01";
    for (int j = 0; j < 7; ++j) os << "," << std::sin(0.1 * t + j);
    os << "\n";
  }
  const VarData d = ingest_var_csv(parse_csv(os.str()), 4);
  CHECK(d.N() == 7);
  CHECK(d.T() == 196);
  CHECK(d.K() == 29);
  CHECK(d.Y(0, 0) == doctest::Approx(std::sin(0.4)));

  const VarData back = ingest_var_csv(parse_csv(var_to_csv(d)), 4);
  CHECK(back.Y.isApprox(d.Y));
  CHECK(back.X.isApprox(d.X));

  try {
    ingest_var_csv(parse_csv("a,b\n1,2\n3,x\n4,5\n"), 1);
    FAIL("expected an error");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("row 3, column 'b'") != std::string::npos);
  }
}

TEST_CASE("sfm csv ingestion enforces a balanced panel") {
  const std::string ok =
      "firm_id,period,y,x1\n"
      "f1,1,1.0,0.5\nf1,2,1.1,0.6\nf2,2,0.9,0.2\nf2,1,0.8,0.1\n";
  const SfmData d = ingest_sfm_csv(parse_csv(ok), -1);
  CHECK(d.N == 2);
  CHECK(d.T == 2);
  CHECK(d.y(2) == 0.8);  // rows are sorted by period within a firm
  CHECK_THROWS_AS(ingest_sfm_csv(parse_csv("firm_id,period,y,x1\nf1,1,1,0\nf1,2,1,0\nf2,1,1,0\n"), -1),
                  ArgumentError);
  CHECK_THROWS_AS(ingest_sfm_csv(parse_csv("firm,period,y,x1\nf1,1,1,0\n"), -1), ArgumentError);
}

TEST_CASE("lpm csv ingestion applies default offsets and random-effect columns") {
  const std::string text =
      "subject_id,period,count,x1\n"
      "s1,0,3,0.1\ns1,1,1,0.2\ns2,0,5,-0.1\ns2,1,0,0.0\n";
  const LpmData d = ingest_lpm_csv(parse_csv(text));
  CHECK(d.N == 2);
  CHECK(d.m() == 1);
  CHECK(d.a(0) == doctest::Approx(std::log(8.0)));
  CHECK(d.a(1) == doctest::Approx(std::log(2.0)));
  const LpmData back = ingest_lpm_csv(parse_csv(lpm_to_csv(d)));
  CHECK(back.y == d.y);
  CHECK(back.a.isApprox(d.a));
  CHECK_THROWS_AS(ingest_lpm_csv(parse_csv("subject_id,period,count,x1\ns1,0,2.5,0\n")), ArgumentError);
}

TEST_CASE("experiment with one repetition flags the missing NSE") {
  ExperimentConfig c;
  c.model = "toy";
  c.repetitions = 1;
  c.draws = 500;
  c.estimators = {"ris-vb"};
  const ResultsTable t = run_experiment(c);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].succeeded == 1);
  CHECK(std::isnan(t.rows[0].nse));
  const std::string csv = table_to_csv(t);
  CHECK(csv.find("NSE needs 2+ repetitions") != std::string::npos);
  CHECK(csv.find("benchmark:exact") != std::string::npos);
}

TEST_CASE("experiment is deterministic and the estimates sit near the exact value") {
  const ExperimentConfig c = small_var_config();
  const ResultsTable a = run_experiment(c);
  ExperimentConfig c1 = c;
  c1.threads = 1;
  const ResultsTable b = run_experiment(c1);
  CHECK(table_to_csv(a) == table_to_csv(b));
  CHECK(table_to_json(a).dump() == table_to_json(b).dump());
  CHECK(scatter_to_csv(a) == scatter_to_csv(b));
  REQUIRE(a.benchmarks.front().name == "exact");
  const double exact = a.benchmarks.front().value;
  for (const auto& row : a.rows) {
    INFO(row.method << " mean " << row.mean << " nse " << row.nse << " exact " << exact);
    CHECK(row.failed == 0);
    CHECK(std::abs(row.mean - exact) < 3.0 * row.nse / std::sqrt(6.0) + 0.02);
  }
  CHECK(a.failed_cells() == 0);
}

TEST_CASE("changing the estimator list leaves the retained estimates unchanged") {
  ExperimentConfig c = small_var_config();
  c.repetitions = 3;
  const ResultsTable full = run_experiment(c);
  c.estimators = {"bs-vb"};
  const ResultsTable one = run_experiment(c);
  for (int r = 0; r < 3; ++r) CHECK(one.cells[0][r].value == full.cells[1][r].value);
}

TEST_CASE("outputs: json round trip, scatter shape, svg points and failed cells") {
  ExperimentConfig c;
  c.model = "sfm-gamma";
  c.synth.N = 10;
  c.synth.T = 3;
  c.draws = 300;
  c.burn_in = 100;
  c.repetitions = 2;
  c.estimators = {"ris-vb", "chib"};
  const ResultsTable t = run_experiment(c);
  CHECK(t.rows[0].failed == 0);
  CHECK(t.rows[1].failed == 2);
  CHECK(t.failed_cells() == 2);
  CHECK(table_to_csv(t).find("FAILED(") != std::string::npos);
  const std::string scatter = scatter_to_csv(t);
  CHECK(count(scatter, "\n") == 1 + 2 * 2);
  CHECK(count(scatter, "FAILED(") == 2);

  const nlohmann::json doc = table_to_json(t);
  CHECK(doc.at("schema_version") == 1);
  CHECK(table_to_json(table_from_json(nlohmann::json::parse(doc.dump()))).dump() == doc.dump());

  const ResultsTable v = run_experiment(small_var_config());
  CHECK(count(scatter_to_svg(v), "<circle") == 6 * 4);
}

TEST_CASE("synthetic csv round trips through ingestion for every family") {
  for (const char* model : {"var-conjugate", "sfm-exp", "lpm"}) {
    ExperimentConfig c;
    c.model = model;
    c.synth.N = 5;
    c.synth.T = 6;
    const std::string csv = synthetic_csv(c);
    CHECK(csv == synthetic_csv(c));
    CHECK(csv.size() > 20);
  }
  ExperimentConfig c;
  c.model = "sfm-exp";
  c.synth.N = 4;
  c.synth.T = 3;
  const SfmData d = ingest_sfm_csv(parse_csv(synthetic_csv(c)), -1);
  CHECK(d.N == 4);
  CHECK(d.T == 3);
  CHECK(d.k() == 2);
}
