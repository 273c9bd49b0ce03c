#include <catch_amalgamated.hpp>

#include <random>

#include "support.hpp"
#include "surveyor/analysis.hpp"
#include "surveyor/report.hpp"

using namespace surveyor;
using Catch::Approx;

namespace {

ProfilesTable make_profiles(const std::vector<std::string>& constructs,
                            const std::vector<std::tuple<double, int, std::vector<double>>>& rows) {
  ProfilesTable p;
  p.instrument_id = "toy";
  p.constructs = constructs;
  for (const auto& [t, rep, scores] : rows) {
    RespondentProfile r;
    r.instrument_id = "toy";
    r.temperature = t;
    r.rep = rep;
    for (std::size_t i = 0; i < constructs.size(); ++i) {
      r.scores[constructs[i]] = scores[i];
      r.answered[constructs[i]] = 1;
    }
    p.profiles.push_back(r);
  }
  return p;
}

stats::CorrelationMatrix matrix_2x2(double r, double p) {
  stats::CorrelationMatrix m;
  m.labels = {"H", "C"};
  m.r.resize(2, 2);
  m.r << 0.5, r, r, 0.4;
  m.p.resize(2, 2);
  m.p << stats::kNA, p, p, stats::kNA;
  m.n.resize(2, 2);
  m.n << 100, 100, 100, 100;
  return m;
}

}  // namespace

TEST_CASE("half-even rounding at render time") {
  CHECK(round_half_even(2.675, 2) == Approx(2.68));
  CHECK(round_half_even(2.665, 2) == Approx(2.66));
  CHECK(round_half_even(0.125, 2) == Approx(0.12));
  CHECK(round_half_even(0.135, 2) == Approx(0.14));
  CHECK(round_half_even(2.5, 0) == 2.0);
  CHECK(round_half_even(3.5, 0) == 4.0);
  CHECK(round_half_even(-2.5, 0) == -2.0);
  CHECK(round_half_even(1.2345678, 2) == Approx(1.23));
}

TEST_CASE("number styles") {
  CHECK(format_number(3.7, 2) == "3.70");
  CHECK(format_number(-0.0001, 2) == "0.00");
  CHECK(format_number(stats::kNA, 2) == "NA");
  CHECK(format_number(5.0, 2, NumberStyle::shortest) == "5.0");
  CHECK(format_number(4.9912, 2, NumberStyle::shortest) == "4.99");
  CHECK(format_number(0.1004, 2, NumberStyle::shortest) == "0.1");
  CHECK(format_number(5.333333, 2, NumberStyle::shortest) == "5.33");
  CHECK(format_temperature(0.0) == "0.0");
  CHECK(format_temperature(0.1) == "0.1");
  CHECK(format_temperature(1.0) == "1.0");
}

TEST_CASE("mean (sd) cells") {
  TableSpec spec;
  spec.number_style = NumberStyle::shortest;
  stats::DescriptiveStats d;
  d.mean = 4.99;
  d.sd = 0.1;
  CHECK(mean_sd_cell(d, spec) == "4.99 (0.1)");
  d.mean = 6.0;
  d.sd = 0.0;
  CHECK(mean_sd_cell(d, spec) == "6.0 (0.0)");
  d.sd.reset();
  CHECK(mean_sd_cell(d, spec) == "6.0");
  spec.number_style = NumberStyle::fixed;
  d.mean = 3.7512;
  d.sd = 0.1749;
  CHECK(mean_sd_cell(d, spec) == "3.75 (0.17)");
}

TEST_CASE("table by temperature") {
  const auto p = make_profiles({"A", "B"}, {{0.0, 0, {3, 4}}, {0.5, 0, {2, 5}}, {0.5, 1, {4, 5}}});
  TableSpec spec;
  const auto t = table_by_temperature(p, spec);
  REQUIRE(t.markdown.rows.size() == 3);
  CHECK(t.markdown.header == std::vector<std::string>{"Temp.", "A", "B", "n"});
  CHECK(t.markdown.rows[0] == std::vector<std::string>{"0.0", "3.00", "4.00", "1"});
  CHECK(t.markdown.rows[1] == std::vector<std::string>{"0.5", "3.00 (1.41)", "5.00 (0.00)", "2"});
  CHECK(t.markdown.rows[2][0] == "Total");
  CHECK(t.markdown.rows[2][1] == "3.00 (1.00)");
  CHECK(t.csv.header == std::vector<std::string>{"temperature", "n", "A_mean", "A_sd", "B_mean", "B_sd"});
  CHECK(t.csv.rows[0] == std::vector<std::string>{"0.0", "1", "3.00", "NA", "4.00", "NA"});

  SECTION("single respondent") {
    const auto one = make_profiles({"A"}, {{0.0, 0, {2.5}}});
    const auto s = table_by_temperature(one, spec);
    REQUIRE(s.markdown.rows.size() == 1);
    CHECK(s.markdown.rows[0][1] == "2.50");
  }
  SECTION("baseline rows") {
    BaselineTable b{"college-male", "college", {{"A", {3.1, 0.7}}, {"B", {2.0, 0.5}}}};
    spec.include_baselines = true;
    const auto s = table_by_temperature(p, spec, {b});
    REQUIRE(s.markdown.rows.size() == 4);
    CHECK(s.markdown.rows[3] == std::vector<std::string>{"college-male", "3.10 (0.70)", "2.00 (0.50)", ""});
  }
  SECTION("empty profiles") {
    ProfilesTable empty;
    CHECK_THROWS_AS(table_by_temperature(empty, spec), InsufficientDataError);
  }
}

TEST_CASE("csv and markdown rendering") {
  Table t{"x", "Title", {"a", "b"}, {{"1,5", "say \"hi\""}, {"p|q", ""}}};
  CHECK(to_csv(t) == "a,b\r\n\"1,5\",\"say \"\"hi\"\"\"\r\np|q,\r\n");
  CHECK(to_markdown(t) == "### Title\n\n| a | b |\n|---|---|\n| 1,5 | say \"hi\" |\n| p\\|q |  |\n");
  CHECK(to_csv(t) == to_csv(t));
}

TEST_CASE("correlation table") {
  TableSpec spec;
  spec.instrument_id = "hexaco60";
  const auto m = matrix_2x2(-0.1312, 0.004);

  SECTION("no reference leaves the upper triangle blank") {
    const auto t = correlation_table(m, std::nullopt, spec);
    REQUIRE(t.markdown.rows.size() == 2);
    CHECK(t.markdown.rows[0] == std::vector<std::string>{"H", "0.50", ""});
    CHECK(t.markdown.rows[1] == std::vector<std::string>{"C", "-0.13**", "0.40"});
    REQUIRE(t.csv.rows.size() == 3);
    CHECK(t.csv.rows[1][0] == "C");
    CHECK(t.csv.rows[1][2] == "-0.13");
    CHECK(t.csv.rows[1][4] == "**");
  }
  SECTION("reference values verbatim") {
    ReferenceCorrelations ref;
    ref.source = "human";
    ref.labels = {"H", "C"};
    ref.upper[{"H", "C"}] = "0.18, 0.13";
    const auto t = correlation_table(m, ref, spec);
    CHECK(t.markdown.rows[0][2] == "0.18, 0.13");
    CHECK(t.csv.rows[1][6] == "0.18, 0.13");
  }
  SECTION("label mismatch names the constructs") {
    ReferenceCorrelations ref;
    ref.labels = {"H", "X"};
    try {
      correlation_table(m, ref, spec);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("C") != std::string::npos);
      CHECK(msg.find("X") != std::string::npos);
    }
  }
  SECTION("seeded toy sample has one starred cell") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    Eigen::MatrixXd y(60, 2);
    for (int i = 0; i < 60; ++i) {
      y(i, 0) = z(rng);
      y(i, 1) = y(i, 0) + 0.5 * z(rng);
    }
    const auto cm = stats::pearson_matrix(y, {"A", "B"});
    const auto t = correlation_table(cm, std::nullopt, spec);
    int starred = 0;
    for (const auto& row : t.markdown.rows)
      for (const auto& c : row) starred += c.find('*') != std::string::npos;
    CHECK(starred == 1);
    CHECK(t.markdown.rows[1][1].ends_with("***"));
  }
}

TEST_CASE("baseline comparison") {
  SECTION("identical means give zero gaps") {
    const auto p = make_profiles({"A", "B"}, {{0.5, 0, {3, 2}}, {0.5, 1, {3, 2}}});
    BaselineTable b{"s", "", {{"A", {3, 1}}, {"B", {2, 0.5}}}};
    const auto cmp = compare_to_baseline(p, {b});
    REQUIRE(cmp.rows.size() == 2);
    for (const auto& r : cmp.rows) CHECK(*r.standardized_gap == 0.0);
  }
  SECTION("zero baseline sd leaves the gap absent") {
    const auto p = make_profiles({"A"}, {{0.5, 0, {3}}});
    const auto cmp = compare_to_baseline(p, {BaselineTable{"s", "", {{"A", {3, 0}}}}});
    CHECK_FALSE(cmp.rows[0].standardized_gap.has_value());
  }
  SECTION("standardized gap arithmetic against HS-global conformity") {
    const auto ins = load_instrument_file(test_support::data_dir() / "instruments" / "hvs21.json");
    const auto baselines = load_baselines_file(test_support::data_dir() / "baselines" / "hvs21_baselines.json", ins);
    std::vector<std::tuple<double, int, std::vector<double>>> rows;
    std::vector<double> scores(ins.constructs.size(), 4.0);
    for (std::size_t i = 0; i < ins.constructs.size(); ++i)
      if (ins.constructs[i] == "CON") scores[i] = 2.17;
    rows.push_back({0.5, 0, scores});
    std::vector<std::string> ids;
    ids = ins.constructs;
    const auto cmp = compare_to_baseline(make_profiles(ids, rows), baselines);
    bool found = false;
    for (const auto& r : cmp.rows)
      if (r.construct == "CON" && r.source == "HS-global") {
        found = true;
        CHECK(*r.standardized_gap == Approx((2.17 - 4.19) / 1.09));
        CHECK(*r.standardized_gap == Approx(-1.85).margin(0.005));
      }
    CHECK(found);
  }
  SECTION("ranges of means per source and pooled per group") {
    const auto ins = load_instrument_file(test_support::data_dir() / "instruments" / "hexaco60.json");
    const auto baselines = load_baselines_file(test_support::data_dir() / "baselines" / "hexaco60_baselines.json", ins);
    const auto p = make_profiles({"H", "E", "X", "A", "C", "O"}, {{0.5, 0, {3.75, 3.02, 3.5, 3.4, 3.6, 3.3}}});
    const auto cmp = compare_to_baseline(p, baselines);
    std::map<std::string, double> ranges;
    for (const auto& r : cmp.ranges) ranges[r.label] = r.range;
    CHECK(ranges.at("model") == Approx(0.73));
    CHECK(ranges.at("college") == Approx(0.71));
    CHECK(ranges.at("community") == Approx(1.11));
    CHECK(cmp.rows.size() == 6 * baselines.size());
  }
}

TEST_CASE("demographics table") {
  std::vector<DemographicRecord> recs{{0.0, 0, 33, "female"}};
  for (int i = 0; i < 4; ++i) recs.push_back({0.5, i, 20.0 + i * 2, i % 2 ? "male" : "female"});
  recs.push_back({0.5, 4, stats::kNA, ""});
  TableSpec spec;
  spec.instrument_id = "demographics";
  const auto t = demographics_table(recs, spec);
  REQUIRE(t.csv.rows.size() == 3);
  CHECK(t.csv.rows[0] == std::vector<std::string>{"0.0", "33.00", "NA", "33", "33", "33", "1", "1.00"});
  CHECK(t.csv.rows[1][1] == "23.00");
  CHECK(t.csv.rows[1][3] == "23");  // median of 20,22,24,26
  CHECK(t.csv.rows[1][6] == "5");
  CHECK(t.csv.rows[1][7] == "0.50");
  CHECK(t.csv.rows[2][0] == "Total");
}

TEST_CASE("regression summary") {
  Eigen::VectorXd y(5);
  y << 1, 2, 2.9, 4.2, 5;
  Eigen::MatrixXd x(5, 2);
  x << 1, 0, 1, 1, 1, 2, 1, 3, 1, 4;
  stats::Design d{x, {"(Intercept)", "temperature"}};
  std::vector<NamedFit> fits{{"A", stats::ols(y, d), ""}, {"B", std::nullopt, "singular"}};
  TableSpec spec;
  const auto t = regression_table(fits, spec, "toy_regressions", "t");
  REQUIRE(t.csv.rows.size() == 3);
  CHECK(t.csv.rows[1][1] == "temperature");
  CHECK(t.csv.rows[1][2] == "1.02");
  CHECK(t.csv.rows[1][6] == "***");
  CHECK(t.csv.rows[2][0] == "B");
  CHECK(t.markdown.rows[2][1] == "singular");
}

TEST_CASE("analysis battery") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::vector<std::tuple<double, int, std::vector<double>>> rows;
  for (double t : {0.25, 0.5, 0.75, 1.0})
    for (int r = 0; r < 40; ++r) rows.push_back({t, r, {3 + 0.3 * z(rng), 3 + 0.3 * z(rng), 3 + 0.3 * z(rng)}});
  const auto p = make_profiles({"A", "B", "C"}, rows);
  AnalysisInputs in;
  in.manifest_sha256 = "abc";
  const auto res = analyze_profiles(p, in);
  CHECK(res.bundle["manifest_sha256"] == "abc");
  CHECK(res.bundle.contains("toy_by_temperature"));
  CHECK(res.bundle.contains("toy_regressions"));
  CHECK(res.bundle.contains("toy_manova"));
  CHECK(res.bundle.contains("toy_correlations"));
  CHECK_FALSE(res.bundle.contains("toy_baseline_comparison"));
  for (const auto& c : {"A", "B", "C"}) {
    const double slope = res.bundle["toy_regressions"]["models"][c]["terms"]["temperature"]["estimate"];
    CHECK(std::fabs(slope) < 0.3);
  }
  CHECK(res.bundle["toy_manova"]["p"].get<double>() > 0.05);
  CHECK(res.bundle.dump() == analyze_profiles(p, in).bundle.dump());

  SECTION("degenerate data becomes a warning") {
    const auto flat = make_profiles({"A", "B"}, {{0.5, 0, {3, 3}}, {1.0, 0, {3, 3}}, {0.5, 1, {3, 3}}, {1.0, 1, {3, 3}}});
    const auto r = analyze_profiles(flat, in);
    CHECK_FALSE(r.warnings.empty());
    CHECK(r.bundle["toy_manova"].contains("error"));
  }
}

TEST_CASE("demographics battery") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  std::vector<DemographicRecord> recs;
  for (double t : {0.2, 0.4, 0.6, 0.8, 1.0})
    for (int r = 0; r < 100; ++r) {
      const bool female = u(rng) < 0.8 - 0.4 * t;
      recs.push_back({t, r, 33 - 6 * t + 2 * z(rng), female ? "female" : "male"});
    }
  const auto res = analyze_demographics(recs, "demographics", {});
  const auto& m = res.bundle["demographics_regressions"]["models"];
  CHECK(m["age ~ temperature"]["terms"]["temperature"]["estimate"].get<double>() == Approx(-6).margin(1));
  const double beta = m["non_female ~ temperature"]["terms"]["temperature"]["estimate"];
  CHECK(beta > 0);
  CHECK(m["non_female ~ temperature"]["odds_ratio_temperature"].get<double>() == Approx(std::exp(beta)));
  CHECK(m["age ~ temperature * female"]["terms"].contains("temperature:female"));
}
