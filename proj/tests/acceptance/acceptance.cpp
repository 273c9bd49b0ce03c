// Acceptance runner: one PASS/FAIL/SKIP line per criterion. Exits non-zero if
// any criterion fails. Dataset criteria read SURVEYOR_DATASET_DIR and are
// skipped when it is unset.

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "oracles/stats_suite.hpp"
#include "support.hpp"
#include "surveyor/analysis.hpp"
#include "surveyor/cli.hpp"

using namespace surveyor;
namespace sc = surveyor::cli;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

struct Check {
  Outcome out;
  std::ostringstream notes;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      out.status = Status::fail;
      notes << (notes.tellp() > 0 ? "; " : "") << what;
    }
  }
  Outcome finish(const std::string& summary) {
    out.detail = out.status == Status::pass ? summary : notes.str();
    return out;
  }
};

std::string fmt(double v, int places = 4) {
  std::ostringstream s;
  s.precision(places);
  s << std::fixed << v;
  return s.str();
}

Instrument bundled(const std::string& id) { return load_instrument_file(test_support::data_dir() / "instruments" / (id + ".json")); }

nlohmann::json published() {
  return nlohmann::json::parse(io::read_file(test_support::test_dir() / "acceptance" / "published_values.json"));
}

// --------------------------------------------------------------------------

std::vector<PromptExchange> history(const Instrument& ins, const std::vector<std::string>& answers) {
  std::vector<PromptExchange> h;
  for (std::size_t i = 0; i < answers.size(); ++i) h.push_back({ins.items[i].ordinal, ins.items[i].text, answers[i]});
  return h;
}

Outcome golden_prompts() {
  Check c;
  auto golden = [](const std::string& n) { return io::read_file(test_support::test_dir() / "fixtures/golden" / n); };
  const auto hvs = bundled("hvs21"), hex = bundled("hexaco60"), demo = bundled("demographics");
  const std::vector<std::pair<std::string, std::string>> cases{
      {"hvs21_stateless_item01.txt", render_stateless(hvs, hvs.items[0]).text},
      {"hvs21_memory_item03.txt", render_with_memory(hvs, hvs.items[2], history(hvs, {"3", " 5"})).text},
      {"hexaco60_stateless_item52.txt", render_stateless(hex, hex.items[51]).text},
      {"hexaco60_memory_item03.txt", render_with_memory(hex, hex.items[2], history(hex, {"2", "4"})).text},
      {"demographics_stateless_age.txt", render_stateless(demo, demo.items[0]).text},
      {"demographics_memory_gender.txt", render_with_memory(demo, demo.items[1], history(demo, {"33"})).text},
  };
  for (const auto& [file, text] : cases) c.expect(text == golden(file), file + " differs");
  c.expect(render_with_memory(hvs, hvs.items[0], {}).text == render_stateless(hvs, hvs.items[0]).text,
           "empty history does not reduce to stateless");
  return c.finish(std::to_string(cases.size()) + " fixtures byte-identical");
}

Outcome oracle_suite_check() {
  Check c;
  const double ols = oracle_suite::ols_max_error(50);
  const double logit = oracle_suite::logistic_max_error(20);
  const auto cdf = oracle_suite::dist_cdf_check();
  const double manova = oracle_suite::manova_univariate_error(10);
  c.expect(ols < 1e-9, "OLS vs closed form " + std::to_string(ols));
  c.expect(logit < 1e-6, "logistic vs Newton oracle " + std::to_string(logit));
  double worst_cdf = 0;
  for (const auto& kind : {"normal", "student_t", "f"}) {
    const auto n = cdf.points.count(kind) ? cdf.points.at(kind) : 0;
    c.expect(n >= 30, std::string(kind) + " has " + std::to_string(n) + " reference points");
    if (cdf.max_abs_error.count(kind)) {
      worst_cdf = std::max(worst_cdf, cdf.max_abs_error.at(kind));
      c.expect(cdf.max_abs_error.at(kind) < 1e-10, std::string(kind) + " cdf error " + std::to_string(cdf.max_abs_error.at(kind)));
    }
  }
  c.expect(manova < 1e-9, "MANOVA univariate F error " + std::to_string(manova));
  std::ostringstream s;
  s << "ols " << ols << ", logistic " << logit << ", cdf " << worst_cdf << ", manova " << manova;
  return c.finish(s.str());
}

CleanedAnswer likert_answer(const Instrument& ins, const Item& item, int v, int rep) {
  CleanedAnswer a;
  a.raw.instrument_id = ins.id;
  a.raw.item_id = item.id;
  a.raw.temperature = 0.5;
  a.raw.rep = rep;
  a.value = v;
  return a;
}

Outcome scoring_properties() {
  Check c;
  const auto hex = bundled("hexaco60"), hvs = bundled("hvs21");
  for (const auto* ins : {&hex, &hvs})
    for (int v = ins->scale->min; v <= ins->scale->max; ++v)
      c.expect(reverse_key(reverse_key(v, *ins->scale), *ins->scale) == v, ins->id + " reverse key not an involution at " + std::to_string(v));
  c.expect(invert_hvs(1) == 6 && invert_hvs(6) == 1, "HVS inversion does not swap 1 and 6");

  std::vector<CleanedAnswer> mid;
  for (const auto& it : hex.items) mid.push_back(likert_answer(hex, it, 3, 0));
  for (const auto& p : assemble_respondents(mid, hex, PromptMode::stateless, default_policy(hex)))
    for (const auto& [k, s] : p.scores) c.expect(s == 3.0, "midpoint respondent scores " + fmt(s) + " on " + k);

  std::mt19937_64 rng(2024);
  std::bernoulli_distribution missing(0.1);
  std::size_t checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto& ins = rep % 2 ? hvs : hex;
    std::uniform_int_distribution<int> v(ins.scale->min, ins.scale->max);
    std::vector<CleanedAnswer> ans;
    for (const auto& it : ins.items)
      if (!missing(rng)) ans.push_back(likert_answer(ins, it, v(rng), rep));
    for (const auto& p : assemble_respondents(ans, ins, PromptMode::stateless, default_policy(ins)))
      for (const auto& [k, s] : p.scores) {
        if (std::isnan(s)) continue;
        ++checked;
        c.expect(s >= ins.scale->min && s <= ins.scale->max, ins.id + " composite " + fmt(s) + " out of bounds");
      }
  }
  return c.finish("involution, midpoint, inversion, " + std::to_string(checked) + " fuzzed composites in bounds");
}

Outcome pipeline_determinism() {
  Check c;
  const auto dir = fs::temp_directory_path() / "surveyor_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_atomic(dir / "config.json", R"({"instrument": "hexaco60", "mode": "stateless", "temperatures": [0.0, 0.5, 1.0],
    "samples_per_cell": 20, "samples_at_zero": 20, "seed": 1234, "backend": {"kind": "scripted", "parallelism": 4,
      "scripted": {"default": {"mean": 3.4, "sd": 0.9, "slope": 0.2}, "na_rate": 0.02}},
    "analysis": {"rounding": 2}})");
  auto pipeline = [&](const fs::path& out) {
    sc::Options o;
    o.config = dir / "config.json";
    o.out_dir = out;
    for (const auto& r : {sc::cmd_run(o), sc::cmd_parse(o), sc::cmd_score(o), sc::cmd_analyze(out / sc::kProfiles, o),
                          sc::cmd_report(out / sc::kProfiles, o)})
      c.expect(r.exit_code == 0, out.filename().string() + ": " + (r.summary.empty() ? "" : r.summary.back()));
  };
  pipeline(dir / "first");
  pipeline(dir / "second");
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "first")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "first");
    // raw and cleaned logs carry wall-clock timestamps by design
    if (rel == sc::kRaw || rel == sc::kCleaned) continue;
    ++compared;
    c.expect(fs::exists(dir / "second" / rel) && io::read_file(e.path()) == io::read_file(dir / "second" / rel),
             rel.string() + " differs");
  }
  c.expect(fs::exists(dir / "first" / sc::kResults), "no results bundle");
  return c.finish(std::to_string(compared) + " derived files byte-identical, including results.json");
}

// --------------------------------------------------------------------------
// Published dataset

struct Dataset {
  fs::path out;
  std::map<std::string, nlohmann::json> results;  // run name -> results bundle
  std::string error;
};

const Dataset& dataset() {
  static Dataset d = [] {
    Dataset ds;
    const char* env = std::getenv("SURVEYOR_DATASET_DIR");
    if (!env || !*env) return ds;
    ds.out = fs::temp_directory_path() / "surveyor_acceptance_dataset";
    fs::remove_all(ds.out);
    sc::Options o;
    o.out_dir = ds.out;
    const auto ing = sc::cmd_ingest(env, o);
    if (ing.exit_code != 0) {
      ds.error = "ingest failed: " + (ing.summary.empty() ? std::string() : ing.summary.back());
      return ds;
    }
    for (const auto& e : fs::directory_iterator(ds.out)) {
      if (!e.is_directory()) continue;
      sc::Options r;
      r.out_dir = e.path();
      for (const auto& step : {sc::cmd_parse(r), sc::cmd_score(r), sc::cmd_analyze(sc::default_profiles(r), r)})
        if (step.exit_code != 0) ds.error += e.path().filename().string() + ": " + step.summary.back() + "; ";
      if (fs::exists(e.path() / sc::kResults))
        ds.results[e.path().filename().string()] = nlohmann::json::parse(io::read_file(e.path() / sc::kResults));
    }
    return ds;
  }();
  return d;
}

bool dataset_available() {
  const char* env = std::getenv("SURVEYOR_DATASET_DIR");
  return env && *env;
}

const nlohmann::json* total_row(const nlohmann::json& results, const std::string& table) {
  if (!results.contains(table)) return nullptr;
  for (const auto& r : results[table]["rows"])
    if (r["temperature"] == "Total") return &r;
  return nullptr;
}

void check_totals(Check& c, const std::string& run, const nlohmann::json& expected, double tol) {
  const auto& ds = dataset();
  if (!ds.results.count(run)) {
    c.expect(false, run + " not found in dataset");
    return;
  }
  const auto& res = ds.results.at(run);
  const auto id = res["instrument"].get<std::string>();
  const auto* row = total_row(res, id + "_by_temperature");
  if (!row) {
    c.expect(false, run + ": no Total row");
    return;
  }
  for (const auto& [k, v] : expected.items()) {
    const auto& m = (*row)["constructs"][k]["mean"];
    c.expect(m.is_number() && std::fabs(m.get<double>() - v.get<double>()) <= tol + 1e-9,
             run + " " + k + " total " + (m.is_number() ? fmt(m.get<double>(), 3) : "NA") + " vs " + fmt(v.get<double>(), 2));
  }
}

Outcome dataset_reproduction() {
  if (!dataset_available()) return {Status::skip, "SURVEYOR_DATASET_DIR not set"};
  Check c;
  const auto& ds = dataset();
  c.expect(ds.error.empty(), ds.error);
  const auto pub = published();
  const double tol = pub["totals_tolerance"];
  if (ds.results.count("demographics_stateless")) {
    const auto& res = ds.results.at("demographics_stateless");
    const auto* row = total_row(res, "demographics_by_temperature");
    const auto& d = pub["demographics"];
    auto near = [&](const nlohmann::json& got, const nlohmann::json& want, const std::string& what) {
      c.expect(got.is_number() && std::fabs(got.get<double>() - want[0].get<double>()) <= want[1].get<double>() + 1e-12,
               what + " " + (got.is_number() ? fmt(got.get<double>()) : "NA") + " vs " + fmt(want[0].get<double>()));
    };
    if (row) {
      near((*row)["age"]["mean"], d["age_mean"], "age mean");
      near((*row)["age"]["sd"], d["age_sd"], "age sd");
      near((*row)["p_female"], d["female_share"], "female share");
    } else {
      c.expect(false, "demographics: no Total row");
    }
    const auto& models = res["demographics_regressions"]["models"];
    near(models["age ~ temperature"]["terms"]["temperature"]["estimate"], d["age_slope"], "age slope");
    near(models["non_female ~ temperature"]["odds_ratio_temperature"], d["nonfemale_odds_ratio"], "odds ratio");
  } else {
    c.expect(false, "demographics_stateless not found in dataset");
  }
  check_totals(c, "hexaco60_stateless", pub["hexaco60_stateless"], tol);
  check_totals(c, "hvs21_stateless", pub["hvs21_stateless"], tol);
  check_totals(c, "hvs21_memory", pub["hvs21_memory"], tol);
  return c.finish("demographics, slopes and Total rows within tolerance");
}

Outcome approximate_reproduction() {
  if (!dataset_available()) return {Status::skip, "SURVEYOR_DATASET_DIR not set"};
  Check c;
  const auto& ds = dataset();
  const auto pub = published();
  if (!ds.results.count("hexaco60_stateless")) return {Status::fail, "hexaco60_stateless not found in dataset"};
  const auto& res = ds.results.at("hexaco60_stateless");
  const double target = pub["hexaco60_manova_f"][0], rel = pub["hexaco60_manova_f"][1];
  const auto& f = res["hexaco60_manova"]["f_approx"];
  c.expect(f.is_number() && std::fabs(f.get<double>() - target) <= rel * target,
           "MANOVA F " + (f.is_number() ? fmt(f.get<double>(), 3) : "NA") + " not within 15% of " + fmt(target, 3));
  const auto& models = res["hexaco60_regressions"]["models"];
  for (const auto& [k, sign] : pub["hexaco60_slope_signs"].items()) {
    const double b = models[k]["terms"]["temperature"]["estimate"];
    c.expect(b * sign.get<int>() > 0, k + " slope " + fmt(b, 3) + " has the wrong sign");
  }
  for (const auto& k : pub["hexaco60_nonsignificant_at_01"]) {
    const auto& p = models[k.get<std::string>()]["terms"]["temperature"]["p"];
    c.expect(!p.is_number() || p.get<double>() >= 0.01, k.get<std::string>() + " slope significant at .01");
  }
  return c.finish("MANOVA F " + (f.is_number() ? fmt(f.get<double>(), 3) : "NA") + ", slope signs match");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {1, "golden prompts", 1.0, golden_prompts},
      {2, "statistics oracle suite", 10.0, oracle_suite_check},
      {3, "scoring properties", 5.0, scoring_properties},
      {4, "pipeline determinism", 30.0, pipeline_determinism},
      {5, "dataset reproduction", 60.0, dataset_reproduction},
      {6, "approximate reproduction", 60.0, approximate_reproduction},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.fn();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.status == Status::pass && secs > cr.budget_seconds) {
      o.status = Status::fail;
      o.detail = "took " + fmt(secs, 2) + " s, budget " + fmt(cr.budget_seconds, 0) + " s";
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::skip ? "SKIP" : "FAIL";
    std::cout << tag << "  " << cr.id << ". " << cr.name << " (" << fmt(secs, 2) << " s): " << o.detail << '\n';
    failed += o.status == Status::fail;
  }
  return failed ? 1 : 0;
}
