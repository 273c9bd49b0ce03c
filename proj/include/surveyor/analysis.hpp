#pragma once

// The analysis battery over a profiles (or demographics) file: descriptives by
// temperature, per-construct slopes on temperature, MANOVA, correlations,
// baseline comparison; for demographics, age and gender models.
//
// Output is a results bundle (JSON, unrounded numbers, keyed by table id) and
// the rendered tables. Degenerate or undersized data becomes a warning, not an
// abort.

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "surveyor/config.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/report.hpp"
#include "surveyor/score.hpp"
#include "surveyor/stats.hpp"

namespace surveyor {

using ojson = nlohmann::ordered_json;

struct AnalysisInputs {
  std::vector<BaselineTable> baselines;
  std::optional<ReferenceCorrelations> reference;
  int rounding = 2;
  NumberStyle number_style = NumberStyle::fixed;
  std::string manifest_sha256;  // empty when unknown
};

struct AnalysisResult {
  ojson bundle;
  std::vector<RenderedTable> tables;
  std::vector<std::string> warnings;
};

namespace detail {

inline ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
inline ojson num(const std::optional<double>& v) { return v ? num(*v) : ojson(nullptr); }

inline ojson to_json(const stats::DescriptiveStats& d) {
  return {{"n", d.n}, {"mean", num(d.mean)}, {"sd", num(d.sd)}, {"median", num(d.median)}, {"min", num(d.min)}, {"max", num(d.max)}};
}

inline ojson to_json(const stats::RegressionResult& r) {
  ojson j;
  j["n"] = r.n;
  j["df_resid"] = r.df_resid;
  ojson terms = ojson::object();
  for (std::size_t k = 0; k < r.terms.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    terms[r.terms[k]] = {{"estimate", num(r.coef(i))}, {"se", num(r.se(i))}, {"statistic", num(r.stat(i))}, {"p", num(r.p(i))}};
  }
  j["terms"] = terms;
  if (r.r_squared) j["r_squared"] = num(r.r_squared);
  if (r.f_statistic) j["f"] = {{"statistic", num(r.f_statistic)}, {"df1", num(r.f_df1)}, {"df2", num(r.f_df2)}, {"p", num(r.f_p)}};
  if (r.iterations > 0) {
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
  }
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

inline ojson to_json(const stats::ManovaResult& m) {
  return {{"wilks_lambda", num(m.wilks_lambda)},
          {"f_approx", num(m.f_approx)},
          {"df1", num(m.df1)},
          {"df2", num(m.df2)},
          {"p", num(m.p)},
          {"pillai", num(m.pillai)},
          {"pillai_f", num(m.pillai_f)},
          {"pillai_df1", num(m.pillai_df1)},
          {"pillai_df2", num(m.pillai_df2)},
          {"pillai_p", num(m.pillai_p)},
          {"n", m.n},
          {"dependents", m.dependents},
          {"dropped_columns", m.dropped_columns},
          {"warnings", m.warnings}};
}

inline ojson to_json(const stats::CorrelationMatrix& m) {
  ojson r = ojson::array(), p = ojson::array(), n = ojson::array();
  for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
    ojson rr = ojson::array(), pr = ojson::array(), nr = ojson::array();
    for (Eigen::Index j = 0; j < m.r.cols(); ++j) {
      rr.push_back(num(m.r(i, j)));
      pr.push_back(num(m.p(i, j)));
      nr.push_back(m.n(i, j));
    }
    r.push_back(rr);
    p.push_back(pr);
    n.push_back(nr);
  }
  return {{"labels", m.labels}, {"r", r}, {"p", p}, {"n", n}};
}

inline ojson temperature_json(const std::optional<double>& t) { return t ? ojson(*t) : ojson("Total"); }

inline ojson table_json(const RenderedTable& t) { return {{"header", t.csv.header}, {"rows", t.csv.rows}}; }

/// Drops rows where y or any predictor is NA.
inline std::pair<Eigen::VectorXd, stats::Design> complete_cases(const std::vector<double>& y,
                                                                const std::vector<std::vector<double>>& xs,
                                                                const std::vector<std::string>& names) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < y.size(); ++i) {
    bool ok = std::isfinite(y[i]);
    for (const auto& x : xs) ok = ok && std::isfinite(x[i]);
    if (ok) keep.push_back(i);
  }
  Eigen::VectorXd yy(static_cast<Eigen::Index>(keep.size()));
  std::vector<std::vector<double>> cols(xs.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    yy(static_cast<Eigen::Index>(k)) = y[keep[k]];
    for (std::size_t c = 0; c < xs.size(); ++c) cols[c].push_back(xs[c][keep[k]]);
  }
  std::vector<std::span<const double>> spans(cols.begin(), cols.end());
  return {yy, stats::design_with_intercept(spans, names)};
}

template <typename Fit>
NamedFit try_fit(const std::string& label, std::vector<std::string>& warnings, Fit&& fit) {
  NamedFit f;
  f.label = label;
  try {
    f.fit = fit();
    for (const auto& w : f.fit->warnings) warnings.push_back(label + ": " + w);
  } catch (const Error& e) {
    f.error = e.what();
    warnings.push_back(label + ": " + e.what());
  }
  return f;
}

inline void add_table(AnalysisResult& out, RenderedTable t, ojson data) {
  data["table"] = table_json(t);
  out.bundle[t.csv.id] = std::move(data);
  out.tables.push_back(std::move(t));
}

inline ojson header(const std::string& instrument_id, const AnalysisInputs& in) {
  ojson b;
  b["manifest_sha256"] = in.manifest_sha256.empty() ? ojson(nullptr) : ojson(in.manifest_sha256);
  b["code_version"] = SURVEYOR_VERSION;
  b["instrument"] = instrument_id;
  b["rounding"] = in.rounding;
  return b;
}

}  // namespace detail

inline AnalysisResult analyze_profiles(const ProfilesTable& p, const AnalysisInputs& in) {
  AnalysisResult out;
  out.bundle = detail::header(p.instrument_id, in);
  TableSpec spec;
  spec.instrument_id = p.instrument_id;
  spec.rounding = in.rounding;
  spec.number_style = in.number_style;
  spec.include_baselines = !in.baselines.empty();

  // Descriptives
  const auto summary = summarize_by_temperature(p);
  {
    ojson rows = ojson::array();
    auto add = [&](const TemperatureBlock& b) {
      ojson c = ojson::object();
      for (const auto& k : summary.constructs) c[k] = detail::to_json(b.constructs.at(k));
      rows.push_back({{"temperature", detail::temperature_json(b.temperature)}, {"n", b.n}, {"constructs", c}});
    };
    for (const auto& b : summary.rows) add(b);
    add(summary.total);
    spec.kind = TableKind::by_temperature;
    detail::add_table(out, table_by_temperature(p, spec, in.baselines), {{"rows", rows}});
  }

  // Slopes on temperature
  const auto temps = p.temperatures();
  {
    std::vector<NamedFit> fits;
    ojson models = ojson::object();
    for (const auto& c : p.constructs) {
      auto f = detail::try_fit(c, out.warnings, [&] {
        auto [y, d] = detail::complete_cases(p.column(c), {temps}, {"temperature"});
        return stats::ols(y, d);
      });
      models[c] = f.fit ? detail::to_json(*f.fit) : ojson{{"error", f.error}};
      fits.push_back(std::move(f));
    }
    spec.kind = TableKind::regression_summary;
    detail::add_table(out,
                      regression_table(fits, spec, p.instrument_id + "_regressions", "Per-construct OLS on temperature"),
                      {{"models", models}});
  }

  // Matrix of scores
  Eigen::MatrixXd y(static_cast<Eigen::Index>(p.profiles.size()), static_cast<Eigen::Index>(p.constructs.size()));
  for (std::size_t j = 0; j < p.constructs.size(); ++j) {
    const auto col = p.column(p.constructs[j]);
    for (std::size_t i = 0; i < col.size(); ++i) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }

  // MANOVA
  {
    ojson m;
    try {
      const auto r = stats::manova(y, p.constructs, temps, "temperature");
      for (const auto& w : r.warnings) out.warnings.push_back("manova: " + w);
      m = detail::to_json(r);
      RenderedTable t;
      t.csv.id = t.markdown.id = p.instrument_id + "_manova";
      t.markdown.title = "MANOVA: constructs on temperature";
      t.csv.header = {"test", "value", "f", "df1", "df2", "p", "stars", "n"};
      t.markdown.header = {"Test", "Value", "F", "df1", "df2", "p", "n"};
      auto row = [&](const std::string& name, double v, double f, double d1, double d2, double pv) {
        const std::string stars(stats::significance_stars(pv));
        t.csv.rows.push_back({name, spec.num(v), spec.num(f), format_number(d1, 0), format_number(d2, 0), io::format_double(pv),
                              stars, std::to_string(r.n)});
        t.markdown.rows.push_back({name, spec.num(v), spec.num(f) + stars, format_number(d1, 0), format_number(d2, 0),
                                   pv < 0.001 ? "<.001" : format_number(pv, 3), std::to_string(r.n)});
      };
      row("Wilks", r.wilks_lambda, r.f_approx, r.df1, r.df2, r.p);
      row("Pillai", r.pillai, r.pillai_f, r.pillai_df1, r.pillai_df2, r.pillai_p);
      detail::add_table(out, std::move(t), m);
    } catch (const Error& e) {
      out.warnings.push_back(std::string("manova: ") + e.what());
      out.bundle[p.instrument_id + "_manova"] = {{"error", e.what()}};
    }
  }

  // Correlations
  {
    const auto cm = stats::pearson_matrix(y, p.constructs);
    std::optional<ReferenceCorrelations> ref = in.reference;
    if (ref) {
      try {
        detail::check_labels(cm, *ref);
      } catch (const ValidationError& e) {
        out.warnings.push_back(e.what());
        ref.reset();
      }
    }
    spec.kind = TableKind::correlation;
    detail::add_table(out, correlation_table(cm, ref, spec), {{"matrix", detail::to_json(cm)}});
  }

  // Baselines
  if (!in.baselines.empty()) {
    const auto cmp = compare_to_baseline(p, in.baselines);
    ojson rows = ojson::array();
    for (const auto& r : cmp.rows)
      rows.push_back({{"construct", r.construct},
                      {"source", r.source},
                      {"model_mean", detail::num(r.artifact_mean)},
                      {"model_sd", detail::num(r.artifact_sd)},
                      {"baseline_mean", r.baseline_mean},
                      {"baseline_sd", r.baseline_sd},
                      {"standardized_gap", detail::num(r.standardized_gap)}});
    detail::add_table(out, comparison_table(cmp, spec), {{"rows", rows}});
    ojson ranges = ojson::object();
    for (const auto& r : cmp.ranges) ranges[r.label] = detail::num(r.range);
    detail::add_table(out, ranges_table(cmp, spec), {{"ranges", ranges}});
  }

  out.bundle["warnings"] = out.warnings;
  return out;
}

inline AnalysisResult analyze_demographics(const std::vector<DemographicRecord>& recs, const std::string& instrument_id,
                                           const AnalysisInputs& in) {
  AnalysisResult out;
  out.bundle = detail::header(instrument_id, in);
  TableSpec spec;
  spec.instrument_id = instrument_id;
  spec.rounding = in.rounding;
  spec.number_style = in.number_style;

  const auto s = summarize_demographics(recs);
  {
    ojson rows = ojson::array();
    auto add = [&](const DemographicBlock& b) {
      ojson cats = ojson::object();
      for (const auto& [k, v] : b.categories) cats[k] = v;
      rows.push_back({{"temperature", detail::temperature_json(b.temperature)},
                      {"n", b.n},
                      {"age", detail::to_json(b.age)},
                      {"gender_answers", b.gender_answers},
                      {"female", b.female},
                      {"p_female", detail::num(b.p_female())},
                      {"gender", cats}});
    };
    for (const auto& b : s.rows) add(b);
    add(s.total);
    spec.kind = TableKind::demographics;
    detail::add_table(out, demographics_table(recs, spec), {{"rows", rows}});
  }

  std::vector<double> t, age, nonfemale, female;
  for (const auto& r : recs) {
    t.push_back(r.temperature);
    age.push_back(r.age);
    nonfemale.push_back(r.gender.empty() ? stats::kNA : (r.gender == "female" ? 0.0 : 1.0));
    female.push_back(r.gender.empty() ? stats::kNA : (r.gender == "female" ? 1.0 : 0.0));
  }
  std::vector<double> interaction(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) interaction[i] = t[i] * female[i];

  std::vector<NamedFit> fits;
  ojson models = ojson::object();
  auto record = [&](NamedFit f) {
    models[f.label] = f.fit ? detail::to_json(*f.fit) : ojson{{"error", f.error}};
    fits.push_back(std::move(f));
  };
  record(detail::try_fit("age ~ temperature", out.warnings, [&] {
    auto [y, d] = detail::complete_cases(age, {t}, {"temperature"});
    return stats::ols(y, d);
  }));
  record(detail::try_fit("non_female ~ temperature", out.warnings, [&] {
    auto [y, d] = detail::complete_cases(nonfemale, {t}, {"temperature"});
    return stats::logistic(y, d);
  }));
  if (fits.back().fit) models[fits.back().label]["odds_ratio_temperature"] = detail::num(std::exp(fits.back().fit->coefficient("temperature")));
  record(detail::try_fit("age ~ temperature * female", out.warnings, [&] {
    auto [y, d] = detail::complete_cases(age, {t, female, interaction}, {"temperature", "female", "temperature:female"});
    return stats::ols(y, d);
  }));
  spec.kind = TableKind::regression_summary;
  detail::add_table(out, regression_table(fits, spec, instrument_id + "_regressions", "Age and gender on temperature"),
                    {{"models", models}});

  out.bundle["warnings"] = out.warnings;
  return out;
}

/// Markdown mirror of every table, in bundle order.
inline std::string markdown_report(const AnalysisResult& r, const std::string& instrument_id) {
  std::string out = "# " + instrument_id + "\n\n";
  if (r.bundle.contains("manifest_sha256") && r.bundle["manifest_sha256"].is_string())
    out += "manifest sha256: `" + r.bundle["manifest_sha256"].get<std::string>() + "`\n\n";
  for (const auto& t : r.tables) out += to_markdown(t.markdown) + "\n";
  if (!r.warnings.empty()) {
    out += "### Warnings\n\n";
    for (const auto& w : r.warnings) out += "- " + w + "\n";
  }
  return out;
}

}  // namespace surveyor
