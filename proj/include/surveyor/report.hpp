#pragma once

// Publication-style tables: descriptives by temperature, correlation matrices with
// stars, baseline comparisons, regression summaries, demographics.
//
// Numbers are rounded half-to-even only here, at render time. Every table has
// a CSV form (plain columns, stars in their own column) and a Markdown form
// ("m (sd)" cells, stars appended to r).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surveyor/config.hpp"
#include "surveyor/csv.hpp"
#include "surveyor/error.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/score.hpp"
#include "surveyor/stats.hpp"

namespace surveyor {

// ---------------------------------------------------------------------------
// Number formatting

/// Half-to-even at `places` decimals. Values within a few ulps of a decimal
/// tie (2.675 is stored as 2.67499999...) count as ties.
inline double round_half_even(double x, int places) {
  if (!std::isfinite(x)) return x;
  const double scale = std::pow(10.0, places);
  const double y = x * scale;
  const double fl = std::floor(y);
  const double frac = y - fl;
  const double tol = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(y));
  double r;
  if (std::fabs(frac - 0.5) <= tol)
    r = std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
  else
    r = std::round(y);
  return r / scale;
}

/// fixed: always `places` decimals ("3.70"). shortest: rounded, then the
/// shortest text that reads back the same, keeping one decimal ("4.99",
/// "0.1", "6.0").
inline std::string format_number(double x, int places, NumberStyle style = NumberStyle::fixed) {
  if (std::isnan(x)) return "NA";
  double r = round_half_even(x, places);
  if (r == 0.0) r = 0.0;  // no "-0.00"
  if (style == NumberStyle::fixed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", places, r);
    return buf;
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r);
  std::string s(buf, end);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string format_temperature(double t) { return format_number(t, 10, NumberStyle::shortest); }

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::string id;
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct RenderedTable {
  Table csv;
  Table markdown;
};

inline std::string to_csv(const Table& t) {
  std::vector<csv::Row> rows{t.header};
  for (const auto& r : t.rows) rows.push_back(r);
  return csv::format(rows);
}

inline std::string to_markdown(const Table& t) {
  auto cell = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '|') out += '\\';
      out += c;
    }
    return out;
  };
  std::string out;
  if (!t.title.empty()) out += "### " + t.title + "\n\n";
  out += "|";
  for (const auto& h : t.header) out += " " + cell(h) + " |";
  out += "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : t.rows) {
    out += "|";
    for (const auto& c : r) out += " " + cell(c) + " |";
    out += "\n";
  }
  return out;
}

enum class TableKind { by_temperature, correlation, regression_summary, demographics };

struct TableSpec {
  TableKind kind = TableKind::by_temperature;
  std::string instrument_id;
  int rounding = 2;
  bool include_baselines = false;
  NumberStyle number_style = NumberStyle::fixed;

  std::string num(double x) const { return format_number(x, rounding, number_style); }
};

// ---------------------------------------------------------------------------
// Descriptives by temperature

struct TemperatureBlock {
  std::optional<double> temperature;  // empty for the Total row
  std::size_t n = 0;                  // respondents
  std::map<std::string, stats::DescriptiveStats> constructs;
};

struct TemperatureSummary {
  std::vector<std::string> constructs;
  std::vector<TemperatureBlock> rows;
  TemperatureBlock total;
};

inline TemperatureSummary summarize_by_temperature(const ProfilesTable& p) {
  if (p.profiles.empty()) throw InsufficientDataError("no respondent profiles to summarize");
  TemperatureSummary s;
  s.constructs = p.constructs;
  std::map<double, std::vector<const RespondentProfile*>> groups;
  for (const auto& r : p.profiles) groups[r.temperature].push_back(&r);
  auto block = [&](const std::vector<const RespondentProfile*>& members, std::optional<double> t) {
    TemperatureBlock b;
    b.temperature = t;
    b.n = members.size();
    for (const auto& c : p.constructs) {
      std::vector<double> v;
      for (auto* m : members) v.push_back(m->scores.at(c));
      b.constructs[c] = stats::describe(v);
    }
    return b;
  };
  std::vector<const RespondentProfile*> all;
  for (const auto& [t, members] : groups) {
    s.rows.push_back(block(members, t));
    all.insert(all.end(), members.begin(), members.end());
  }
  s.total = block(all, std::nullopt);
  return s;
}

inline std::string mean_sd_cell(const stats::DescriptiveStats& d, const TableSpec& spec) {
  if (!d.mean) return "NA";
  if (!d.sd) return spec.num(*d.mean);
  return spec.num(*d.mean) + " (" + spec.num(*d.sd) + ")";
}

/// One row per temperature plus Total (omitted for a single temperature);
/// optional human baseline rows.
inline RenderedTable table_by_temperature(const ProfilesTable& profiles, const TableSpec& spec,
                                          const std::vector<BaselineTable>& baselines = {}) {
  const auto s = summarize_by_temperature(profiles);
  RenderedTable t;
  t.csv.id = t.markdown.id = profiles.instrument_id + "_by_temperature";
  t.markdown.title = "Descriptive statistics by temperature: M (SD)";
  t.markdown.header = {"Temp."};
  t.csv.header = {"temperature", "n"};
  for (const auto& c : s.constructs) {
    t.markdown.header.push_back(c);
    t.csv.header.push_back(c + "_mean");
    t.csv.header.push_back(c + "_sd");
  }
  t.markdown.header.push_back("n");
  auto add = [&](const TemperatureBlock& b) {
    const std::string label = b.temperature ? format_temperature(*b.temperature) : "Total";
    std::vector<std::string> md{label}, cv{label, std::to_string(b.n)};
    for (const auto& c : s.constructs) {
      const auto& d = b.constructs.at(c);
      md.push_back(mean_sd_cell(d, spec));
      cv.push_back(d.mean ? spec.num(*d.mean) : "NA");
      cv.push_back(d.sd ? spec.num(*d.sd) : "NA");
    }
    md.push_back(std::to_string(b.n));
    t.markdown.rows.push_back(std::move(md));
    t.csv.rows.push_back(std::move(cv));
  };
  for (const auto& b : s.rows) add(b);
  if (s.rows.size() > 1) add(s.total);
  if (spec.include_baselines) {
    for (const auto& bt : baselines) {
      std::vector<std::string> md{bt.source}, cv{bt.source, ""};
      for (const auto& c : s.constructs) {
        auto it = bt.entries.find(c);
        if (it == bt.entries.end()) {
          md.push_back("");
          cv.push_back("");
          cv.push_back("");
          continue;
        }
        md.push_back(spec.num(it->second.mean) + " (" + spec.num(it->second.sd) + ")");
        cv.push_back(spec.num(it->second.mean));
        cv.push_back(spec.num(it->second.sd));
      }
      md.push_back("");
      t.markdown.rows.push_back(std::move(md));
      t.csv.rows.push_back(std::move(cv));
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Correlations

namespace detail {

inline void check_labels(const stats::CorrelationMatrix& m, const ReferenceCorrelations& ref) {
  std::set<std::string> a(m.labels.begin(), m.labels.end()), b(ref.labels.begin(), ref.labels.end());
  std::vector<std::string> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  if (!diff.empty()) {
    std::string list;
    for (const auto& d : diff) list += (list.empty() ? "" : ", ") + d;
    throw ValidationError("correlation table: labels differ from the reference (" + list + ")");
  }
}

}  // namespace detail

/// Lower triangle: r with stars. Diagonal: variance. Upper triangle: the
/// reference values verbatim, blank without a reference.
inline RenderedTable correlation_table(const stats::CorrelationMatrix& m, const std::optional<ReferenceCorrelations>& ref,
                                       const TableSpec& spec) {
  if (ref) detail::check_labels(m, *ref);
  RenderedTable t;
  t.csv.id = t.markdown.id = spec.instrument_id + "_correlations";
  t.markdown.title = ref ? "Correlations (lower: model, upper: " + ref->source + "; diagonal: variance)"
                         : "Correlations (lower: model; diagonal: variance)";
  t.markdown.header = {""};
  for (const auto& l : m.labels) t.markdown.header.push_back(l);
  t.csv.header = {"row", "col", "r", "p", "stars", "n", "reference"};
  const auto k = m.labels.size();
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::string> md{m.labels[i]};
    for (std::size_t j = 0; j < k; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      if (i == j) {
        md.push_back(spec.num(m.r(ii, jj)));
      } else if (i > j) {
        const double r = m.r(ii, jj);
        md.push_back(std::isnan(r) ? "NA" : spec.num(r) + std::string(stats::significance_stars(m.p(ii, jj))));
      } else {
        md.push_back(ref ? ref->cell(m.labels[i], m.labels[j]).value_or("") : "");
      }
    }
    t.markdown.rows.push_back(std::move(md));
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      std::string reference = ref && i != j ? ref->cell(m.labels[j], m.labels[i]).value_or("") : "";
      t.csv.rows.push_back({m.labels[i], m.labels[j], spec.num(m.r(ii, jj)), i == j ? "" : io::format_double(m.p(ii, jj)),
                            i == j ? "" : std::string(stats::significance_stars(m.p(ii, jj))), std::to_string(m.n(ii, jj)),
                            reference});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Baseline comparison

struct ComparisonRow {
  std::string construct;
  std::string source;
  double artifact_mean = 0;
  double artifact_sd = 0;
  double baseline_mean = 0;
  double baseline_sd = 0;
  std::optional<double> standardized_gap;  // absent when baseline sd is 0
};

struct RangeOfMeans {
  std::string label;  // "model", a source, or a group
  double range = 0;
};

struct BaselineComparison {
  std::vector<ComparisonRow> rows;
  std::vector<RangeOfMeans> ranges;
};

namespace detail {

inline double range_of(const std::vector<double>& v) {
  if (v.empty()) return stats::kNA;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace detail

/// Compares the Total row of `profiles` to each baseline source. Ranges of
/// means: the model's, each source's, and each group's (all of the group's
/// source rows pooled).
inline BaselineComparison compare_to_baseline(const ProfilesTable& profiles, const std::vector<BaselineTable>& baselines) {
  BaselineComparison out;
  const auto s = summarize_by_temperature(profiles);
  std::vector<std::string> shared;
  for (const auto& c : s.constructs) {
    bool everywhere = !baselines.empty();
    for (const auto& b : baselines) everywhere = everywhere && b.entries.count(c);
    if (everywhere) shared.push_back(c);
  }
  std::vector<double> model_means;
  for (const auto& c : shared)
    if (auto m = s.total.constructs.at(c).mean) model_means.push_back(*m);
  out.ranges.push_back({"model", detail::range_of(model_means)});

  std::map<std::string, std::vector<double>> group_means;
  std::vector<std::string> group_order;
  for (const auto& b : baselines) {
    std::vector<double> means;
    for (const auto& c : shared) {
      const auto& e = b.entries.at(c);
      const auto& d = s.total.constructs.at(c);
      ComparisonRow row;
      row.construct = c;
      row.source = b.source;
      row.artifact_mean = d.mean.value_or(stats::kNA);
      row.artifact_sd = d.sd.value_or(stats::kNA);
      row.baseline_mean = e.mean;
      row.baseline_sd = e.sd;
      if (e.sd > 0 && d.mean) row.standardized_gap = (*d.mean - e.mean) / e.sd;
      out.rows.push_back(row);
      means.push_back(e.mean);
    }
    out.ranges.push_back({b.source, detail::range_of(means)});
    if (!b.group.empty()) {
      if (!group_means.count(b.group)) group_order.push_back(b.group);
      auto& g = group_means[b.group];
      g.insert(g.end(), means.begin(), means.end());
    }
  }
  for (const auto& g : group_order) out.ranges.push_back({g, detail::range_of(group_means[g])});
  return out;
}

inline RenderedTable comparison_table(const BaselineComparison& cmp, const TableSpec& spec) {
  RenderedTable t;
  t.csv.id = t.markdown.id = spec.instrument_id + "_baseline_comparison";
  t.markdown.title = "Model total vs human baselines";
  t.csv.header = {"construct", "source", "model_mean", "model_sd", "baseline_mean", "baseline_sd", "standardized_gap"};
  t.markdown.header = {"Construct", "Source", "Model", "Baseline", "Gap (SD units)"};
  for (const auto& r : cmp.rows) {
    const std::string gap = r.standardized_gap ? spec.num(*r.standardized_gap) : "NA";
    t.csv.rows.push_back({r.construct, r.source, spec.num(r.artifact_mean), spec.num(r.artifact_sd), spec.num(r.baseline_mean),
                          spec.num(r.baseline_sd), gap});
    t.markdown.rows.push_back({r.construct, r.source, spec.num(r.artifact_mean) + " (" + spec.num(r.artifact_sd) + ")",
                               spec.num(r.baseline_mean) + " (" + spec.num(r.baseline_sd) + ")", gap});
  }
  return t;
}

inline RenderedTable ranges_table(const BaselineComparison& cmp, const TableSpec& spec) {
  RenderedTable t;
  t.csv.id = t.markdown.id = spec.instrument_id + "_range_of_means";
  t.markdown.title = "Range of construct means";
  t.csv.header = t.markdown.header = {"label", "range"};
  for (const auto& r : cmp.ranges) {
    t.csv.rows.push_back({r.label, spec.num(r.range)});
    t.markdown.rows.push_back({r.label, spec.num(r.range)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Regression summaries

struct NamedFit {
  std::string label;  // construct or model name
  std::optional<stats::RegressionResult> fit;
  std::string error;  // when the fit could not be computed
};

/// One row per (model, term).
inline RenderedTable regression_table(const std::vector<NamedFit>& fits, const TableSpec& spec, const std::string& id,
                                      const std::string& title) {
  RenderedTable t;
  t.csv.id = t.markdown.id = id;
  t.markdown.title = title;
  t.csv.header = {"model", "term", "estimate", "se", "statistic", "p", "stars", "n"};
  t.markdown.header = {"Model", "Term", "β", "SE", "t/z", "p", "n"};
  for (const auto& f : fits) {
    if (!f.fit) {
      t.csv.rows.push_back({f.label, "", "NA", "NA", "NA", "NA", "", "0"});
      t.markdown.rows.push_back({f.label, f.error, "", "", "", "", ""});
      continue;
    }
    const auto& r = *f.fit;
    for (std::size_t j = 0; j < r.terms.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const std::string stars(stats::significance_stars(r.p(jj)));
      const std::string p = r.p(jj) < 0.001 ? "<.001" : format_number(r.p(jj), 3);
      t.csv.rows.push_back({f.label, r.terms[j], spec.num(r.coef(jj)), spec.num(r.se(jj)), spec.num(r.stat(jj)),
                            io::format_double(r.p(jj)), stars, std::to_string(r.n)});
      t.markdown.rows.push_back({f.label, r.terms[j], spec.num(r.coef(jj)) + stars, spec.num(r.se(jj)), spec.num(r.stat(jj)), p,
                                 std::to_string(r.n)});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Demographics

struct DemographicBlock {
  std::optional<double> temperature;
  std::size_t n = 0;
  stats::DescriptiveStats age;
  std::size_t gender_answers = 0;
  std::size_t female = 0;
  std::map<std::string, std::size_t> categories;

  double p_female() const { return gender_answers ? static_cast<double>(female) / static_cast<double>(gender_answers) : stats::kNA; }
};

struct DemographicSummary {
  std::vector<DemographicBlock> rows;
  DemographicBlock total;
};

inline DemographicSummary summarize_demographics(const std::vector<DemographicRecord>& recs) {
  if (recs.empty()) throw InsufficientDataError("no demographic records to summarize");
  DemographicSummary s;
  std::map<double, std::vector<const DemographicRecord*>> groups;
  for (const auto& r : recs) groups[r.temperature].push_back(&r);
  auto block = [](const std::vector<const DemographicRecord*>& members, std::optional<double> t) {
    DemographicBlock b;
    b.temperature = t;
    b.n = members.size();
    std::vector<double> ages;
    for (auto* m : members) {
      ages.push_back(m->age);
      if (m->gender.empty()) continue;
      ++b.gender_answers;
      ++b.categories[m->gender];
      if (m->gender == "female") ++b.female;
    }
    b.age = stats::describe(ages);
    return b;
  };
  std::vector<const DemographicRecord*> all;
  for (const auto& [t, members] : groups) {
    s.rows.push_back(block(members, t));
    all.insert(all.end(), members.begin(), members.end());
  }
  s.total = block(all, std::nullopt);
  return s;
}

inline RenderedTable demographics_table(const std::vector<DemographicRecord>& recs, const TableSpec& spec) {
  const auto s = summarize_demographics(recs);
  RenderedTable t;
  t.csv.id = t.markdown.id = spec.instrument_id + "_by_temperature";
  t.markdown.title = "Age and gender by temperature";
  t.csv.header = t.markdown.header = {"temperature", "age_mean", "age_sd", "age_median", "age_min", "age_max", "n", "p_female"};
  t.markdown.header = {"Temp.", "M age", "SD age", "Med. age", "min age", "max age", "n", "P female"};
  auto opt = [&](const std::optional<double>& v, bool integer_like) {
    if (!v) return std::string("NA");
    if (integer_like && *v == std::floor(*v)) return format_number(*v, 0);
    return spec.num(*v);
  };
  auto add = [&](const DemographicBlock& b) {
    std::vector<std::string> row{b.temperature ? format_temperature(*b.temperature) : "Total",
                                 opt(b.age.mean, false),
                                 opt(b.age.sd, false),
                                 opt(b.age.median, true),
                                 opt(b.age.min, true),
                                 opt(b.age.max, true),
                                 std::to_string(b.n),
                                 spec.num(b.p_female())};
    t.csv.rows.push_back(row);
    t.markdown.rows.push_back(std::move(row));
  };
  for (const auto& b : s.rows) add(b);
  if (s.rows.size() > 1) add(s.total);
  return t;
}

}  // namespace surveyor
