#pragma once

// Pseudo-respondents and composite scores.
//
// Stateless runs: respondent (t, k) is the k-th sample of every item at
// temperature t. Memory runs: one respondent per chain. Both are keyed by
// (temperature, rep) in the log, so assembly is the same; memory mode also
// drops chains flagged partial.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "surveyor/csv.hpp"
#include "surveyor/error.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/prompt.hpp"
#include "surveyor/records.hpp"
#include "surveyor/stats/descriptive.hpp"

namespace surveyor {

inline int reverse_key(int value, const ScaleDef& scale) {
  if (!scale.contains(value))
    throw ContractViolation("reverse_key: " + std::to_string(value) + " outside " + std::to_string(scale.min) + ".." +
                            std::to_string(scale.max));
  return scale.min + scale.max - value;
}

/// 1..6 -> 6..1 so that higher means more important.
inline int invert_hvs(int value) {
  if (value < 1 || value > 6) throw ContractViolation("invert_hvs: " + std::to_string(value) + " outside 1..6");
  return 7 - value;
}

enum class NaHandling { mean_of_available, require_all };

struct ScoringPolicy {
  NaHandling na_handling = NaHandling::mean_of_available;
  bool hvs_invert = false;
  bool reverse_keying = true;
};

inline ScoringPolicy default_policy(const Instrument& ins) {
  ScoringPolicy p;
  p.hvs_invert = ins.invert_on_score;
  return p;
}

struct RespondentProfile {
  std::string instrument_id;
  double temperature = 0;
  int rep = 0;
  std::map<std::string, double> scores;  // NaN = NA
  std::map<std::string, int> answered;
};

namespace detail {

inline void check_policy(const Instrument& ins, const ScoringPolicy& policy) {
  if (ins.kind != InstrumentKind::likert) throw ContractViolation("scoring needs a likert instrument, got " + ins.id);
  if (policy.hvs_invert && !ins.invert_on_score)
    throw ContractViolation("scoring policy inverts scores but instrument " + ins.id + " is not flagged invert_on_score");
}

// Reverse keying and inversion both reflect around the scale midpoint.
inline int keyed_value(int v, const Item& item, const ScaleDef& scale, const ScoringPolicy& policy) {
  if (policy.reverse_keying && item.reverse_keyed) v = reverse_key(v, scale);
  if (policy.hvs_invert) v = scale.min == 1 && scale.max == 6 ? invert_hvs(v) : reverse_key(v, scale);
  return v;
}

}  // namespace detail

/// Item values for one respondent, keyed by item id; missing or NA answers
/// are absent.
inline RespondentProfile score_respondent(const std::map<std::string, int>& values, const Instrument& ins,
                                          const ScoringPolicy& policy) {
  detail::check_policy(ins, policy);
  RespondentProfile p;
  p.instrument_id = ins.id;
  for (const auto& c : ins.constructs) {
    const auto items = ins.items_for(c);
    double sum = 0;
    int n = 0;
    for (const Item* it : items) {
      auto v = values.find(it->id);
      if (v == values.end()) continue;
      sum += detail::keyed_value(v->second, *it, *ins.scale, policy);
      ++n;
    }
    p.answered[c] = n;
    const bool complete = n == static_cast<int>(items.size());
    if (n == 0 || (policy.na_handling == NaHandling::require_all && !complete))
      p.scores[c] = stats::kNA;
    else
      p.scores[c] = sum / n;
  }
  return p;
}

/// Groups answers by (temperature, rep) and scores each group. Output is
/// ordered by (temperature, rep).
inline std::vector<RespondentProfile> assemble_respondents(const std::vector<CleanedAnswer>& answers, const Instrument& ins,
                                                           PromptMode mode, const ScoringPolicy& policy) {
  detail::check_policy(ins, policy);
  std::map<std::pair<double, int>, std::map<std::string, int>> groups;
  std::map<std::pair<double, int>, bool> partial;
  for (const auto& a : answers) {
    if (a.raw.instrument_id != ins.id)
      throw ValidationError("answer for item '" + a.raw.item_id + "' belongs to instrument '" + a.raw.instrument_id +
                            "', expected '" + ins.id + "'");
    const Item& item = ins.item(a.raw.item_id);
    const auto key = std::pair(a.raw.temperature, a.raw.rep);
    auto& g = groups[key];
    if (a.raw.partial()) partial[key] = true;
    if (!a.value) continue;
    if (!ins.scale->contains(*a.value))
      throw ContractViolation("answer " + std::to_string(*a.value) + " for item " + item.id + " outside the scale");
    if (!g.emplace(item.id, *a.value).second)
      throw ValidationError("duplicate answer for item '" + item.id + "' at temperature " + io::format_double(key.first) +
                            ", rep " + std::to_string(key.second));
  }
  std::vector<RespondentProfile> out;
  for (const auto& [key, values] : groups) {
    if (mode == PromptMode::memory && partial.count(key)) continue;
    auto p = score_respondent(values, ins, policy);
    p.temperature = key.first;
    p.rep = key.second;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Profiles file: instrument, temperature, rep, <C>..., <C>_n...

struct ProfilesTable {
  std::string instrument_id;
  std::vector<std::string> constructs;
  std::vector<RespondentProfile> profiles;

  std::vector<double> column(const std::string& c) const {
    std::vector<double> out;
    out.reserve(profiles.size());
    for (const auto& p : profiles) out.push_back(p.scores.at(c));
    return out;
  }
  std::vector<double> temperatures() const {
    std::vector<double> out;
    for (const auto& p : profiles) out.push_back(p.temperature);
    return out;
  }
};

inline std::string format_profiles_csv(const std::vector<RespondentProfile>& profiles, const Instrument& ins) {
  std::vector<csv::Row> rows;
  csv::Row header{"instrument", "temperature", "rep"};
  for (const auto& c : ins.constructs) header.push_back(c);
  for (const auto& c : ins.constructs) header.push_back(c + "_n");
  rows.push_back(header);
  for (const auto& p : profiles) {
    csv::Row r{p.instrument_id, io::format_double(p.temperature), std::to_string(p.rep)};
    for (const auto& c : ins.constructs) r.push_back(io::format_double(p.scores.at(c)));
    for (const auto& c : ins.constructs) r.push_back(std::to_string(p.answered.at(c)));
    rows.push_back(std::move(r));
  }
  return csv::format(rows);
}

inline ProfilesTable parse_profiles_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError("profiles: empty file");
  const auto& h = rows[0];
  if (h.size() < 3 || h[0] != "instrument" || h[1] != "temperature" || h[2] != "rep" || (h.size() - 3) % 2 != 0)
    throw ValidationError("profiles: header must be instrument,temperature,rep,<constructs...>,<construct>_n...");
  ProfilesTable t;
  const std::size_t k = (h.size() - 3) / 2;
  for (std::size_t j = 0; j < k; ++j) {
    t.constructs.push_back(h[3 + j]);
    if (h[3 + k + j] != h[3 + j] + "_n")
      throw ValidationError("profiles: expected column '" + h[3 + j] + "_n', found '" + h[3 + k + j] + "'");
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "profiles row " + std::to_string(i + 1);
    if (r.size() != h.size()) throw ValidationError(where + ": expected " + std::to_string(h.size()) + " fields");
    RespondentProfile p;
    p.instrument_id = r[0];
    if (t.instrument_id.empty()) t.instrument_id = r[0];
    if (r[0] != t.instrument_id) throw ValidationError(where + ": mixed instruments");
    auto temp = io::parse_double(r[1]);
    auto rep = io::parse_double(r[2]);
    if (!temp || !rep) throw ValidationError(where + ": bad temperature or rep");
    p.temperature = *temp;
    p.rep = static_cast<int>(*rep);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& cell = r[3 + j];
      auto v = cell == "NA" ? std::optional<double>(stats::kNA) : io::parse_double(cell);
      auto n = io::parse_double(r[3 + k + j]);
      if (!v || !n) throw ValidationError(where + ": bad value in column '" + t.constructs[j] + "'");
      p.scores[t.constructs[j]] = *v;
      p.answered[t.constructs[j]] = static_cast<int>(*n);
    }
    t.profiles.push_back(std::move(p));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Demographic probes: age and gender paired by (temperature, rep).

struct DemographicRecord {
  double temperature = 0;
  int rep = 0;
  double age = stats::kNA;
  std::string gender;  // normalized category, empty = NA
};

inline std::vector<DemographicRecord> assemble_demographics(const std::vector<CleanedAnswer>& answers,
                                                            const Instrument& ins) {
  if (ins.kind != InstrumentKind::free_text) throw ContractViolation("demographics need a free_text instrument");
  std::map<std::pair<double, int>, DemographicRecord> groups;
  for (const auto& a : answers) {
    const Item& item = ins.item(a.raw.item_id);
    auto& g = groups[{a.raw.temperature, a.raw.rep}];
    g.temperature = a.raw.temperature;
    g.rep = a.raw.rep;
    if (item.construct == "age" && a.value) g.age = *a.value;
    if (item.construct == "gender" && a.category) g.gender = *a.category;
  }
  std::vector<DemographicRecord> out;
  for (auto& [k, v] : groups) out.push_back(std::move(v));
  return out;
}

inline std::string format_demographics_csv(const std::vector<DemographicRecord>& recs, const std::string& instrument_id) {
  std::vector<csv::Row> rows{{"instrument", "temperature", "rep", "age", "gender"}};
  for (const auto& r : recs)
    rows.push_back({instrument_id, io::format_double(r.temperature), std::to_string(r.rep), io::format_double(r.age),
                    r.gender.empty() ? "NA" : r.gender});
  return csv::format(rows);
}

inline std::vector<DemographicRecord> parse_demographics_csv(std::string_view text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows[0] != csv::Row{"instrument", "temperature", "rep", "age", "gender"})
    throw ValidationError("demographics: header must be instrument,temperature,rep,age,gender");
  std::vector<DemographicRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 5) throw ValidationError("demographics row " + std::to_string(i + 1) + ": expected 5 fields");
    DemographicRecord d;
    auto t = io::parse_double(r[1]);
    auto rep = io::parse_double(r[2]);
    if (!t || !rep) throw ValidationError("demographics row " + std::to_string(i + 1) + ": bad temperature or rep");
    d.temperature = *t;
    d.rep = static_cast<int>(*rep);
    d.age = r[3] == "NA" ? stats::kNA : io::parse_double(r[3]).value_or(stats::kNA);
    d.gender = r[4] == "NA" ? "" : r[4];
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace surveyor
