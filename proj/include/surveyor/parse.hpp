#pragma once

// Turns raw completions into typed answers.
//
// Likert: newlines are removed and whitespace trimmed; the answer is the
// integer the text starts with. If the text does not start with one but
// contains a "Response:" echo, the text after the last echo is tried the same
// way. Verbal answers are NA; there is no word-to-number guessing.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "surveyor/error.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/records.hpp"

namespace surveyor {

struct ParsedAnswer {
  std::optional<int> value;
  std::optional<NaReason> na_reason;
  std::string raw_text;

  bool same_outcome(const ParsedAnswer& o) const { return value == o.value && na_reason == o.na_reason; }
};

enum class DemographicKind { age, gender };

struct DemographicAnswer {
  DemographicKind kind = DemographicKind::age;
  std::optional<int> age_years;
  std::optional<std::string> gender_category;
  std::optional<NaReason> na_reason;
  std::string raw_text;
};

inline constexpr int kMinAge = 0;
inline constexpr int kMaxAge = 130;

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\f' || c == '\v'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Parses an integer token at the start of `s`: optional sign, digits, and then
// either the end or a character that cannot continue a number or a word.
// "3", "3.", "3 = Somewhat like me" and "-1" qualify; "3rd", "3.5", "35x" do not.
inline std::optional<long> leading_integer(std::string_view s) {
  std::size_t i = 0;
  bool negative = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) {
    negative = s[i] == '-';
    ++i;
  }
  const std::size_t start = i;
  long v = 0;
  while (i < s.size() && is_digit(s[i])) {
    if (v < 1'000'000'000L) v = v * 10 + (s[i] - '0');
    ++i;
  }
  if (i == start) return std::nullopt;
  if (i < s.size()) {
    if (is_alnum(s[i]) || s[i] == '_') return std::nullopt;
    if ((s[i] == '.' || s[i] == ',') && i + 1 < s.size() && is_digit(s[i + 1])) return std::nullopt;
  }
  return negative ? -v : v;
}

}  // namespace detail

/// Raw text with every newline removed and surrounding whitespace trimmed.
inline std::string canonicalize_answer(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw)
    if (c != '\n' && c != '\r') out += c;
  return std::string(detail::trim(out));
}

inline ParsedAnswer parse_likert(std::string_view raw, const ScaleDef& scale) {
  ParsedAnswer a;
  a.raw_text = std::string(raw);
  const std::string text = canonicalize_answer(raw);
  if (text.empty()) {
    a.na_reason = NaReason::empty;
    return a;
  }
  auto v = detail::leading_integer(text);
  if (!v) {
    static constexpr std::string_view kEcho = "Response:";
    auto pos = text.rfind(kEcho);
    if (pos != std::string::npos) v = detail::leading_integer(detail::trim(std::string_view(text).substr(pos + kEcho.size())));
  }
  if (!v) {
    a.na_reason = NaReason::non_numeric;
  } else if (*v < scale.min || *v > scale.max) {
    a.na_reason = NaReason::out_of_range;
  } else {
    a.value = static_cast<int>(*v);
  }
  return a;
}

/// First integer in the text that is a plausible age.
inline DemographicAnswer parse_age(std::string_view raw) {
  DemographicAnswer a;
  a.kind = DemographicKind::age;
  a.raw_text = std::string(raw);
  const std::string text = canonicalize_answer(raw);
  if (text.empty()) {
    a.na_reason = NaReason::empty;
    return a;
  }
  bool saw_integer = false;
  for (std::size_t i = 0; i < text.size();) {
    if (!detail::is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    long v = 0;
    while (j < text.size() && detail::is_digit(text[j])) {
      if (v < 1'000'000L) v = v * 10 + (text[j] - '0');
      ++j;
    }
    const bool glued_to_word = (i > 0 && detail::is_alnum(text[i - 1])) || (j < text.size() && detail::is_alnum(text[j]));
    if (!glued_to_word) {
      saw_integer = true;
      if (v >= kMinAge && v <= kMaxAge) {
        a.age_years = static_cast<int>(v);
        return a;
      }
    }
    // skip the fractional part of decimals like "27.5"
    if (j + 1 < text.size() && text[j] == '.' && detail::is_digit(text[j + 1])) {
      j += 1;
      while (j < text.size() && detail::is_digit(text[j])) ++j;
    }
    i = j;
  }
  a.na_reason = saw_integer ? NaReason::out_of_range : NaReason::non_numeric;
  return a;
}

// ---------------------------------------------------------------------------
// Gender normalization

struct GenderRule {
  std::string pattern;   // lower-case words separated by single spaces
  std::string category;
};

// Rules are tried in order; the first whose pattern occurs as a whole-word
// phrase in the normalized answer wins. Nothing matched -> "other".
struct GenderMap {
  std::vector<GenderRule> rules;
  std::string fallback = "other";

  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const auto& r : rules)
      if (std::find(out.begin(), out.end(), r.category) == out.end()) out.push_back(r.category);
    if (std::find(out.begin(), out.end(), fallback) == out.end()) out.push_back(fallback);
    return out;
  }
};

/// Lower-case, punctuation to spaces, single spaces, no leading/trailing space.
inline std::string normalize_words(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (char c : raw) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      if (pending_space && !out.empty()) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::tolower(uc));
    } else {
      pending_space = true;
    }
  }
  return out;
}

inline GenderMap default_gender_map() {
  GenderMap m;
  for (const char* p : {"transgender male", "transgender man", "trans male", "trans man"})
    m.rules.push_back({p, "transgender-male"});
  for (const char* p : {"transgender female", "transgender woman", "trans female", "trans woman"})
    m.rules.push_back({p, "transgender-female"});
  m.rules.push_back({"non binary", "non-binary"});
  m.rules.push_back({"nonbinary", "non-binary"});
  m.rules.push_back({"woman", "female"});
  m.rules.push_back({"female", "female"});
  m.rules.push_back({"man", "male"});
  m.rules.push_back({"male", "male"});
  return m;
}

/// {"rules": [{"pattern", "category"}, ...], "fallback"?}
inline GenderMap load_gender_map(std::string_view document) {
  const auto doc = detail::parse_document(document, "gender map");
  GenderMap m;
  const auto& rules = detail::require(doc, "rules", "gender map");
  if (!rules.is_array() || rules.empty()) throw ValidationError("gender map: field 'rules' must be a non-empty array");
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const std::string where = "gender map rules[" + std::to_string(i) + "]";
    GenderRule r;
    r.pattern = normalize_words(detail::require_string(rules[i], "pattern", where));
    r.category = detail::require_string(rules[i], "category", where);
    if (r.pattern.empty()) throw ValidationError(where + ": field 'pattern' has no words");
    m.rules.push_back(std::move(r));
  }
  if (doc.contains("fallback")) m.fallback = detail::require_string(doc, "fallback", "gender map");
  return m;
}

inline GenderMap load_gender_map_file(const std::filesystem::path& path) { return load_gender_map(io::read_file(path)); }

inline DemographicAnswer normalize_gender(std::string_view raw, const GenderMap& map = default_gender_map()) {
  DemographicAnswer a;
  a.kind = DemographicKind::gender;
  a.raw_text = std::string(raw);
  const std::string words = normalize_words(raw);
  if (words.empty()) {
    a.na_reason = NaReason::empty;
    return a;
  }
  const std::string padded = " " + words + " ";
  for (const auto& r : map.rules) {
    if (padded.find(" " + r.pattern + " ") != std::string::npos) {
      a.gender_category = r.category;
      return a;
    }
  }
  a.gender_category = map.fallback;
  return a;
}

// ---------------------------------------------------------------------------
// Whole-log cleaning

struct ItemCounts {
  std::size_t total = 0;
  std::size_t na = 0;
};

struct CleaningReport {
  std::size_t total = 0;
  std::size_t na_count = 0;
  double na_rate = 0;
  std::map<std::string, std::size_t> by_reason;
  std::map<std::string, ItemCounts> by_item;
  std::size_t partial_records = 0;  // from incomplete memory chains; parsed, excluded downstream
};

struct CleanedRun {
  std::vector<CleanedAnswer> answers;  // same order as the log
  CleaningReport report;
};

/// Parses every record. Free-text items are dispatched on their construct id
/// ("age" or "gender"); any other free-text construct is an error.
inline CleanedRun clean_run(const std::vector<RawResponse>& log, const Instrument& ins,
                            const GenderMap& gender_map = default_gender_map()) {
  CleanedRun out;
  out.answers.reserve(log.size());
  for (const auto& r : log) {
    if (r.instrument_id != ins.id)
      throw ValidationError("record for item '" + r.item_id + "' belongs to instrument '" + r.instrument_id +
                            "', expected '" + ins.id + "'");
    const Item* item = ins.find_item(r.item_id);
    if (!item) throw ValidationError("corrupt log: unknown item id '" + r.item_id + "' for instrument " + ins.id);
    CleanedAnswer a;
    a.raw = r;
    if (ins.kind == InstrumentKind::likert) {
      auto p = parse_likert(r.raw_text, *ins.scale);
      a.value = p.value;
      a.na_reason = p.na_reason;
    } else if (item->construct == "age") {
      auto p = parse_age(r.raw_text);
      a.value = p.age_years;
      a.na_reason = p.na_reason;
    } else if (item->construct == "gender") {
      auto p = normalize_gender(r.raw_text, gender_map);
      a.category = p.gender_category;
      a.na_reason = p.na_reason;
    } else {
      throw ValidationError("no parser for free-text construct '" + item->construct + "' (item '" + item->id + "')");
    }
    auto& counts = out.report.by_item[r.item_id];
    ++counts.total;
    ++out.report.total;
    if (a.na_reason) {
      ++counts.na;
      ++out.report.na_count;
      ++out.report.by_reason[std::string(to_string(*a.na_reason))];
    }
    if (r.partial()) ++out.report.partial_records;
    out.answers.push_back(std::move(a));
  }
  out.report.na_rate = out.report.total ? static_cast<double>(out.report.na_count) / static_cast<double>(out.report.total) : 0.0;
  return out;
}

inline nlohmann::ordered_json to_json(const CleaningReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["na_count"] = r.na_count;
  j["na_rate"] = r.na_rate;
  j["partial_records"] = r.partial_records;
  j["by_reason"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.by_reason) j["by_reason"][k] = v;
  j["by_item"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.by_item) j["by_item"][k] = {{"total", v.total}, {"na", v.na}};
  return j;
}

}  // namespace surveyor
