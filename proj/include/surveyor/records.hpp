#pragma once

// Raw and cleaned response records and their JSON-lines form.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "surveyor/error.hpp"

namespace surveyor {

struct RawResponse {
  std::string instrument_id;
  std::string item_id;
  double temperature = 0;
  int rep = 0;  // repetition index (stateless) or chain index (memory), 0-based
  std::string prompt_hash;
  std::string raw_text;
  std::string timestamp;  // UTC, ISO 8601
  std::map<std::string, std::string> backend_meta;

  bool partial() const {
    auto it = backend_meta.find("partial");
    return it != backend_meta.end() && it->second == "true";
  }
};

enum class NaReason { non_numeric, out_of_range, empty };

inline std::string_view to_string(NaReason r) {
  switch (r) {
    case NaReason::non_numeric: return "non_numeric";
    case NaReason::out_of_range: return "out_of_range";
    case NaReason::empty: return "empty";
  }
  return "";
}

inline NaReason na_reason_from(std::string_view s) {
  if (s == "non_numeric") return NaReason::non_numeric;
  if (s == "out_of_range") return NaReason::out_of_range;
  if (s == "empty") return NaReason::empty;
  throw ValidationError("unknown na_reason '" + std::string(s) + "'");
}

// A RawResponse plus what parse made of it. Likert answers fill `value`;
// demographic probes fill `value` (age) or `category` (gender).
struct CleanedAnswer {
  RawResponse raw;
  std::optional<int> value;
  std::optional<std::string> category;
  std::optional<NaReason> na_reason;

  bool is_na() const { return na_reason.has_value(); }
};

namespace records {

using json = nlohmann::ordered_json;

inline json to_json(const RawResponse& r) {
  json j;
  j["instrument_id"] = r.instrument_id;
  j["item_id"] = r.item_id;
  j["temperature"] = r.temperature;
  j["rep"] = r.rep;
  j["prompt_hash"] = r.prompt_hash;
  j["raw_text"] = r.raw_text;
  j["timestamp"] = r.timestamp;
  j["backend_meta"] = json::object();
  for (const auto& [k, v] : r.backend_meta) j["backend_meta"][k] = v;
  return j;
}

inline RawResponse raw_from_json(const nlohmann::json& j) {
  RawResponse r;
  try {
    r.instrument_id = j.at("instrument_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.rep = j.at("rep").get<int>();
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.raw_text = j.at("raw_text").get<std::string>();
    r.timestamp = j.value("timestamp", "");
    if (j.contains("backend_meta"))
      for (const auto& [k, v] : j["backend_meta"].items()) r.backend_meta[k] = v.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("response record: ") + e.what());
  }
  return r;
}

inline json to_json(const CleanedAnswer& a) {
  json j = to_json(a.raw);
  j["value"] = a.value ? json(*a.value) : json(nullptr);
  j["category"] = a.category ? json(*a.category) : json(nullptr);
  j["na_reason"] = a.na_reason ? json(std::string(to_string(*a.na_reason))) : json(nullptr);
  return j;
}

inline CleanedAnswer cleaned_from_json(const nlohmann::json& j) {
  CleanedAnswer a;
  a.raw = raw_from_json(j);
  if (j.contains("value") && !j["value"].is_null()) a.value = j["value"].get<int>();
  if (j.contains("category") && !j["category"].is_null()) a.category = j["category"].get<std::string>();
  if (j.contains("na_reason") && !j["na_reason"].is_null()) a.na_reason = na_reason_from(j["na_reason"].get<std::string>());
  return a;
}

template <class T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& it : items) {
    out += to_json(it).dump();
    out += '\n';
  }
  return out;
}

template <class F>
auto parse_jsonl(std::string_view text, F&& from_json, const char* what) {
  std::vector<decltype(from_json(nlohmann::json{}))> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(from_json(j));
  }
  return out;
}

inline std::vector<RawResponse> parse_raw_log(std::string_view text) {
  return parse_jsonl(text, raw_from_json, "raw log");
}

inline std::vector<CleanedAnswer> parse_cleaned(std::string_view text) {
  return parse_jsonl(text, cleaned_from_json, "cleaned answers");
}

}  // namespace records

/// Canonical record order: item ordinal, then temperature, then rep.
template <class OrdinalOf>
void canonical_sort(std::vector<RawResponse>& log, OrdinalOf&& ordinal_of) {
  std::stable_sort(log.begin(), log.end(), [&](const RawResponse& a, const RawResponse& b) {
    return std::tuple(ordinal_of(a.item_id), a.temperature, a.rep) <
           std::tuple(ordinal_of(b.item_id), b.temperature, b.rep);
  });
}

}  // namespace surveyor
