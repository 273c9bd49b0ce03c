#pragma once

// Questionnaire definitions, human baselines and reference correlation
// matrices. Everything instrument-specific (item text, keying, construct
// assignment) comes from data files; nothing here knows about HEXACO or HVS.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surveyor/error.hpp"
#include "surveyor/io.hpp"

namespace surveyor {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct ScaleDef {
  int min = 1;
  int max = 5;
  std::vector<std::string> labels;

  int points() const { return max - min + 1; }
  bool contains(int v) const { return v >= min && v <= max; }
  bool operator==(const ScaleDef&) const = default;
};

struct Item {
  std::string id;
  int ordinal = 0;  // 1-based administration order
  std::string text;
  std::string construct;
  bool reverse_keyed = false;
  bool operator==(const Item&) const = default;
};

enum class InstrumentKind { likert, free_text };

inline std::string_view to_string(InstrumentKind k) {
  return k == InstrumentKind::likert ? "likert" : "free_text";
}

struct Instrument {
  std::string id;
  std::string name;
  std::string version;
  InstrumentKind kind = InstrumentKind::likert;
  std::string instructions;
  std::optional<ScaleDef> scale;  // absent for free_text
  std::vector<std::string> constructs;
  std::map<std::string, std::string> construct_names;  // optional display names
  std::map<std::string, int> expected_items;           // optional published item allocation
  std::vector<Item> items;                             // sorted by ordinal
  bool invert_on_score = false;  // scores are reflected so that higher = more important

  const Item* find_item(std::string_view item_id) const {
    for (const auto& it : items)
      if (it.id == item_id) return &it;
    return nullptr;
  }
  const Item& item(std::string_view item_id) const {
    if (auto* p = find_item(item_id)) return *p;
    throw ValidationError("instrument " + id + ": unknown item id '" + std::string(item_id) + "'");
  }
  std::vector<const Item*> items_for(std::string_view construct) const {
    std::vector<const Item*> out;
    for (const auto& it : items)
      if (it.construct == construct) out.push_back(&it);
    return out;
  }
  bool has_construct(std::string_view c) const {
    return std::find(constructs.begin(), constructs.end(), c) != constructs.end();
  }
  bool operator==(const Instrument&) const = default;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) invalid(where, std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& where,
                                  bool allow_empty = false) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) invalid(where, std::string("field '") + key + "' must be a string");
  auto s = v.get<std::string>();
  if (s.empty() && !allow_empty) invalid(where, std::string("field '") + key + "' is empty");
  return s;
}

inline int require_int(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer()) invalid(where, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

inline double require_number(const json& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) invalid(where, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

inline json parse_document(std::string_view document, const char* what) {
  try {
    return json::parse(document);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": malformed document: " + e.what());
  }
}

}  // namespace detail

/// Parses and validates an instrument definition.
///
/// Errors name the offending item id (or top-level key) and field.
inline Instrument load_instrument(std::string_view document) {
  using detail::invalid;
  const json doc = detail::parse_document(document, "instrument");
  if (!doc.is_object()) invalid("instrument", "document must be an object");

  Instrument ins;
  ins.id = detail::require_string(doc, "id", "instrument");
  const std::string where = "instrument " + ins.id;
  ins.name = detail::require_string(doc, "name", where);
  ins.version = detail::require_string(doc, "version", where);
  auto kind = detail::require_string(doc, "kind", where);
  if (kind == "likert")
    ins.kind = InstrumentKind::likert;
  else if (kind == "free_text")
    ins.kind = InstrumentKind::free_text;
  else
    invalid(where, "field 'kind' must be 'likert' or 'free_text', got '" + kind + "'");
  if (doc.contains("instructions"))
    ins.instructions = detail::require_string(doc, "instructions", where, true);
  if (doc.contains("invert_on_score")) {
    if (!doc["invert_on_score"].is_boolean()) invalid(where, "field 'invert_on_score' must be boolean");
    ins.invert_on_score = doc["invert_on_score"].get<bool>();
  }

  if (doc.contains("scale") && !doc["scale"].is_null()) {
    if (ins.kind == InstrumentKind::free_text) invalid(where, "field 'scale' not allowed for free_text");
    const auto& s = doc["scale"];
    if (!s.is_object()) invalid(where, "field 'scale' must be an object");
    ScaleDef scale;
    scale.min = detail::require_int(s, "min", where + " scale");
    scale.max = detail::require_int(s, "max", where + " scale");
    if (scale.min >= scale.max) invalid(where, "field 'scale.min' must be below 'scale.max'");
    const auto& labels = detail::require(s, "labels", where + " scale");
    if (!labels.is_array()) invalid(where, "field 'scale.labels' must be an array");
    for (const auto& l : labels) {
      if (!l.is_string() || l.get<std::string>().empty())
        invalid(where, "field 'scale.labels' entries must be non-empty strings");
      scale.labels.push_back(l.get<std::string>());
    }
    if (static_cast<int>(scale.labels.size()) != scale.points())
      invalid(where, "field 'scale.labels' has " + std::to_string(scale.labels.size()) +
                         " labels for a " + std::to_string(scale.points()) + "-point scale");
    ins.scale = std::move(scale);
  } else if (ins.kind == InstrumentKind::likert) {
    invalid(where, "missing field 'scale' (required for likert)");
  }
  if (ins.invert_on_score && ins.kind != InstrumentKind::likert)
    invalid(where, "field 'invert_on_score' requires a likert instrument");

  const auto& constructs = detail::require(doc, "constructs", where);
  if (!constructs.is_array()) invalid(where, "field 'constructs' must be an array");
  for (const auto& c : constructs) {
    std::string cid;
    if (c.is_string()) {
      cid = c.get<std::string>();
    } else if (c.is_object()) {
      cid = detail::require_string(c, "id", where + " construct");
      if (c.contains("name")) ins.construct_names[cid] = detail::require_string(c, "name", where + " construct " + cid);
      if (c.contains("expected_items"))
        ins.expected_items[cid] = detail::require_int(c, "expected_items", where + " construct " + cid);
    } else {
      invalid(where, "field 'constructs' entries must be strings or {id,name} objects");
    }
    if (cid.empty()) invalid(where, "field 'constructs' contains an empty id");
    if (ins.has_construct(cid)) invalid(where, "duplicate construct '" + cid + "'");
    ins.constructs.push_back(cid);
  }

  const auto& items = detail::require(doc, "items", where);
  if (!items.is_array() || items.empty()) invalid(where, "field 'items' must be a non-empty array");
  std::set<std::string> seen_ids;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& j = items[i];
    std::string iw = where + " items[" + std::to_string(i) + "]";
    if (!j.is_object()) invalid(iw, "must be an object");
    Item it;
    it.id = detail::require_string(j, "id", iw);
    iw = where + " item '" + it.id + "'";
    if (!seen_ids.insert(it.id).second) invalid(iw, "duplicate item id '" + it.id + "' (field 'id')");
    it.ordinal = detail::require_int(j, "ordinal", iw);
    it.text = detail::require_string(j, "text", iw);
    it.construct = detail::require_string(j, "construct", iw);
    if (!ins.has_construct(it.construct))
      invalid(iw, "field 'construct' references unknown construct '" + it.construct + "'");
    if (j.contains("reverse")) {
      if (!j["reverse"].is_boolean()) invalid(iw, "field 'reverse' must be boolean");
      it.reverse_keyed = j["reverse"].get<bool>();
    }
    if (it.reverse_keyed && ins.kind != InstrumentKind::likert)
      invalid(iw, "field 'reverse' requires a likert instrument");
    ins.items.push_back(std::move(it));
  }

  std::sort(ins.items.begin(), ins.items.end(),
            [](const Item& a, const Item& b) { return a.ordinal < b.ordinal; });
  for (std::size_t i = 0; i < ins.items.size(); ++i) {
    if (ins.items[i].ordinal != static_cast<int>(i) + 1)
      invalid(where + " item '" + ins.items[i].id + "'",
              "field 'ordinal' must be unique and contiguous 1.." + std::to_string(ins.items.size()) +
                  " (got " + std::to_string(ins.items[i].ordinal) + " at position " + std::to_string(i + 1) + ")");
  }
  for (const auto& c : ins.constructs)
    if (ins.items_for(c).empty()) invalid(where, "construct '" + c + "' is referenced by no item");
  for (const auto& [c, n] : ins.expected_items) {
    auto got = ins.items_for(c).size();
    if (static_cast<int>(got) != n)
      invalid(where, "construct '" + c + "' has " + std::to_string(got) + " items, allocation says " +
                         std::to_string(n) + " (field 'expected_items')");
  }
  return ins;
}

inline Instrument load_instrument_file(const std::filesystem::path& path) {
  return load_instrument(io::read_file(path));
}

inline ordered_json to_json(const Instrument& ins) {
  ordered_json doc;
  doc["id"] = ins.id;
  doc["name"] = ins.name;
  doc["version"] = ins.version;
  doc["kind"] = to_string(ins.kind);
  doc["instructions"] = ins.instructions;
  if (ins.invert_on_score) doc["invert_on_score"] = true;
  if (ins.scale) {
    doc["scale"] = {{"min", ins.scale->min}, {"max", ins.scale->max}, {"labels", ins.scale->labels}};
  }
  doc["constructs"] = ordered_json::array();
  for (const auto& c : ins.constructs) {
    auto n = ins.construct_names.find(c);
    auto e = ins.expected_items.find(c);
    if (n == ins.construct_names.end() && e == ins.expected_items.end()) {
      doc["constructs"].push_back(c);
      continue;
    }
    ordered_json cj = {{"id", c}};
    if (n != ins.construct_names.end()) cj["name"] = n->second;
    if (e != ins.expected_items.end()) cj["expected_items"] = e->second;
    doc["constructs"].push_back(std::move(cj));
  }
  doc["items"] = ordered_json::array();
  for (const auto& it : ins.items) {
    doc["items"].push_back({{"id", it.id},
                            {"ordinal", it.ordinal},
                            {"text", it.text},
                            {"construct", it.construct},
                            {"reverse", it.reverse_keyed}});
  }
  return doc;
}

inline std::string serialize(const Instrument& ins) { return to_json(ins).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Human reference data

struct BaselineEntry {
  double mean = 0;
  double sd = 0;
  bool operator==(const BaselineEntry&) const = default;
};

struct BaselineTable {
  std::string source;  // e.g. "college-male"
  std::string group;   // optional pooling label, e.g. "college"
  std::map<std::string, BaselineEntry> entries;
  bool operator==(const BaselineTable&) const = default;
};

/// Baseline document: {"instrument": id, "tables": [{"source", "group"?,
/// "entries": {construct: {"mean", "sd"}}}]}. Each table must cover every
/// construct of the instrument.
inline std::vector<BaselineTable> load_baselines(std::string_view document, const Instrument& ins) {
  using detail::invalid;
  const json doc = detail::parse_document(document, "baselines");
  if (!doc.is_object()) invalid("baselines", "document must be an object");
  if (doc.contains("instrument") && doc["instrument"].get<std::string>() != ins.id)
    invalid("baselines", "document targets instrument '" + doc["instrument"].get<std::string>() +
                             "', not '" + ins.id + "'");
  std::vector<BaselineTable> out;
  if (!doc.contains("tables")) return out;
  const auto& tables = doc["tables"];
  if (!tables.is_array()) invalid("baselines", "field 'tables' must be an array");
  for (const auto& t : tables) {
    BaselineTable bt;
    bt.source = detail::require_string(t, "source", "baseline table");
    const std::string where = "baseline '" + bt.source + "'";
    if (t.contains("group")) bt.group = detail::require_string(t, "group", where);
    const auto& entries = detail::require(t, "entries", where);
    if (!entries.is_object()) invalid(where, "field 'entries' must be an object");
    for (const auto& [cid, e] : entries.items()) {
      if (!ins.has_construct(cid)) invalid(where, "unknown construct id '" + cid + "'");
      BaselineEntry be;
      be.mean = detail::require_number(e, "mean", where + " " + cid);
      be.sd = detail::require_number(e, "sd", where + " " + cid);
      if (be.sd < 0) invalid(where + " " + cid, "field 'sd' is negative");
      bt.entries[cid] = be;
    }
    for (const auto& c : ins.constructs)
      if (!bt.entries.count(c)) invalid(where, "missing construct '" + c + "'");
    out.push_back(std::move(bt));
  }
  return out;
}

inline std::vector<BaselineTable> load_baselines_file(const std::filesystem::path& path, const Instrument& ins) {
  return load_baselines(io::read_file(path), ins);
}

// Published inter-construct correlations, kept as display strings because the
// sources sometimes pack two samples into one cell ("0.12, 0.04").
struct ReferenceCorrelations {
  std::string source;
  std::vector<std::string> labels;
  std::map<std::pair<std::string, std::string>, std::string> upper;  // (row, col) with row before col

  std::optional<std::string> cell(const std::string& a, const std::string& b) const {
    auto it = upper.find({a, b});
    if (it == upper.end()) it = upper.find({b, a});
    if (it == upper.end()) return std::nullopt;
    return it->second;
  }
};

/// Document: {"source", "labels": [...], "upper": {row: {col: "text"}}}.
inline ReferenceCorrelations load_reference_correlations(std::string_view document) {
  using detail::invalid;
  const json doc = detail::parse_document(document, "reference correlations");
  ReferenceCorrelations rc;
  rc.source = detail::require_string(doc, "source", "reference correlations");
  const auto& labels = detail::require(doc, "labels", "reference correlations");
  for (const auto& l : labels) rc.labels.push_back(l.get<std::string>());
  auto known = [&](const std::string& l) {
    return std::find(rc.labels.begin(), rc.labels.end(), l) != rc.labels.end();
  };
  for (const auto& [row, cols] : detail::require(doc, "upper", "reference correlations").items()) {
    if (!known(row)) invalid("reference correlations", "unknown label '" + row + "'");
    for (const auto& [col, text] : cols.items()) {
      if (!known(col)) invalid("reference correlations", "unknown label '" + col + "'");
      rc.upper[{row, col}] = text.get<std::string>();
    }
  }
  return rc;
}

}  // namespace surveyor
