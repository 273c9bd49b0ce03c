#pragma once

// Adapter for externally published response tables. Every layout assumption
// lives here.
//
// A dataset directory holds one CSV per (instrument, mode), named
// `<instrument>_<mode>.csv` with mode `stateless` or `memory`:
//
//   item,temperature,response[,rep|chain][,prompt]
//
// `item` is an item id or a 1-based ordinal. Without a rep/chain column,
// stateless reps count up per (item, temperature) in file order, and memory
// chains are cut wherever ordinal 1 starts again within a temperature. A
// `prompt` column, when present, is checked against the re-rendered prompt.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surveyor/config.hpp"
#include "surveyor/csv.hpp"
#include "surveyor/error.hpp"
#include "surveyor/hash.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/prompt.hpp"
#include "surveyor/records.hpp"
#include "surveyor/runner.hpp"

namespace surveyor {

inline const std::vector<std::string> kIngestRequiredColumns{"item", "temperature", "response"};
inline const std::vector<std::string> kIngestOptionalColumns{"rep", "chain", "prompt"};

struct IngestSource {
  std::filesystem::path path;
  std::string instrument;
  PromptMode mode = PromptMode::stateless;
};

struct IngestResult {
  IngestSource source;
  std::vector<RawResponse> records;  // canonical order
  std::size_t source_rows = 0;
  std::size_t chains = 0;            // memory mode
  std::size_t prompts_verified = 0;  // rows whose stored prompt matched
  RunConfig config;                  // synthesized for the manifest
  std::string source_sha256;
};

/// Finds `<instrument>_<mode>.csv` files. Other files are ignored.
inline std::vector<IngestSource> discover_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("dataset directory not found: " + dir.string());
  std::vector<IngestSource> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const auto stem = e.path().stem().string();
    const auto us = stem.rfind('_');
    if (us == std::string::npos) continue;
    const auto mode = stem.substr(us + 1);
    if (mode != "stateless" && mode != "memory") continue;
    out.push_back({e.path(), stem.substr(0, us), mode == "memory" ? PromptMode::memory : PromptMode::stateless});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  if (out.empty()) throw ValidationError("no <instrument>_<mode>.csv files in " + dir.string());
  return out;
}

namespace detail {

inline void check_schema(const csv::Row& header, const std::string& file) {
  std::set<std::string> have(header.begin(), header.end());
  std::vector<std::string> missing, unexpected;
  for (const auto& c : kIngestRequiredColumns)
    if (!have.count(c)) missing.push_back(c);
  for (const auto& c : header)
    if (std::find(kIngestRequiredColumns.begin(), kIngestRequiredColumns.end(), c) == kIngestRequiredColumns.end() &&
        std::find(kIngestOptionalColumns.begin(), kIngestOptionalColumns.end(), c) == kIngestOptionalColumns.end())
      unexpected.push_back(c);
  if (missing.empty() && unexpected.empty()) return;
  std::string msg = file + ": schema mismatch;";
  for (const auto& c : missing) msg += " -" + c;
  for (const auto& c : unexpected) msg += " +" + c;
  throw ValidationError(msg);
}

inline const Item& find_item(const Instrument& ins, const std::string& key, const std::string& where) {
  for (const auto& it : ins.items)
    if (it.id == key) return it;
  if (!key.empty() && std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const int ord = std::stoi(key);
    for (const auto& it : ins.items)
      if (it.ordinal == ord) return it;
  }
  throw ValidationError(where + ": unknown item '" + key + "' for instrument " + ins.id);
}

}  // namespace detail

inline IngestResult ingest_file(const IngestSource& src, const Instrument& ins) {
  if (ins.id != src.instrument)
    throw ValidationError(src.path.filename().string() + ": file names instrument '" + src.instrument + "' but definition is '" +
                          ins.id + "'");
  const std::string text = io::read_file(src.path);
  auto rows = csv::parse(text);
  const std::string fname = src.path.filename().string();
  if (rows.empty()) throw ValidationError(fname + ": empty file");
  const auto header = rows.front();
  detail::check_schema(header, fname);
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_item = *col("item"), c_temp = *col("temperature"), c_resp = *col("response");
  const auto c_rep = col("rep") ? col("rep") : col("chain");
  const auto c_prompt = col("prompt");

  IngestResult res;
  res.source = src;
  res.source_sha256 = sha256_hex(text);

  struct Row {
    const Item* item;
    double t;
    std::optional<int> rep;
    std::string response;
    std::optional<std::string> prompt;
    std::size_t line;
  };
  std::vector<Row> parsed;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;  // trailing blank line
    const std::string where = fname + " row " + std::to_string(i + 1);
    if (r.size() != header.size())
      throw ValidationError(where + ": " + std::to_string(r.size()) + " fields, header has " + std::to_string(header.size()));
    const auto t = io::parse_double(r[c_temp]);
    if (!t || *t < 0 || *t > 1) throw ValidationError(where + ": bad temperature '" + r[c_temp] + "'");
    Row row{&detail::find_item(ins, r[c_item], where), *t, std::nullopt, r[c_resp], std::nullopt, i + 1};
    if (c_rep) {
      const auto v = io::parse_double(r[*c_rep]);
      if (!v || *v < 0 || *v != std::floor(*v)) throw ValidationError(where + ": bad rep '" + r[*c_rep] + "'");
      row.rep = static_cast<int>(*v);
    }
    if (c_prompt) row.prompt = r[*c_prompt];
    parsed.push_back(std::move(row));
  }
  res.source_rows = parsed.size();

  auto make = [&](const Row& row, int rep, const std::string& rendered) {
    if (row.prompt) {
      if (*row.prompt != rendered)
        throw ValidationError(fname + " row " + std::to_string(row.line) + ": stored prompt differs from the rendered prompt for " +
                              row.item->id);
      ++res.prompts_verified;
    }
    RawResponse r;
    r.instrument_id = ins.id;
    r.item_id = row.item->id;
    r.temperature = row.t;
    r.rep = rep;
    r.prompt_hash = sha256_hex(rendered);
    r.raw_text = row.response;
    r.backend_meta["backend"] = "ingest";
    r.backend_meta["source"] = fname;
    r.backend_meta["mode"] = std::string(to_string(src.mode));
    return r;
  };

  if (src.mode == PromptMode::stateless) {
    std::map<std::pair<std::string, double>, int> next;
    std::set<std::tuple<std::string, double, int>> seen;
    for (const auto& row : parsed) {
      const int rep = row.rep ? *row.rep : next[{row.item->id, row.t}]++;
      if (!seen.insert({row.item->id, row.t, rep}).second)
        throw ValidationError(fname + " row " + std::to_string(row.line) + ": duplicate (item, temperature, rep)");
      res.records.push_back(make(row, rep, render_stateless(ins, *row.item).text));
    }
  } else {
    // Group rows into chains, keeping file order within each chain.
    std::map<std::pair<double, int>, std::vector<const Row*>> chains;
    std::map<double, int> chain_count;
    for (const auto& row : parsed) {
      int rep;
      if (row.rep) {
        rep = *row.rep;
      } else {
        if (row.item->ordinal == 1) ++chain_count[row.t];
        rep = chain_count[row.t] - 1;
        if (rep < 0)
          throw ProtocolError(fname + " row " + std::to_string(row.line) + ": chain does not start at item ordinal 1");
      }
      chains[{row.t, rep}].push_back(&row);
    }
    for (const auto& [key, members] : chains) {
      std::vector<PromptExchange> history;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const Row& row = *members[k];
        if (row.item->ordinal != static_cast<int>(k) + 1)
          throw ProtocolError(fname + " row " + std::to_string(row.line) + ": chain temperature=" + io::format_double(key.first) +
                              " rep=" + std::to_string(key.second) + " expected ordinal " + std::to_string(k + 1) + ", got " +
                              std::to_string(row.item->ordinal));
        const auto prompt = render_with_memory(ins, *row.item, history);
        auto rec = make(row, key.second, prompt.text);
        if (members.size() < ins.items.size()) rec.backend_meta["partial"] = "true";
        res.records.push_back(std::move(rec));
        history.push_back({row.item->ordinal, row.item->text, history_answer(row.response)});
      }
    }
    res.chains = chains.size();
  }
  canonical_sort(res.records, [&](const std::string& id) { return ins.item(id).ordinal; });

  // Synthesized run configuration describing what the file contains.
  std::map<double, std::map<std::string, int>> per_cell;
  for (const auto& r : res.records) ++per_cell[r.temperature][r.item_id];
  auto& c = res.config;
  c.instrument = ins.id;
  c.mode = src.mode;
  c.samples_per_cell = 0;
  c.samples_at_zero = 0;
  for (const auto& [t, items] : per_cell) {
    c.temperatures.push_back(t);
    int mx = 0;
    for (const auto& [id, n] : items) mx = std::max(mx, n);
    (t == 0.0 ? c.samples_at_zero : c.samples_per_cell) = std::max(t == 0.0 ? c.samples_at_zero : c.samples_per_cell, mx);
  }
  c.backend.kind = "ingest";
  c.backend.model = "published-dataset";
  return res;
}

inline nlohmann::ordered_json ingest_manifest(const IngestResult& r, const Instrument& ins) {
  auto m = make_manifest(r.config, ins);
  m["source"] = {{"file", r.source.path.filename().string()},
                 {"sha256", r.source_sha256},
                 {"rows", r.source_rows},
                 {"records", r.records.size()}};
  return m;
}

}  // namespace surveyor
