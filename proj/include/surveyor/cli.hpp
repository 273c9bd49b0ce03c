#pragma once

// Pipeline stages as commands over a run directory:
//
//   run     config            -> raw.jsonl, manifest.json
//   ingest  dataset dir       -> <instrument>_<mode>/raw.jsonl, manifest.json
//   parse   run dir           -> cleaned.jsonl, cleaning_report.json
//   score   run dir           -> profiles.csv (likert) | demographics.csv
//   analyze profiles file     -> results.json, tables/*.csv, tables/*.md
//   report  profiles file     -> tables/*.csv, tables/*.md, report.md
//
// Exit codes: 0 ok, 1 user or config error, 2 backend/runtime failure,
// 3 partial completion.
//
// Include after Eigen-using headers (this pulls in the HTTP backend).

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surveyor/analysis.hpp"
#include "surveyor/backend.hpp"
#include "surveyor/config.hpp"
#include "surveyor/error.hpp"
#include "surveyor/hash.hpp"
#include "surveyor/ingest.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/parse.hpp"
#include "surveyor/records.hpp"
#include "surveyor/report.hpp"
#include "surveyor/runner.hpp"
#include "surveyor/score.hpp"
#include "surveyor/http_backend.hpp"

namespace surveyor::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUserError = 1, kRuntimeError = 2, kPartial = 3 };

struct CommandOutcome {
  int exit_code = kOk;
  std::vector<std::string> summary;
  std::vector<fs::path> artifact_paths;
};

struct Options {
  std::optional<fs::path> config;
  fs::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool dry_run = false;
  bool verbose = false;
};

inline constexpr const char* kRaw = "raw.jsonl";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kCleaned = "cleaned.jsonl";
inline constexpr const char* kCleaningReport = "cleaning_report.json";
inline constexpr const char* kProfiles = "profiles.csv";
inline constexpr const char* kDemographics = "demographics.csv";
inline constexpr const char* kResults = "results.json";
inline constexpr const char* kReport = "report.md";

namespace detail {

inline void log(const Options& o, const std::string& line) {
  if (o.verbose) std::cerr << "[surveyor] " << line << '\n';
}

inline void write(CommandOutcome& out, const fs::path& path, std::string_view content) {
  io::write_atomic(path, content);
  out.artifact_paths.push_back(path);
}

/// Maps exceptions to exit codes; the message becomes the last summary line.
inline CommandOutcome guarded(const std::function<CommandOutcome()>& body) {
  try {
    return body();
  } catch (const ContextLimitError& e) {
    return {kUserError, {std::string("error: ") + e.what()}, {}};
  } catch (const BackendError& e) {
    return {kRuntimeError, {std::string("error: ") + e.what()}, {}};
  } catch (const ValidationError& e) {
    return {kUserError, {std::string("error: ") + e.what()}, {}};
  } catch (const ProtocolError& e) {
    return {kUserError, {std::string("error: ") + e.what()}, {}};
  } catch (const fs::filesystem_error& e) {
    return {kUserError, {std::string("error: ") + e.what()}, {}};
  } catch (const std::exception& e) {
    return {kRuntimeError, {std::string("error: ") + e.what()}, {}};
  }
}

inline RunConfig require_config(const Options& o) {
  if (!o.config) throw ValidationError("--config is required for this command");
  auto cfg = load_run_config(*o.config);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

struct RunDir {
  nlohmann::ordered_json manifest;
  std::string manifest_sha256;
  Instrument instrument;
  PromptMode mode = PromptMode::stateless;
};

/// The manifest carries the instrument definition, so later stages need only
/// the run directory.
inline RunDir open_run_dir(const fs::path& dir) {
  const auto text = io::read_file(dir / kManifest);
  RunDir rd;
  try {
    rd.manifest = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / kManifest).string() + ": " + e.what());
  }
  rd.manifest_sha256 = sha256_hex(text);
  if (!rd.manifest.contains("instrument_definition")) throw ValidationError("manifest lacks instrument_definition");
  rd.instrument = load_instrument(rd.manifest["instrument_definition"].dump());
  const auto expected = rd.manifest["instrument"].value("sha256", std::string());
  if (sha256_hex(serialize(rd.instrument)) != expected)
    throw ValidationError("manifest instrument hash does not match its embedded definition");
  rd.mode = rd.manifest["run_config"].value("mode", std::string("stateless")) == "memory" ? PromptMode::memory
                                                                                          : PromptMode::stateless;
  return rd;
}

inline std::optional<std::string> manifest_hash_near(const fs::path& file) {
  const auto m = file.parent_path() / kManifest;
  if (!fs::exists(m)) return std::nullopt;
  return sha256_hex(io::read_file(m));
}

inline std::unique_ptr<Backend> make_backend(const RunConfig& cfg, const Instrument& ins) {
  if (cfg.backend.kind == "scripted")
    return std::make_unique<ScriptedBackend>(ins, scripted_settings_from_json(cfg.backend.scripted), cfg.seed);
  if (cfg.backend.kind == "replay")
    return std::make_unique<ReplayBackend>(records::parse_raw_log(io::read_file(cfg.backend.replay_log)));
  if (cfg.backend.kind == "http") {
    HttpSettings hs;
    hs.endpoint = cfg.backend.endpoint;
    hs.timeout_seconds = cfg.backend.timeout_seconds;
    return std::make_unique<HttpBackend>(HttpBackend::from_environment(hs));
  }
  throw ValidationError("unknown backend kind '" + cfg.backend.kind + "'");
}

inline std::string scale_text(const Instrument& ins) {
  if (!ins.scale) return "free text";
  return "scale " + std::to_string(ins.scale->min) + "–" + std::to_string(ins.scale->max);
}

inline AnalysisInputs analysis_inputs(const std::optional<RunConfig>& cfg, const std::string& instrument_id,
                                      const std::optional<Instrument>& ins, const fs::path& profiles_path) {
  AnalysisInputs in;
  if (cfg) {
    in.rounding = cfg->analysis.rounding;
    in.number_style = cfg->analysis.number_style;
  }
  in.manifest_sha256 = manifest_hash_near(profiles_path).value_or("");
  const fs::path data = bundled_data_dir() / "baselines";
  fs::path baselines = cfg && !cfg->analysis.baselines.empty() ? fs::path(cfg->analysis.baselines)
                                                              : data / (instrument_id + "_baselines.json");
  fs::path reference = cfg && !cfg->analysis.reference_correlations.empty() ? fs::path(cfg->analysis.reference_correlations)
                                                                           : data / (instrument_id + "_correlations.json");
  if (ins && fs::exists(baselines)) in.baselines = load_baselines_file(baselines, *ins);
  if (fs::exists(reference)) in.reference = load_reference_correlations(io::read_file(reference));
  return in;
}

inline std::optional<Instrument> bundled_instrument(const std::string& id) {
  const auto p = bundled_data_dir() / "instruments" / (id + ".json");
  if (!fs::exists(p)) return std::nullopt;
  return load_instrument_file(p);
}

struct Analyzed {
  AnalysisResult result;
  std::string instrument_id;
};

inline Analyzed analyze_file(const fs::path& profiles_path, const std::optional<RunConfig>& cfg) {
  const auto text = io::read_file(profiles_path);
  const auto rows = csv::parse(text);
  if (rows.empty()) throw ValidationError(profiles_path.string() + ": empty profiles file");
  const bool demographics = rows[0] == csv::Row{"instrument", "temperature", "rep", "age", "gender"};
  if (demographics) {
    if (rows.size() < 2) throw ValidationError(profiles_path.string() + ": no records");
    const std::string id = rows[1][0];
    const auto recs = parse_demographics_csv(text);
    return {analyze_demographics(recs, id, analysis_inputs(cfg, id, std::nullopt, profiles_path)), id};
  }
  const auto p = parse_profiles_csv(text);
  std::optional<Instrument> ins;
  if (cfg) {
    auto loaded = load_instrument_file(cfg->instrument_path);
    if (loaded.id == p.instrument_id) ins = std::move(loaded);
  }
  if (!ins) ins = bundled_instrument(p.instrument_id);
  return {analyze_profiles(p, analysis_inputs(cfg, p.instrument_id, ins, profiles_path)), p.instrument_id};
}

inline void write_tables(CommandOutcome& out, const AnalysisResult& r, const fs::path& dir) {
  for (const auto& t : r.tables) {
    write(out, dir / "tables" / (t.csv.id + ".csv"), to_csv(t.csv));
    write(out, dir / "tables" / (t.markdown.id + ".md"), to_markdown(t.markdown));
  }
}

}  // namespace detail

inline CommandOutcome cmd_validate(const fs::path& instrument_path) {
  return detail::guarded([&] {
    const auto ins = load_instrument_file(instrument_path);
    CommandOutcome out;
    out.summary.push_back(ins.id + " " + ins.version + ": " + std::to_string(ins.items.size()) + " items, " +
                          std::to_string(ins.constructs.size()) + " constructs, " + detail::scale_text(ins));
    return out;
  });
}

inline CommandOutcome cmd_run(const Options& o) {
  return detail::guarded([&] {
    const auto cfg = detail::require_config(o);
    const auto ins = load_instrument_file(cfg.instrument_path);
    CommandOutcome out;
    if (o.dry_run) {
      const auto plan = plan_run(cfg, ins);
      out.summary.push_back("dry run: " + std::to_string(plan.requests) + " requests, nothing sent");
      out.summary.push_back("max prompt estimate " + std::to_string(plan.max_token_estimate) + " tokens (item " + plan.max_item +
                            "), context limit " + std::to_string(cfg.context_limit) + (plan.fits ? ", fits" : ", DOES NOT FIT"));
      out.exit_code = plan.fits ? kOk : kUserError;
      return out;
    }
    const auto plan = plan_run(cfg, ins);
    if (!plan.fits)
      throw ContextLimitError("item " + plan.max_item + " prompt estimated at " + std::to_string(plan.max_token_estimate) +
                              " tokens does not fit context limit " + std::to_string(cfg.context_limit) + "; nothing sent");
    auto backend = detail::make_backend(cfg, ins);
    GuardedClient client(*backend, cfg.backend.retry, cfg.backend.effective_rate(), cfg.backend.burst, cfg.context_limit, cfg.seed);
    detail::log(o, "running " + std::to_string(plan.requests) + " requests against " + backend->kind());
    const auto res = run(cfg, ins, client);
    const auto manifest = manifest_text(make_manifest(cfg, ins));
    detail::write(out, o.out_dir / kManifest, manifest);
    detail::write(out, o.out_dir / kRaw, records::to_jsonl(res.records));
    out.summary.push_back(std::to_string(res.records.size()) + " records, " + std::to_string(res.requests_sent) + " requests, " +
                          std::to_string(res.retries) + " retries");
    out.summary.push_back("manifest sha256 " + sha256_hex(manifest));
    for (const auto& f : res.failures) out.summary.push_back("failed: " + f);
    if (!res.complete()) out.exit_code = res.records.empty() ? kRuntimeError : kPartial;
    return out;
  });
}

inline CommandOutcome cmd_ingest(const fs::path& dataset_dir, const Options& o) {
  return detail::guarded([&] {
    CommandOutcome out;
    for (const auto& src : discover_dataset(dataset_dir)) {
      const auto ins = detail::bundled_instrument(src.instrument);
      if (!ins) throw ValidationError(src.path.filename().string() + ": no bundled instrument '" + src.instrument + "'");
      const auto res = ingest_file(src, *ins);
      const fs::path dir = o.out_dir / src.path.stem();
      detail::write(out, dir / kManifest, manifest_text(ingest_manifest(res, *ins)));
      detail::write(out, dir / kRaw, records::to_jsonl(res.records));
      std::string line = src.path.filename().string() + ": " + std::to_string(res.source_rows) + " rows -> " +
                         std::to_string(res.records.size()) + " records";
      if (src.mode == PromptMode::memory) line += ", " + std::to_string(res.chains) + " chains";
      if (res.prompts_verified) line += ", " + std::to_string(res.prompts_verified) + " prompts verified";
      out.summary.push_back(line);
    }
    return out;
  });
}

inline CommandOutcome cmd_parse(const Options& o) {
  return detail::guarded([&] {
    const auto rd = detail::open_run_dir(o.out_dir);
    GenderMap gmap = default_gender_map();
    if (o.config) {
      const auto cfg = detail::require_config(o);
      if (!cfg.analysis.gender_map.empty()) gmap = load_gender_map_file(cfg.analysis.gender_map);
    }
    const auto log = records::parse_raw_log(io::read_file(o.out_dir / kRaw));
    const auto cleaned = clean_run(log, rd.instrument, gmap);
    auto report = to_json(cleaned.report);
    report["manifest_sha256"] = rd.manifest_sha256;
    CommandOutcome out;
    detail::write(out, o.out_dir / kCleaned, records::to_jsonl(cleaned.answers));
    detail::write(out, o.out_dir / kCleaningReport, report.dump(2) + "\n");
    out.summary.push_back(std::to_string(cleaned.report.total) + " records, " + std::to_string(cleaned.report.na_count) +
                          " NA (" + format_number(100.0 * cleaned.report.na_rate, 2) + "%)");
    return out;
  });
}

inline CommandOutcome cmd_score(const Options& o) {
  return detail::guarded([&] {
    const auto rd = detail::open_run_dir(o.out_dir);
    const auto answers = records::parse_cleaned(io::read_file(o.out_dir / kCleaned));
    CommandOutcome out;
    if (rd.instrument.kind == InstrumentKind::free_text) {
      const auto recs = assemble_demographics(answers, rd.instrument);
      detail::write(out, o.out_dir / kDemographics, format_demographics_csv(recs, rd.instrument.id));
      out.summary.push_back(std::to_string(recs.size()) + " demographic records");
    } else {
      const auto profiles = assemble_respondents(answers, rd.instrument, rd.mode, default_policy(rd.instrument));
      detail::write(out, o.out_dir / kProfiles, format_profiles_csv(profiles, rd.instrument));
      out.summary.push_back(std::to_string(profiles.size()) + " respondent profiles");
    }
    return out;
  });
}

inline fs::path default_profiles(const Options& o) {
  return fs::exists(o.out_dir / kProfiles) ? o.out_dir / kProfiles : o.out_dir / kDemographics;
}

inline CommandOutcome cmd_analyze(const fs::path& profiles_path, const Options& o) {
  return detail::guarded([&] {
    std::optional<RunConfig> cfg;
    if (o.config) cfg = detail::require_config(o);
    const auto a = detail::analyze_file(profiles_path, cfg);
    CommandOutcome out;
    detail::write(out, o.out_dir / kResults, a.result.bundle.dump(2) + "\n");
    detail::write_tables(out, a.result, o.out_dir);
    out.summary.push_back(a.instrument_id + ": " + std::to_string(a.result.tables.size()) + " tables");
    for (const auto& w : a.result.warnings) out.summary.push_back("warning: " + w);
    return out;
  });
}

inline CommandOutcome cmd_report(const fs::path& profiles_path, const Options& o) {
  return detail::guarded([&] {
    std::optional<RunConfig> cfg;
    if (o.config) cfg = detail::require_config(o);
    const auto a = detail::analyze_file(profiles_path, cfg);
    CommandOutcome out;
    detail::write_tables(out, a.result, o.out_dir);
    detail::write(out, o.out_dir / kReport, markdown_report(a.result, a.instrument_id));
    out.summary.push_back(a.instrument_id + ": report with " + std::to_string(a.result.tables.size()) + " tables");
    return out;
  });
}

}  // namespace surveyor::cli
