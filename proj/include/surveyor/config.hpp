#pragma once

// Pipeline configuration file.
//
//   {
//     "instrument": "hexaco60" | "path/to/definition.json",
//     "mode": "stateless" | "memory",
//     "temperatures": [0.0, 0.5, 1.0] | {"from": 0.0, "to": 1.0, "step": 0.1},
//     "samples_per_cell": 100, "samples_at_zero": 1,
//     "max_tokens": 16, "seed": 1, "context_limit": 4000,
//     "backend": {"kind": "scripted" | "replay" | "http", "model": "...",
//                 "endpoint": "...", "parallelism": 4,
//                 "rate_limit_per_minute": 60, "burst": 1,
//                 "retry": {"max_attempts": 5, "base_delay_seconds": 1.0},
//                 "timeout_seconds": 60, "replay_log": "...", "scripted": {...}},
//     "analysis": {"baselines": "...", "reference_correlations": "...",
//                  "gender_map": "...", "rounding": 2,
//                  "number_style": "fixed" | "shortest"}
//   }
//
// Relative paths resolve against the config file's directory, then against
// the bundled data directory. Bare instrument names resolve to bundled
// definitions. API keys are never read from here.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surveyor/backend.hpp"
#include "surveyor/error.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/prompt.hpp"

#ifndef SURVEYOR_DATA_DIR
#define SURVEYOR_DATA_DIR "data"
#endif
#ifndef SURVEYOR_VERSION
#define SURVEYOR_VERSION "0.0.0"
#endif

namespace surveyor {

namespace fs = std::filesystem;

inline fs::path bundled_data_dir() {
  if (const char* env = std::getenv("SURVEYOR_DATA_DIR")) return env;
  return SURVEYOR_DATA_DIR;
}

enum class NumberStyle { fixed, shortest };

struct BackendSettings {
  std::string kind = "scripted";
  std::string model = "scripted";
  std::string endpoint;
  int parallelism = 1;
  std::optional<double> rate_limit_per_minute;  // default: 60 for http, unlimited otherwise
  double burst = 1;
  RetryPolicy retry;
  double timeout_seconds = 60;
  std::string replay_log;
  nlohmann::json scripted;

  double effective_rate() const { return rate_limit_per_minute.value_or(kind == "http" ? 60.0 : 0.0); }
};

struct AnalysisSettings {
  std::string baselines;
  std::string reference_correlations;
  std::string gender_map;
  int rounding = 2;
  NumberStyle number_style = NumberStyle::fixed;
};

struct RunConfig {
  std::string instrument;  // as written in the file
  fs::path instrument_path;
  PromptMode mode = PromptMode::stateless;
  std::vector<double> temperatures;
  int samples_per_cell = 100;
  int samples_at_zero = 1;
  std::optional<int> max_tokens;
  std::uint64_t seed = 0;
  std::int64_t context_limit = 4000;
  BackendSettings backend;
  AnalysisSettings analysis;

  int samples_at(double t) const { return t == 0.0 ? samples_at_zero : samples_per_cell; }
  int effective_max_tokens(const Instrument& ins) const {
    return max_tokens.value_or(ins.kind == InstrumentKind::likert ? 16 : 32);
  }
};

namespace detail {

inline void reject_secrets(const nlohmann::json& j, const std::string& where) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      std::string lk;
      for (char c : k) lk += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lk == "api_key" || lk == "apikey" || lk == "authorization" || lk == "token")
        throw ValidationError("config: key '" + where + k + "' is not allowed; supply the API key via the " +
                              "SURVEYOR_API_KEY environment variable");
      reject_secrets(v, where + k + ".");
    }
  } else if (j.is_array()) {
    for (const auto& v : j) reject_secrets(v, where);
  }
}

inline std::vector<double> temperature_grid(const nlohmann::json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& t : j) {
      if (!t.is_number()) throw ValidationError("config: temperatures must be numbers");
      out.push_back(t.get<double>());
    }
  } else if (j.is_object()) {
    const double from = j.at("from").get<double>(), to = j.at("to").get<double>(), step = j.at("step").get<double>();
    if (!(step > 0)) throw ValidationError("config: temperatures.step must be > 0");
    for (int i = 0;; ++i) {
      // snap to 10 decimals so 0.1 * 3 is written as 0.3
      const double t = std::round((from + i * step) * 1e10) / 1e10;
      if (t > to + 1e-12) break;
      out.push_back(t);
    }
  } else {
    throw ValidationError("config: temperatures must be a list or {from,to,step}");
  }
  if (out.empty()) throw ValidationError("config: no temperatures");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0 && out[i] <= 1.0))
      throw ValidationError("config: temperature " + io::format_double(out[i]) + " outside [0,1]");
    if (i > 0 && out[i] <= out[i - 1])
      throw ValidationError("config: temperatures must be strictly ascending (" + io::format_double(out[i - 1]) + ", " +
                            io::format_double(out[i]) + ")");
  }
  return out;
}

}  // namespace detail

/// Resolves `p` against `base_dir`, then the bundled data directory.
inline fs::path resolve_path(const std::string& p, const fs::path& base_dir) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  if (fs::exists(base_dir / path)) return base_dir / path;
  if (fs::exists(bundled_data_dir() / path)) return bundled_data_dir() / path;
  return base_dir / path;
}

inline fs::path resolve_instrument(const std::string& name, const fs::path& base_dir) {
  const fs::path bundled = bundled_data_dir() / "instruments" / (name + ".json");
  if (name.find('/') == std::string::npos && name.find(".json") == std::string::npos && fs::exists(bundled)) return bundled;
  return resolve_path(name, base_dir);
}

inline RunConfig parse_run_config(std::string_view document, const fs::path& base_dir = ".") {
  const auto j = detail::parse_document(document, "config");
  if (!j.is_object()) throw ValidationError("config: document must be an object");
  detail::reject_secrets(j, "");
  RunConfig c;
  try {
    c.instrument = detail::require_string(j, "instrument", "config");
    c.instrument_path = resolve_instrument(c.instrument, base_dir);
    const auto mode = j.value("mode", std::string("stateless"));
    if (mode == "stateless")
      c.mode = PromptMode::stateless;
    else if (mode == "memory")
      c.mode = PromptMode::memory;
    else
      throw ValidationError("config: mode must be 'stateless' or 'memory', got '" + mode + "'");
    c.temperatures = detail::temperature_grid(detail::require(j, "temperatures", "config"));
    c.samples_per_cell = j.value("samples_per_cell", 100);
    c.samples_at_zero = j.value("samples_at_zero", 1);
    if (c.samples_per_cell < 1 || c.samples_at_zero < 1) throw ValidationError("config: sample counts must be >= 1");
    if (j.contains("max_tokens")) {
      c.max_tokens = j["max_tokens"].get<int>();
      if (*c.max_tokens < 1) throw ValidationError("config: max_tokens must be >= 1");
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.context_limit = j.value("context_limit", std::int64_t{4000});
    if (c.context_limit < 1) throw ValidationError("config: context_limit must be >= 1");

    if (j.contains("backend")) {
      const auto& b = j["backend"];
      if (!b.is_object()) throw ValidationError("config: backend must be an object");
      c.backend.kind = b.value("kind", c.backend.kind);
      if (c.backend.kind != "scripted" && c.backend.kind != "replay" && c.backend.kind != "http")
        throw ValidationError("config: backend.kind must be scripted, replay or http, got '" + c.backend.kind + "'");
      c.backend.model = b.value("model", c.backend.kind == "http" ? std::string("davinci") : c.backend.kind);
      c.backend.endpoint = b.value("endpoint", std::string());
      c.backend.parallelism = b.value("parallelism", 1);
      if (c.backend.parallelism < 1) throw ValidationError("config: backend.parallelism must be >= 1");
      if (b.contains("rate_limit_per_minute")) c.backend.rate_limit_per_minute = b["rate_limit_per_minute"].get<double>();
      c.backend.burst = b.value("burst", 1.0);
      if (b.contains("retry")) {
        const auto& r = b["retry"];
        c.backend.retry.max_attempts = r.value("max_attempts", c.backend.retry.max_attempts);
        c.backend.retry.base_delay_seconds = r.value("base_delay_seconds", c.backend.retry.base_delay_seconds);
        c.backend.retry.multiplier = r.value("multiplier", c.backend.retry.multiplier);
        c.backend.retry.max_delay_seconds = r.value("max_delay_seconds", c.backend.retry.max_delay_seconds);
        if (c.backend.retry.max_attempts < 1) throw ValidationError("config: backend.retry.max_attempts must be >= 1");
      }
      c.backend.timeout_seconds = b.value("timeout_seconds", 60.0);
      if (b.contains("replay_log")) c.backend.replay_log = resolve_path(b["replay_log"].get<std::string>(), base_dir).string();
      if (b.contains("scripted")) c.backend.scripted = b["scripted"];
      if (c.backend.kind == "replay" && c.backend.replay_log.empty())
        throw ValidationError("config: backend.replay_log is required for the replay backend");
      if (c.backend.kind == "http" && c.backend.endpoint.empty())
        c.backend.endpoint = "https://api.openai.com/v1/completions";
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      auto path = [&](const char* key) {
        return a.contains(key) ? resolve_path(a[key].get<std::string>(), base_dir).string() : std::string();
      };
      c.analysis.baselines = path("baselines");
      c.analysis.reference_correlations = path("reference_correlations");
      c.analysis.gender_map = path("gender_map");
      c.analysis.rounding = a.value("rounding", 2);
      if (c.analysis.rounding < 0) throw ValidationError("config: analysis.rounding must be >= 0");
      const auto style = a.value("number_style", std::string("fixed"));
      if (style == "fixed")
        c.analysis.number_style = NumberStyle::fixed;
      else if (style == "shortest")
        c.analysis.number_style = NumberStyle::shortest;
      else
        throw ValidationError("config: analysis.number_style must be 'fixed' or 'shortest'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(io::read_file(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

/// Normalized form written into the manifest. Paths are reduced to file names
/// so manifests do not depend on where the checkout lives.
inline nlohmann::ordered_json to_json(const RunConfig& c, const Instrument& ins) {
  nlohmann::ordered_json j;
  j["instrument"] = ins.id;
  j["mode"] = std::string(to_string(c.mode));
  j["temperatures"] = c.temperatures;
  j["samples_per_cell"] = c.samples_per_cell;
  j["samples_at_zero"] = c.samples_at_zero;
  j["max_tokens"] = c.effective_max_tokens(ins);
  j["seed"] = c.seed;
  j["context_limit"] = c.context_limit;
  auto& b = j["backend"];
  b["kind"] = c.backend.kind;
  b["model"] = c.backend.model;
  if (!c.backend.endpoint.empty()) b["endpoint"] = c.backend.endpoint;
  b["parallelism"] = c.backend.parallelism;
  b["rate_limit_per_minute"] = c.backend.effective_rate();
  b["retry"] = {{"max_attempts", c.backend.retry.max_attempts},
                {"base_delay_seconds", c.backend.retry.base_delay_seconds},
                {"multiplier", c.backend.retry.multiplier},
                {"max_delay_seconds", c.backend.retry.max_delay_seconds}};
  if (!c.backend.replay_log.empty()) b["replay_log"] = fs::path(c.backend.replay_log).filename().string();
  if (!c.backend.scripted.is_null()) b["scripted"] = nlohmann::ordered_json::parse(c.backend.scripted.dump());
  return j;
}

}  // namespace surveyor
