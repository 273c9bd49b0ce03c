#pragma once

// Sampling protocol: temperature sweep x items x repetitions (stateless), or
// temperature sweep x chains walking the items in order (memory).

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "surveyor/backend.hpp"
#include "surveyor/config.hpp"
#include "surveyor/hash.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/prompt.hpp"
#include "surveyor/records.hpp"

namespace surveyor {

struct RunOutput {
  std::vector<RawResponse> records;      // canonical order
  std::vector<std::string> failures;     // failed cells or chains, human readable
  std::size_t partial_chains = 0;
  long requests_sent = 0;
  long retries = 0;

  bool complete() const { return failures.empty(); }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

namespace detail {

// Runs task(i) for i in [0, count) on up to `workers` threads. The first
// non-backend exception is rethrown after all workers stop.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, workers));
  if (n == 1 || count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::min(n, count); ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline RawResponse make_record(const Instrument& ins, const Item& item, double t, int rep, const std::string& prompt,
                               std::string text, const RunConfig& cfg, const Backend& backend, int attempts) {
  RawResponse r;
  r.instrument_id = ins.id;
  r.item_id = item.id;
  r.temperature = t;
  r.rep = rep;
  r.prompt_hash = sha256_hex(prompt);
  r.raw_text = std::move(text);
  r.timestamp = utc_timestamp();
  r.backend_meta["backend"] = backend.kind();
  r.backend_meta["model"] = cfg.backend.model;
  r.backend_meta["max_tokens"] = std::to_string(cfg.effective_max_tokens(ins));
  r.backend_meta["attempts"] = std::to_string(attempts);
  r.backend_meta["mode"] = std::string(to_string(cfg.mode));
  return r;
}

inline void finish(RunOutput& out, const Instrument& ins, GuardedClient& client) {
  canonical_sort(out.records, [&](const std::string& id) { return ins.item(id).ordinal; });
  out.requests_sent = client.counters.sent;
  out.retries = client.counters.retries;
}

inline std::string fmt_t(double t) { return io::format_double(t); }

}  // namespace detail

/// Answer text as it goes back into a memory prompt: newlines removed,
/// everything else verbatim (a leading space stays).
inline std::string history_answer(std::string_view raw) {
  std::string out;
  for (char c : raw)
    if (c != '\n' && c != '\r') out += c;
  return out;
}

/// Refuses before sending anything if a stateless prompt cannot fit.
inline void preflight_stateless(const RunConfig& cfg, const Instrument& ins) {
  for (const auto& item : ins.items) {
    const auto p = render_stateless(ins, item);
    if (!fits_context(p.token_estimate, cfg.context_limit))
      throw ContextLimitError("item " + item.id + " prompt estimated at " + std::to_string(p.token_estimate) +
                              " tokens does not fit context limit " + std::to_string(cfg.context_limit));
  }
}

inline RunOutput run_stateless(const RunConfig& cfg, const Instrument& ins, GuardedClient& client) {
  if (cfg.mode != PromptMode::stateless) throw ContractViolation("run_stateless needs mode stateless");
  preflight_stateless(cfg, ins);
  struct Cell {
    const Item* item;
    double t;
  };
  std::vector<Cell> cells;
  for (const auto& item : ins.items)
    for (double t : cfg.temperatures) cells.push_back({&item, t});

  std::vector<std::vector<RawResponse>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  const int max_tokens = cfg.effective_max_tokens(ins);
  detail::parallel_for(cells.size(), cfg.backend.parallelism, [&](std::size_t i) {
    const auto& cell = cells[i];
    const auto prompt = render_stateless(ins, *cell.item);
    const int n = cfg.samples_at(cell.t);
    for (int rep = 0; rep < n; ++rep) {
      CompletionRequest req{prompt.text, cell.t, max_tokens, cfg.backend.model, cell.item->id, rep};
      try {
        auto res = client.complete(req);
        results[i].push_back(detail::make_record(ins, *cell.item, cell.t, rep, prompt.text, std::move(res.text), cfg,
                                                 client.backend(), res.attempts));
      } catch (const BackendError& e) {
        errors[i] = "cell item=" + cell.item->id + " temperature=" + detail::fmt_t(cell.t) + ": " +
                    std::to_string(results[i].size()) + "/" + std::to_string(n) + " samples before failure: " + e.what();
        return;
      }
    }
  });

  RunOutput out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (auto& r : results[i]) out.records.push_back(std::move(r));
    if (!errors[i].empty()) out.failures.push_back(errors[i]);
  }
  detail::finish(out, ins, client);
  return out;
}

inline RunOutput run_memory(const RunConfig& cfg, const Instrument& ins, GuardedClient& client) {
  if (cfg.mode != PromptMode::memory) throw ContractViolation("run_memory needs mode memory");
  struct Chain {
    double t;
    int index;
  };
  std::vector<Chain> chains;
  for (double t : cfg.temperatures)
    for (int k = 0; k < cfg.samples_at(t); ++k) chains.push_back({t, k});

  std::vector<std::vector<RawResponse>> results(chains.size());
  std::vector<std::string> errors(chains.size());
  const int max_tokens = cfg.effective_max_tokens(ins);
  detail::parallel_for(chains.size(), cfg.backend.parallelism, [&](std::size_t i) {
    const auto& chain = chains[i];
    std::vector<PromptExchange> history;
    for (const auto& item : ins.items) {
      const auto prompt = render_with_memory(ins, item, history);
      CompletionRequest req{prompt.text, chain.t, max_tokens, cfg.backend.model, item.id, chain.index};
      try {
        auto res = client.complete(req);
        history.push_back({item.ordinal, item.text, history_answer(res.text)});
        results[i].push_back(detail::make_record(ins, item, chain.t, chain.index, prompt.text, std::move(res.text), cfg,
                                                 client.backend(), res.attempts));
      } catch (const BackendError& e) {
        errors[i] = "chain temperature=" + detail::fmt_t(chain.t) + " rep=" + std::to_string(chain.index) + " stopped at item " +
                    item.id + " (" + std::to_string(results[i].size()) + " records kept, flagged partial): " + e.what();
        for (auto& r : results[i]) r.backend_meta["partial"] = "true";
        return;
      }
    }
  });

  RunOutput out;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    for (auto& r : results[i]) out.records.push_back(std::move(r));
    if (!errors[i].empty()) {
      out.failures.push_back(errors[i]);
      ++out.partial_chains;
    }
  }
  detail::finish(out, ins, client);
  return out;
}

inline RunOutput run(const RunConfig& cfg, const Instrument& ins, GuardedClient& client) {
  return cfg.mode == PromptMode::stateless ? run_stateless(cfg, ins, client) : run_memory(cfg, ins, client);
}

// ---------------------------------------------------------------------------
// Planning without sending.

struct RunPlan {
  long requests = 0;
  std::int64_t max_token_estimate = 0;
  std::string max_item;
  bool fits = true;
};

/// Counts requests and finds the largest prompt. Memory-mode history uses
/// the widest scale answer as a stand-in for the model's replies.
inline RunPlan plan_run(const RunConfig& cfg, const Instrument& ins) {
  RunPlan plan;
  long per_item = 0;
  for (double t : cfg.temperatures) per_item += cfg.samples_at(t);
  plan.requests = per_item * static_cast<long>(ins.items.size());
  std::string filler = " " + (ins.scale ? std::to_string(ins.scale->max) : std::string("00"));
  std::vector<PromptExchange> history;
  for (const auto& item : ins.items) {
    const auto p = cfg.mode == PromptMode::stateless ? render_stateless(ins, item) : render_with_memory(ins, item, history);
    if (p.token_estimate > plan.max_token_estimate) {
      plan.max_token_estimate = p.token_estimate;
      plan.max_item = item.id;
    }
    history.push_back({item.ordinal, item.text, filler});
  }
  plan.fits = fits_context(plan.max_token_estimate, cfg.context_limit);
  return plan;
}

// ---------------------------------------------------------------------------
// Manifest: normalized config + instrument identity + code version.

inline nlohmann::ordered_json make_manifest(const RunConfig& cfg, const Instrument& ins) {
  nlohmann::ordered_json m;
  m["code_version"] = SURVEYOR_VERSION;
  m["run_config"] = to_json(cfg, ins);
  const auto def = serialize(ins);
  m["instrument"] = {{"id", ins.id}, {"version", ins.version}, {"sha256", sha256_hex(def)}};
  m["instrument_definition"] = to_json(ins);
  return m;
}

inline std::string manifest_text(const nlohmann::ordered_json& m) { return m.dump(2) + "\n"; }

}  // namespace surveyor
