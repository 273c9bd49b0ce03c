#pragma once

// Completion providers and the guarded client every run goes through.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "surveyor/error.hpp"
#include "surveyor/hash.hpp"
#include "surveyor/instrument.hpp"
#include "surveyor/io.hpp"
#include "surveyor/prompt.hpp"
#include "surveyor/records.hpp"

namespace surveyor {

struct CompletionRequest {
  std::string prompt;
  double temperature = 0;
  int max_tokens = 16;
  std::string model;
  // Local provenance, never sent over the wire: which item this is and which
  // repetition/chain it belongs to. Scripted and replay providers key on them.
  std::string item_id;
  int stream = 0;
};

inline void validate(const CompletionRequest& r) {
  if (!(r.temperature >= 0.0 && r.temperature <= 1.0))
    throw ContractViolation("completion request: temperature " + io::format_double(r.temperature) + " outside [0,1]");
  if (r.max_tokens < 1) throw ContractViolation("completion request: max_tokens must be >= 1");
}

class Backend {
 public:
  virtual ~Backend() = default;
  /// First completion text, untrimmed. Must be safe to call concurrently.
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual std::string kind() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted provider: answers from a latent profile, for offline runs.
//
// Config (all optional):
//   {"default": {"mean": m, "sd": s, "slope": b},
//    "constructs": {"H": {"mean": 3.7, "sd": 0.5, "slope": -0.2}, ...},
//    "choices": {"gender": [{"text": "female", "weight": 2}, ...]},
//    "na_rate": 0.0, "fail_items": ["hvs07"]}
//
// Means are in score units (after reverse keying / inversion), so a construct
// with mean m scores about m. The answer at temperature t is
// round(mean + slope*t + sd*t*z), clamped to the scale; at t = 0 it is fixed.

struct LatentSpec {
  double mean = 0;
  double sd = 1;
  double slope = 0;
};

struct WeightedChoice {
  std::string text;
  double weight = 1;
};

struct ScriptedSettings {
  std::optional<LatentSpec> fallback;
  std::map<std::string, LatentSpec> constructs;
  std::map<std::string, std::vector<WeightedChoice>> choices;
  double na_rate = 0;
  std::vector<std::string> fail_items;
};

inline ScriptedSettings scripted_settings_from_json(const nlohmann::json& j) {
  ScriptedSettings s;
  if (j.is_null()) return s;
  if (!j.is_object()) throw ValidationError("backend.scripted must be an object");
  auto latent = [](const nlohmann::json& o, const std::string& where) {
    if (!o.is_object()) throw ValidationError(where + " must be an object");
    LatentSpec l;
    l.mean = o.value("mean", 0.0);
    l.sd = o.value("sd", 1.0);
    l.slope = o.value("slope", 0.0);
    if (l.sd < 0) throw ValidationError(where + ": sd must be >= 0");
    return l;
  };
  if (j.contains("default")) s.fallback = latent(j["default"], "backend.scripted.default");
  if (j.contains("constructs"))
    for (const auto& [c, o] : j["constructs"].items()) s.constructs[c] = latent(o, "backend.scripted.constructs." + c);
  if (j.contains("choices"))
    for (const auto& [c, arr] : j["choices"].items()) {
      for (const auto& o : arr) s.choices[c].push_back({o.at("text").get<std::string>(), o.value("weight", 1.0)});
      if (s.choices[c].empty()) throw ValidationError("backend.scripted.choices." + c + " is empty");
    }
  s.na_rate = j.value("na_rate", 0.0);
  if (s.na_rate < 0 || s.na_rate > 1) throw ValidationError("backend.scripted.na_rate must be in [0,1]");
  if (j.contains("fail_items")) s.fail_items = j["fail_items"].get<std::vector<std::string>>();
  return s;
}

class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(Instrument ins, ScriptedSettings settings, std::uint64_t seed)
      : ins_(std::move(ins)), settings_(std::move(settings)), seed_(seed) {}

  std::string kind() const override { return "scripted"; }

  std::string complete(const CompletionRequest& r) override {
    validate(r);
    const Item& item = ins_.item(r.item_id);
    if (std::find(settings_.fail_items.begin(), settings_.fail_items.end(), item.id) != settings_.fail_items.end())
      throw HttpStatusError(400, "scripted failure for item " + item.id);
    std::mt19937_64 rng(stream_seed(r));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const double noise = z(rng);
    const double coin = u(rng);
    if (r.temperature > 0 && coin < settings_.na_rate) return " I would rather not say.";

    if (auto ch = settings_.choices.find(item.construct); ch != settings_.choices.end()) {
      double total = 0;
      for (const auto& c : ch->second) total += c.weight;
      // temperature 0 always yields the heaviest choice
      if (r.temperature == 0)
        return " " + std::max_element(ch->second.begin(), ch->second.end(), [](auto& a, auto& b) { return a.weight < b.weight; })->text;
      double pick = u(rng) * total;
      for (const auto& c : ch->second) {
        if (pick < c.weight) return " " + c.text;
        pick -= c.weight;
      }
      return " " + ch->second.back().text;
    }

    const LatentSpec spec = latent_for(item.construct);
    double draw = spec.mean + spec.slope * r.temperature + spec.sd * r.temperature * noise;
    if (ins_.kind == InstrumentKind::free_text) return " " + std::to_string(std::lround(std::max(0.0, draw)));

    const ScaleDef& s = *ins_.scale;
    long v = std::clamp<long>(std::lround(draw), s.min, s.max);
    if (item.reverse_keyed) v = s.min + s.max - v;
    if (ins_.invert_on_score) v = s.min + s.max - v;
    return " " + std::to_string(v);
  }

 private:
  LatentSpec latent_for(const std::string& construct) const {
    if (auto it = settings_.constructs.find(construct); it != settings_.constructs.end()) return it->second;
    if (settings_.fallback) return *settings_.fallback;
    LatentSpec l;
    l.mean = ins_.scale ? 0.5 * (ins_.scale->min + ins_.scale->max) : 30.0;
    return l;
  }

  std::uint64_t stream_seed(const CompletionRequest& r) const {
    const std::string key = std::to_string(seed_) + "|" + std::to_string(r.stream) + "|" + io::format_double(r.temperature) +
                            "|" + r.prompt;
    const std::string h = sha256_hex(key);
    return std::stoull(h.substr(0, 16), nullptr, 16);
  }

  Instrument ins_;
  ScriptedSettings settings_;
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Replay provider: answers from a recorded log.
//
// Lookup is by (prompt hash, temperature, rep). A request whose exact key is
// not recorded still gets an answer when every record with that prompt hash
// carries the same text; otherwise it is a miss.

class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(const std::vector<RawResponse>& log) {
    for (const auto& r : log) {
      exact_[{r.prompt_hash, r.temperature, r.rep}] = r.raw_text;
      auto [it, inserted] = by_hash_.emplace(r.prompt_hash, r.raw_text);
      if (!inserted && it->second != r.raw_text) ambiguous_[r.prompt_hash] = true;
    }
  }

  std::string kind() const override { return "replay"; }

  std::string complete(const CompletionRequest& r) override {
    validate(r);
    const std::string h = sha256_hex(r.prompt);
    if (auto it = exact_.find({h, r.temperature, r.stream}); it != exact_.end()) return it->second;
    if (auto it = by_hash_.find(h); it != by_hash_.end() && !ambiguous_.count(h)) return it->second;
    throw ReplayMissError("replay miss: no recorded response for prompt hash " + h + " (item " + r.item_id +
                          ", temperature " + io::format_double(r.temperature) + ", rep " + std::to_string(r.stream) + ")");
  }

 private:
  std::map<std::tuple<std::string, double, int>, std::string> exact_;
  std::map<std::string, std::string> by_hash_;
  std::map<std::string, bool> ambiguous_;
};

// ---------------------------------------------------------------------------
// Retry, rate limiting, and the context guard.

struct RetryPolicy {
  int max_attempts = 5;
  double base_delay_seconds = 1.0;
  double multiplier = 2.0;
  double max_delay_seconds = 60.0;
};

// Time source and sleeper, replaceable in tests.
struct Clock {
  std::function<double()> now = [] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  };
  std::function<void(double)> sleep = [](double s) {
    if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
};

// Token bucket on requests per minute; rate <= 0 disables it.
class RateLimiter {
 public:
  RateLimiter(double per_minute, double burst, Clock clock)
      : rate_(per_minute / 60.0), capacity_(std::max(1.0, burst)), tokens_(capacity_), clock_(std::move(clock)) {
    last_ = clock_.now();
  }

  void acquire() {
    if (rate_ <= 0) return;
    double wait = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      const double now = clock_.now();
      tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_);
      last_ = now;
      tokens_ -= 1.0;
      // a negative balance is this caller's reservation; it waits it out
      if (tokens_ < 0) wait = -tokens_ / rate_;
    }
    clock_.sleep(wait);
  }

 private:
  double rate_;
  double capacity_;
  double tokens_;
  double last_ = 0;
  Clock clock_;
  std::mutex mu_;
};

struct ClientCounters {
  std::atomic<long> sent{0};
  std::atomic<long> retries{0};
  std::atomic<long> refused{0};
};

class GuardedClient {
 public:
  GuardedClient(Backend& backend, RetryPolicy retry, double rate_per_minute, double burst, std::int64_t context_limit,
                std::uint64_t jitter_seed = 0, Clock clock = {})
      : backend_(backend),
        retry_(retry),
        limiter_(rate_per_minute, burst, clock),
        context_limit_(context_limit),
        jitter_(jitter_seed),
        clock_(std::move(clock)) {
    if (retry_.max_attempts < 1) throw ValidationError("retry.max_attempts must be >= 1");
  }

  struct Result {
    std::string text;
    int attempts = 0;
  };

  Result complete(const CompletionRequest& r) {
    validate(r);
    const auto estimate = estimate_tokens(r.prompt);
    if (!fits_context(estimate, context_limit_)) {
      ++counters.refused;
      throw ContextLimitError("prompt for item " + r.item_id + " estimated at " + std::to_string(estimate) +
                              " tokens exceeds " + std::to_string(kContextSafetyFraction) + " x context limit " +
                              std::to_string(context_limit_) + "; not sent");
    }
    for (int attempt = 1;; ++attempt) {
      limiter_.acquire();
      ++counters.sent;
      try {
        return {backend_.complete(r), attempt};
      } catch (const BackendError& e) {
        if (!e.retryable() || attempt >= retry_.max_attempts) throw;
      }
      ++counters.retries;
      clock_.sleep(backoff(attempt));
    }
  }

  /// Full jitter: uniform in [0, min(cap, base * multiplier^(attempt-1))].
  double backoff(int attempt) {
    const double ceiling =
        std::min(retry_.max_delay_seconds, retry_.base_delay_seconds * std::pow(retry_.multiplier, attempt - 1));
    std::lock_guard<std::mutex> lock(jitter_mu_);
    return std::uniform_real_distribution<double>(0.0, ceiling)(jitter_);
  }

  std::int64_t context_limit() const { return context_limit_; }
  const Backend& backend() const { return backend_; }

  ClientCounters counters;

 private:
  Backend& backend_;
  RetryPolicy retry_;
  RateLimiter limiter_;
  std::int64_t context_limit_;
  std::mt19937_64 jitter_;
  std::mutex jitter_mu_;
  Clock clock_;
};

}  // namespace surveyor
