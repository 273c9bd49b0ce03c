#pragma once

// OpenAI-style completions over HTTP(S). Needs the surveyor_http target
// (OpenSSL-enabled httplib).
//
// Include after any Eigen header: httplib pulls in <resolv.h>, whose `_res`
// macro collides with a parameter name inside Eigen.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <optional>
#include <string>

#include "surveyor/backend.hpp"

namespace surveyor {

inline constexpr const char* kApiKeyEnv = "SURVEYOR_API_KEY";

struct HttpSettings {
  std::string endpoint = "https://api.openai.com/v1/completions";
  double timeout_seconds = 60;
};

class HttpBackend final : public Backend {
 public:
  /// `api_key` empty means no Authorization header (local compatible servers).
  HttpBackend(HttpSettings settings, std::string api_key) : settings_(std::move(settings)), api_key_(std::move(api_key)) {
    split_endpoint();
  }

  /// Reads the key from SURVEYOR_API_KEY.
  static HttpBackend from_environment(HttpSettings settings) {
    const char* key = std::getenv(kApiKeyEnv);
    return HttpBackend(std::move(settings), key ? key : "");
  }

  std::string kind() const override { return "http"; }

  std::string complete(const CompletionRequest& r) override {
    validate(r);
    nlohmann::json body{{"model", r.model}, {"prompt", r.prompt}, {"temperature", r.temperature}, {"max_tokens", r.max_tokens}};
    httplib::Client cli(base_);
    const auto secs = static_cast<time_t>(settings_.timeout_seconds);
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_write_timeout(secs, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransportError("POST " + settings_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) throw HttpStatusError(res->status, res->body.substr(0, 500));
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected completion payload: ") + e.what());
    }
  }

 private:
  void split_endpoint() {
    const auto& e = settings_.endpoint;
    const auto scheme = e.find("://");
    if (scheme == std::string::npos) throw ValidationError("backend.endpoint must be an absolute http(s) URL: " + e);
    const auto slash = e.find('/', scheme + 3);
    base_ = slash == std::string::npos ? e : e.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : e.substr(slash);
  }

  HttpSettings settings_;
  std::string api_key_;
  std::string base_;
  std::string path_;
};

}  // namespace surveyor
