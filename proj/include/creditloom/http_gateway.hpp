// Copyright 2026 The Credit Loom Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Live OpenAI-compatible chat-completions client. Kept out of the umbrella
// header so that only binaries that talk to the network pay for httplib.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"

namespace creditloom {

inline constexpr const char* kApiKeyEnv = "CREDIT_LOOM_API_KEY";

struct HttpResponse {
  int status = 0;  // 0 when the request never produced a response
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                            const std::string& body) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120))
      : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                    const std::string& body) override {
    // Split "scheme://host[:port]" from the path.
    const auto scheme_end = url.find("://");
    const auto path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

 private:
  std::chrono::seconds timeout_;
};

// Requests-per-second limiter. A non-positive rate disables limiting.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_second)
      : rate_(rate_per_second),
        capacity_(std::max(1.0, rate_per_second)),
        tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      const double elapsed = std::chrono::duration<double>(now - last_).count();
      tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

struct LiveGatewayOptions {
  std::string base_url = "http://localhost:8000/v1";
  std::string model = "default";
  std::string api_key;  // empty: no Authorization header
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{500};
  double requests_per_second = 0.0;
};

inline std::string api_key_from_env() {
  const char* v = std::getenv(kApiKeyEnv);
  return v ? std::string(v) : std::string();
}

class LiveGateway final : public CompletionPort {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  LiveGateway(LiveGatewayOptions options, HttpTransport& transport,
              Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : options_(std::move(options)),
        transport_(transport),
        sleeper_(std::move(sleeper)),
        bucket_(options_.requests_per_second) {}

  std::string complete(const CompletionRequest& request) override {
    validate(request);
    const std::string url = endpoint();
    const std::string body = request_body(request);
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (!options_.api_key.empty()) headers["Authorization"] = "Bearer " + options_.api_key;

    std::string last_error;
    auto backoff = options_.initial_backoff;
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) {
        sleeper_(backoff);
        backoff *= 2;
      }
      bucket_.acquire();
      ++requests_sent_;
      const HttpResponse res = transport_.post(url, headers, body);
      if (res.status == 200) {
        if (auto text = parse_content(res.body)) return *text;
        last_error = "malformed completion body";
        continue;
      }
      last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
      if (!retryable(res.status)) break;
    }
    throw Error(ErrorCode::kNetworkFailure, url + ": " + last_error);
  }

  std::uint64_t requests_sent() const { return requests_sent_.load(); }

  std::string endpoint() const {
    std::string base = options_.base_url;
    while (!base.empty() && base.back() == '/') base.pop_back();
    return base + "/chat/completions";
  }

  std::string request_body(const CompletionRequest& request) const {
    nlohmann::json body = {
        {"model", options_.model},
        {"messages",
         {{{"role", "system"}, {"content", request.system_text}},
          {{"role", "user"}, {"content", request.user_text}}}},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    return body.dump();
  }

 private:
  static bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

  static std::optional<std::string> parse_content(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    const auto choices = j.find("choices");
    if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
    const auto& first = (*choices)[0];
    if (!first.contains("message") || !first["message"].contains("content")) return std::nullopt;
    const auto& c = first["message"]["content"];
    if (!c.is_string()) return std::nullopt;
    return c.get<std::string>();
  }

  LiveGatewayOptions options_;
  HttpTransport& transport_;
  Sleeper sleeper_;
  TokenBucket bucket_;
  std::atomic<std::uint64_t> requests_sent_{0};
};

}  // namespace creditloom
