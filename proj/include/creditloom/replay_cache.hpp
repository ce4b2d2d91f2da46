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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "creditloom/errors.hpp"
#include "creditloom/gateway.hpp"

namespace creditloom {

enum class CacheMode {
  kRecord,             // serve hits, forward misses and persist them
  kReplayStrict,       // serve hits, fail on misses, never forward
  kReplayFallthrough,  // serve hits, forward misses without persisting
};

inline std::string_view to_string(CacheMode m) {
  switch (m) {
    case CacheMode::kRecord: return "record";
    case CacheMode::kReplayStrict: return "replay-strict";
    case CacheMode::kReplayFallthrough: return "replay-fallthrough";
  }
  return "record";
}

inline std::optional<CacheMode> parse_cache_mode(std::string_view s) {
  for (auto m : {CacheMode::kRecord, CacheMode::kReplayStrict, CacheMode::kReplayFallthrough}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

namespace detail {
inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace detail

// Fingerprint-keyed completion cache backed by an append-only JSONL file of
// {fingerprint, request, response, timestamp}. Reads run concurrently;
// inserts and file appends are serialized.
class ReplayCache final : public CompletionPort {
 public:
  // `upstream` may be null only in replay-strict mode. An empty path keeps
  // the cache in memory.
  ReplayCache(std::filesystem::path path, CacheMode mode, CompletionPort* upstream)
      : path_(std::move(path)), mode_(mode), upstream_(upstream) {
    if (mode_ != CacheMode::kReplayStrict && upstream_ == nullptr) {
      throw Error(ErrorCode::kConfig, "cache mode " + std::string(to_string(mode_)) +
                                          " requires an upstream gateway");
    }
    if (mode_ == CacheMode::kReplayStrict) upstream_ = nullptr;
    load();
  }

  std::string complete(const CompletionRequest& request) override {
    validate(request);
    const std::string key = fingerprint(request);
    {
      std::shared_lock lock(mutex_);
      if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    if (mode_ == CacheMode::kReplayStrict) {
      throw Error(ErrorCode::kCacheMiss, "no cached completion for fingerprint " + key);
    }
    std::string response = upstream_->complete(request);
    if (mode_ == CacheMode::kRecord) {
      std::unique_lock lock(mutex_);
      if (auto [it, inserted] = entries_.emplace(key, response); inserted) {
        append(key, request, response);
      } else {
        return it->second;
      }
    }
    return response;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  CacheMode mode() const { return mode_; }

 private:
  void load() {
    if (path_.empty() || !std::filesystem::exists(path_)) return;
    std::ifstream in(path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded() || !j.contains("fingerprint") || !j.contains("response")) {
        // A torn final write is tolerated; anything earlier is corruption.
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw Error(ErrorCode::kCorruptLine,
                    path_.string() + ":" + std::to_string(line_no) + ": unreadable cache entry");
      }
      entries_.emplace(j["fingerprint"].get<std::string>(), j["response"].get<std::string>());
    }
  }

  void append(const std::string& key, const CompletionRequest& request, const std::string& response) {
    if (path_.empty()) return;
    if (!out_.is_open()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      out_.open(path_, std::ios::app);
      if (!out_) throw Error(ErrorCode::kIo, "cannot open cache file " + path_.string());
    }
    nlohmann::json j = {{"fingerprint", key},
                        {"request", to_json(request)},
                        {"response", response},
                        {"timestamp", detail::utc_timestamp()}};
    out_ << j.dump() << '\n';
    out_.flush();
  }

  std::filesystem::path path_;
  CacheMode mode_;
  CompletionPort* upstream_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream out_;
};

}  // namespace creditloom
