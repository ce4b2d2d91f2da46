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

#include <gtest/gtest.h>

#include <set>
#include <unordered_set>

#include "creditloom/http_gateway.hpp"
#include "support.hpp"

namespace creditloom {
namespace {

using testing::ScriptedPort;
using testing::TempDir;

CompletionRequest sample(const std::string& user = "hello") {
  CompletionRequest r;
  r.system_text = "sys";
  r.user_text = user;
  r.context.instance_id = "q1";
  r.context.role_id = "a";
  r.context.round_index = 1;
  return r;
}

ScriptedPort echo() {
  return ScriptedPort([](const CompletionRequest& r, int) { return "echo:" + r.user_text; });
}

TEST(Fingerprint, EveryFieldParticipates) {
  const auto base = sample();
  std::vector<CompletionRequest> variants(9, base);
  variants[0].system_text = "sys2";
  variants[1].user_text = "hello2";
  variants[2].temperature = 0.0;
  variants[3].max_tokens = 7;
  variants[4].tag = CallTag::kCritic;
  variants[5].context.instance_id = "q2";
  variants[6].context.role_id = "b";
  variants[7].context.round_index = 2;
  variants[8].context.items = {{"a", "x"}};
  std::set<std::string> prints{fingerprint(base)};
  for (const auto& v : variants) prints.insert(fingerprint(v));
  EXPECT_EQ(prints.size(), variants.size() + 1);
  EXPECT_EQ(fingerprint(base), fingerprint(sample()));
  EXPECT_EQ(fingerprint(base).size(), 64u);
}

TEST(Fingerprint, NoCollisionsOverManyDistinctRequests) {
  std::unordered_set<std::string> seen;
  seen.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    auto r = sample("u" + std::to_string(i));
    r.context.round_index = i % 3;
    ASSERT_TRUE(seen.insert(fingerprint(r)).second) << i;
  }
}

TEST(Fingerprint, JsonRoundTrip) {
  auto r = sample();
  r.tag = CallTag::kJudge;
  r.context.items = {{"a", "A"}, {"b", "B"}};
  r.context.subject = "subj";
  EXPECT_EQ(request_from_json(to_json(r)), r);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Validate, RejectsEmptyTextsAndBadParameters) {
  auto r = sample("");
  EXPECT_THROW(validate(r), Error);
  r = sample();
  r.max_tokens = 0;
  EXPECT_THROW(validate(r), Error);
  r = sample();
  r.temperature = -1;
  EXPECT_THROW(validate(r), Error);
}

TEST(MeteredPort, CountsPerTagAndEnforcesBudget) {
  auto inner = echo();
  MeteredPort meter(inner, 3);
  auto c = sample();
  c.tag = CallTag::kCritic;
  meter.complete(sample());
  meter.complete(c);
  meter.complete(c);
  EXPECT_EQ(meter.calls(), 3u);
  EXPECT_EQ(meter.calls(CallTag::kCritic), 2u);
  try {
    meter.complete(sample());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBudgetExceeded);
  }
  EXPECT_EQ(inner.calls(), 3u);
}

TEST(ReplayCache, RecordThenStrictReplayMakesNoUpstreamCalls) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    auto up = echo();
    ReplayCache cache(path, CacheMode::kRecord, &up);
    EXPECT_EQ(cache.complete(sample("one")), "echo:one");
    EXPECT_EQ(cache.complete(sample("one")), "echo:one");
    EXPECT_EQ(cache.complete(sample("two")), "echo:two");
    EXPECT_EQ(up.calls(), 2u);
  }
  auto up = echo();
  ReplayCache strict(path, CacheMode::kReplayStrict, &up);
  EXPECT_EQ(strict.size(), 2u);
  EXPECT_EQ(strict.complete(sample("two")), "echo:two");
  try {
    strict.complete(sample("three"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCacheMiss);
    EXPECT_EQ(e.exit_code(), 3);
  }
  EXPECT_EQ(up.calls(), 0u);
}

TEST(ReplayCache, FallthroughForwardsWithoutPersisting) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  auto up = echo();
  {
    ReplayCache cache(path, CacheMode::kReplayFallthrough, &up);
    EXPECT_EQ(cache.complete(sample("x")), "echo:x");
    EXPECT_EQ(cache.complete(sample("x")), "echo:x");
  }
  EXPECT_EQ(up.calls(), 2u);
  EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(ReplayCache, NonStrictModesNeedUpstream) {
  EXPECT_THROW(ReplayCache("", CacheMode::kRecord, nullptr), Error);
  EXPECT_NO_THROW(ReplayCache("", CacheMode::kReplayStrict, nullptr));
}

TEST(ReplayCache, TornFinalLineIsTolerated) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    auto up = echo();
    ReplayCache cache(path, CacheMode::kRecord, &up);
    cache.complete(sample("a"));
  }
  testing::spit(path, testing::slurp(path) + R"({"fingerprint":"ab)");
  ReplayCache strict(path, CacheMode::kReplayStrict, nullptr);
  EXPECT_EQ(strict.size(), 1u);
}

TEST(ReplayCache, CorruptMiddleLineIsRejected) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  testing::spit(path, "garbage\n{\"fingerprint\":\"x\",\"response\":\"y\"}\n");
  EXPECT_THROW(ReplayCache(path, CacheMode::kReplayStrict, nullptr), Error);
}

TEST(ReplayCache, ConcurrentRecordingStoresEachKeyOnce) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  auto up = echo();
  ReplayCache cache(path, CacheMode::kRecord, &up);
  parallel_map<std::string>(400, 8, [&](std::size_t i) { return cache.complete(sample(std::to_string(i % 50))); });
  EXPECT_EQ(cache.size(), 50u);
  std::size_t lines = 0;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, 50u);
}

class FakeTransport final : public HttpTransport {
 public:
  std::vector<HttpResponse> replies;
  std::vector<std::string> urls;
  std::vector<std::map<std::string, std::string>> headers;
  std::vector<std::string> bodies;

  HttpResponse post(const std::string& url, const std::map<std::string, std::string>& h,
                    const std::string& body) override {
    urls.push_back(url);
    headers.push_back(h);
    bodies.push_back(body);
    const auto i = std::min(urls.size() - 1, replies.size() - 1);
    return replies[i];
  }
};

HttpResponse ok(const std::string& content) {
  return {200, nlohmann::json{{"choices", {{{"message", {{"content", content}}}}}}}.dump(), ""};
}

TEST(LiveGateway, SendsChatCompletionAndParsesReply) {
  FakeTransport t;
  t.replies = {ok("B")};
  LiveGatewayOptions o;
  o.base_url = "http://host:9/v1/";
  o.model = "m1";
  o.api_key = "secret";
  LiveGateway gw(o, t, [](auto) {});
  auto r = sample();
  r.temperature = 0.25;
  r.max_tokens = 33;
  EXPECT_EQ(gw.complete(r), "B");
  ASSERT_EQ(t.urls.size(), 1u);
  EXPECT_EQ(t.urls[0], "http://host:9/v1/chat/completions");
  EXPECT_EQ(t.headers[0].at("Authorization"), "Bearer secret");
  const auto body = nlohmann::json::parse(t.bodies[0]);
  EXPECT_EQ(body["model"], "m1");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "hello");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.25);
  EXPECT_EQ(body["max_tokens"], 33);
  EXPECT_FALSE(body.contains("context"));
}

TEST(LiveGateway, NoAuthorizationWithoutKey) {
  FakeTransport t;
  t.replies = {ok("x")};
  LiveGateway gw({}, t, [](auto) {});
  gw.complete(sample());
  EXPECT_EQ(t.headers[0].count("Authorization"), 0u);
}

TEST(LiveGateway, RetriesTransientFailuresWithDoublingBackoff) {
  FakeTransport t;
  t.replies = {{503, "", ""}, {0, "", "connection refused"}, ok("done")};
  std::vector<long> sleeps;
  LiveGatewayOptions o;
  o.max_retries = 2;
  o.initial_backoff = std::chrono::milliseconds(100);
  LiveGateway gw(o, t, [&](std::chrono::milliseconds d) { sleeps.push_back(static_cast<long>(d.count())); });
  EXPECT_EQ(gw.complete(sample()), "done");
  EXPECT_EQ(sleeps, (std::vector<long>{100, 200}));
  EXPECT_EQ(gw.requests_sent(), 3u);
}

TEST(LiveGateway, GivesUpAfterRetryBudget) {
  FakeTransport t;
  t.replies = {{500, "", ""}};
  LiveGatewayOptions o;
  o.max_retries = 1;
  LiveGateway gw(o, t, [](auto) {});
  try {
    gw.complete(sample());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNetworkFailure);
    EXPECT_EQ(e.exit_code(), 3);
  }
  EXPECT_EQ(t.urls.size(), 2u);
}

TEST(LiveGateway, ClientErrorsAreNotRetried) {
  FakeTransport t;
  t.replies = {{401, "", ""}};
  LiveGateway gw({}, t, [](auto) {});
  EXPECT_THROW(gw.complete(sample()), Error);
  EXPECT_EQ(t.urls.size(), 1u);
}

TEST(LiveGateway, MalformedBodyIsRetried) {
  FakeTransport t;
  t.replies = {{200, "{}", ""}, ok("fine")};
  LiveGateway gw({}, t, [](auto) {});
  EXPECT_EQ(gw.complete(sample()), "fine");
}

TEST(ParallelMap, KeepsOrderAndRethrowsLowestIndex) {
  const auto out = parallel_map<int>(100, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  try {
    parallel_map<int>(50, 4, [](std::size_t i) -> int {
      if (i == 7 || i == 31) throw Error(ErrorCode::kIo, "fail " + std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("fail 7"), std::string::npos);
  }
}

}  // namespace
}  // namespace creditloom
