// Copyright 2026 The vlmprog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "test_support.hpp"
#include "vlmprog/digest.hpp"
#include "vlmprog/http_provider.hpp"
#include "vlmprog/provider.hpp"

namespace vlmprog {
namespace {

using testing::TempDir;
using testing::make_episode;

ScoringRequest request_for(const Episode& e, int upto, std::string continuation = "True") {
  ScoringRequest r;
  for (int i = 1; i <= upto; ++i) r.segments.push_back(image_segment(e.frame(i)));
  r.segments.push_back(text_segment("question"));
  r.continuation = std::move(continuation);
  return r;
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYg=="), "foob");
  EXPECT_EQ(base64_decode(base64_encode(std::string("\0\x01\xff", 3))), std::string("\0\x01\xff", 3));
}

TEST(Fingerprint, DependsOnContentNotPath) {
  TempDir a, b;
  const Episode ea = make_episode(a.path(), "ep", 3);
  const Episode eb = make_episode(b.path(), "ep", 3);
  ASSERT_NE(ea.frames[0].uri, eb.frames[0].uri);
  EXPECT_EQ(request_fingerprint(request_for(ea, 3)), request_fingerprint(request_for(eb, 3)));
  EXPECT_NE(request_fingerprint(request_for(ea, 3)), request_fingerprint(request_for(ea, 2)));
  EXPECT_NE(request_fingerprint(request_for(ea, 3)), request_fingerprint(request_for(ea, 3, "False")));
}

TEST(Fingerprint, SegmentBoundariesMatter) {
  const std::vector<Segment> one{text_segment("ab")};
  const std::vector<Segment> two{text_segment("a"), text_segment("b")};
  EXPECT_NE(context_fingerprint(one), context_fingerprint(two));
}

TEST(Fingerprint, MissingImage) {
  std::vector<Segment> segs{image_segment({1, 0.0, "/nonexistent/x.png"})};
  try {
    context_fingerprint(segs);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::image_not_found);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.png"), std::string::npos);
  }
}

TEST(CheckResponse, Rules) {
  EXPECT_NO_THROW(check_response({{{"True", -0.5}}, -0.5, "m"}));
  EXPECT_THROW(check_response({{}, 0.0, "m"}), ProviderError);
  EXPECT_THROW(check_response({{{"True", 0.5}}, 0.5, "m"}), ProviderError);
  EXPECT_THROW(check_response({{{"a", -0.5}, {"b", -0.5}}, -0.5, "m"}), ProviderError);
}

TEST(MockProvider, RampAndPerToken) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 4);
  auto mock = MockProvider::progress_ramp();
  EXPECT_DOUBLE_EQ(mock->score(request_for(e, 4)).sum_logprob, -0.25);
  auto req = request_for(e, 2, "Fold the towel.");
  req.want_per_token = true;
  const auto resp = mock->score(req);
  ASSERT_EQ(resp.token_logprobs.size(), 3u);
  std::string joined;
  for (const auto& t : resp.token_logprobs) joined += t.token;
  EXPECT_EQ(joined, "Fold the towel.");
  EXPECT_NO_THROW(check_response(resp));
  EXPECT_EQ(mock->score_calls(), 2u);
}

TEST(MockProvider, TableTakesPrecedence) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 2);
  MockProvider mock(nullptr, nullptr);
  const auto req = request_for(e, 2);
  EXPECT_THROW(mock.score(req), ProviderError);
  mock.set_entry(context_fingerprint(req.segments), "True", -0.125);
  EXPECT_EQ(mock.score(req).sum_logprob, -0.125);
}

TEST(TruthfulGvlAnswer, OrdersByFrameIndex) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 5);
  GenerationRequest req;
  const int shown[] = {5, 1, 3};
  for (int d = 1; d <= 3; ++d) {
    req.segments.push_back(text_segment("Frame " + std::to_string(d) + ":"));
    req.segments.push_back(image_segment(e.frame(shown[d - 1])));
  }
  EXPECT_EQ(truthful_gvl_answer(req), "Frame 1: 100%\nFrame 2: 0%\nFrame 3: 50%\n");
}

TEST(ReplayProvider, RecordThenReplayIsIdentical) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 6);
  auto mock = MockProvider::progress_ramp();
  RecordingProvider rec(*mock);
  std::vector<ScoringResponse> live;
  for (int t = 1; t <= 6; ++t) live.push_back(rec.score(request_for(e, t)));
  rec.score(request_for(e, 6));  // duplicate stored once
  rec.save(dir / "fixture.json");
  EXPECT_EQ(rec.fixture().size(), 6u);

  ReplayProvider replay(dir / "fixture.json");
  for (int t = 1; t <= 6; ++t) EXPECT_EQ(replay.score(request_for(e, t)), live[t - 1]);
  try {
    replay.score(request_for(e, 6, "False"));
    FAIL();
  } catch (const ProviderError& err) {
    EXPECT_EQ(err.kind(), ProviderError::Kind::unknown_fingerprint);
  }
}

class FlakyProvider : public Provider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  ScoringResponse score(const ScoringRequest& req) override {
    ++calls;
    if (failures_-- > 0) throw ProviderError(ProviderError::Kind::transport, "flaky");
    if (req.continuation == "bad") throw ProviderError(ProviderError::Kind::rejected, "bad input");
    const double v = -static_cast<double>(req.segments.size());
    return {{{req.continuation, v}}, v, "flaky"};
  }
  GenerationResponse generate(const GenerationRequest&) override { return {"", "flaky"}; }
  HealthStatus health() override { return {"flaky", true}; }
  std::atomic<int> calls{0};

 private:
  std::atomic<int> failures_;
};

constexpr RetryPolicy kFastRetry{3, std::chrono::duration<double>(0.0), 2.0};

TEST(Retry, TransportErrorsAreRetriedUpToTheLimit) {
  FlakyProvider p(2);
  ScoringRequest req{{text_segment("x")}, "True"};
  EXPECT_EQ(with_retry(kFastRetry, [&] { return p.score(req); }).sum_logprob, -1.0);
  EXPECT_EQ(p.calls, 3);

  FlakyProvider q(3);
  EXPECT_THROW(with_retry(kFastRetry, [&] { return q.score(req); }), ProviderError);
  EXPECT_EQ(q.calls, 3);
}

TEST(Retry, RejectedIsNotRetried) {
  FlakyProvider p(0);
  ScoringRequest req{{text_segment("x")}, "bad"};
  EXPECT_THROW(with_retry(kFastRetry, [&] { return p.score(req); }), ProviderError);
  EXPECT_EQ(p.calls, 1);
}

TEST(BatchScore, OrderPreservedUnderConcurrency) {
  FlakyProvider p(0);
  std::vector<ScoringRequest> reqs;
  for (int i = 1; i <= 40; ++i) {
    ScoringRequest r;
    for (int j = 0; j < i; ++j) r.segments.push_back(text_segment("s"));
    r.continuation = "True";
    reqs.push_back(r);
  }
  const auto out = batch_score(p, reqs, {8, kFastRetry});
  ASSERT_EQ(out.size(), reqs.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].sum_logprob, -double(i + 1));
  EXPECT_TRUE(batch_score(p, std::span<const ScoringRequest>{}, {4, kFastRetry}).empty());
}

TEST(BatchScore, AggregatesFailuresWithIndices) {
  FlakyProvider p(0);
  std::vector<ScoringRequest> reqs(5, ScoringRequest{{text_segment("x")}, "True"});
  reqs[1].continuation = "bad";
  reqs[3].continuation = "bad";
  try {
    batch_score(p, reqs, {3, kFastRetry});
    FAIL();
  } catch (const BatchError& e) {
    EXPECT_EQ(e.failed_indices(), (std::vector<std::size_t>{1, 3}));
    EXPECT_EQ(p.calls, 5);
  }
}

// In-process stand-in for the scoring sidecar.
class FakeSidecar {
 public:
  FakeSidecar() {
    server_.Post("/api/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      const Json body = Json::parse(req.body);
      last_request = body;
      if (status != 200) {
        res.status = status;
        res.set_content(Json{{"error", "nope"}}.dump(), "application/json");
        return;
      }
      const std::string cont = body["continuation"];
      const std::string tok = split_tokens ? cont.substr(0, cont.size() / 2) : cont;
      res.set_content(Json{{"token_logprobs", {{{"token", tok}, {"logprob", -0.75}}}},
                           {"sum_logprob", -0.75},
                           {"model_id", "fake"}}
                          .dump(),
                      "application/json");
    });
    server_.Post("/api/v1/generate", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text": "Frame 1: 10%", "model_id": "fake"})", "application/json");
    });
    server_.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"model_id": "fake", "ready": true})", "application/json");
    });
    port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeSidecar() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/api/"; }

  int port = 0;
  int status = 200;
  bool split_tokens = false;
  Json last_request;
  std::string last_auth;

 private:
  httplib::Server server_;
  std::thread thread_;
};

TEST(HttpProvider, ScoreGenerateHealth) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 2);
  FakeSidecar sidecar;
  HttpProvider p(sidecar.url(), {std::chrono::seconds(5), "secret", 2});
  const auto resp = p.score(request_for(e, 2));
  EXPECT_EQ(resp.sum_logprob, -0.75);
  EXPECT_EQ(resp.model_id, "fake");
  EXPECT_EQ(sidecar.last_auth, "Bearer secret");
  const Json& segs = sidecar.last_request["segments"];
  ASSERT_EQ(segs.size(), 3u);
  EXPECT_EQ(segs[0]["type"], "image");
  EXPECT_EQ(base64_decode(segs[0]["b64"].get<std::string>()), testing::read_file(e.frames[0].uri));
  EXPECT_EQ(segs[2], (Json{{"type", "text"}, {"text", "question"}}));

  EXPECT_EQ(p.generate({{text_segment("hi")}}).text, "Frame 1: 10%");
  const HealthStatus h = p.health();
  EXPECT_TRUE(h.ready);
  EXPECT_EQ(h.model_id, "fake");
  EXPECT_EQ(p.max_in_flight(), 2u);
}

TEST(HttpProvider, ErrorMapping) {
  TempDir dir;
  const Episode e = make_episode(dir.path(), "ep", 1);
  FakeSidecar sidecar;
  HttpProvider p(sidecar.url());
  const auto kind_of = [&] {
    try {
      p.score(request_for(e, 1));
    } catch (const ProviderError& err) {
      return err.kind();
    }
    ADD_FAILURE() << "no error";
    return ProviderError::Kind::rejected;
  };
  sidecar.status = 422;
  EXPECT_EQ(kind_of(), ProviderError::Kind::rejected);
  sidecar.status = 503;
  EXPECT_EQ(kind_of(), ProviderError::Kind::transport);
  sidecar.status = 200;
  sidecar.split_tokens = true;
  EXPECT_EQ(kind_of(), ProviderError::Kind::tokenization_mismatch);
}

TEST(HttpProvider, UnreachableIsTransportAndUnhealthy) {
  int port;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpProvider p("http://127.0.0.1:" + std::to_string(port), {std::chrono::seconds(2), "", 1});
  try {
    p.score({{text_segment("x")}, "True"});
    FAIL();
  } catch (const ProviderError& err) {
    EXPECT_TRUE(err.retryable());
  }
  EXPECT_FALSE(p.health().ready);
}

}  // namespace
}  // namespace vlmprog
