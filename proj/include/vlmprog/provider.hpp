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

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/errors.hpp"
#include "vlmprog/json_io.hpp"

namespace vlmprog {

struct TextSegment {
  std::string text;
  bool operator==(const TextSegment&) const = default;
};

/// An image segment refers to a decoded still; the URI must be resolvable
/// (absolute, or relative to the working directory) when a request is sent.
struct ImageSegment {
  FrameRef frame;
  bool operator==(const ImageSegment&) const = default;
};

using Segment = std::variant<TextSegment, ImageSegment>;

inline Segment text_segment(std::string s) { return TextSegment{std::move(s)}; }
inline Segment image_segment(FrameRef f) { return ImageSegment{std::move(f)}; }

struct ScoringRequest {
  std::vector<Segment> segments;
  std::string continuation;
  bool want_per_token = false;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  bool operator==(const TokenLogprob&) const = default;
};

struct ScoringResponse {
  std::vector<TokenLogprob> token_logprobs;
  double sum_logprob = 0.0;
  std::string model_id;
  bool operator==(const ScoringResponse&) const = default;
};

struct GenerationRequest {
  std::vector<Segment> segments;
  int max_tokens = 512;
  double temperature = 0.0;
};

struct GenerationResponse {
  std::string text;
  std::string model_id;
  bool operator==(const GenerationResponse&) const = default;
};

struct HealthStatus {
  std::string model_id;
  bool ready = false;
};

class ProviderError : public Error {
 public:
  enum class Kind {
    transport,               // network or 5xx; retryable
    rejected,                // backend refused the request (4xx, bad input)
    tokenization_mismatch,   // backend split the continuation differently
    image_not_found,
    unknown_fingerprint,     // replay fixture has no answer
  };

  ProviderError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }
  bool retryable() const { return kind_ == Kind::transport; }

 private:
  Kind kind_;
};

/// A backend that scores continuations and generates text given multimodal
/// context. Implementations must be safe to call from several threads.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ScoringResponse score(const ScoringRequest& req) = 0;
  virtual GenerationResponse generate(const GenerationRequest& req) = 0;
  virtual HealthStatus health() = 0;
  /// Upper bound on concurrent requests this backend accepts.
  virtual std::size_t max_in_flight() const { return 1; }
};

// Fingerprints are SHA-256 hex digests over segment texts, image content
// digests and the continuation. They never depend on file paths.

/// Throws ProviderError(image_not_found) for unreadable images.
std::string context_fingerprint(std::span<const Segment> segments);
std::string request_fingerprint(const ScoringRequest& req);
std::string request_fingerprint(const GenerationRequest& req);

/// Checks the request invariants and that every image resolves.
void check_request(const ScoringRequest& req);
void check_request(const GenerationRequest& req);

/// Verifies sum_logprob matches the per-token entries and that every log-prob
/// is <= 0. Throws ProviderError(rejected) otherwise.
void check_response(const ScoringResponse& resp);

// Wire JSON. Images are embedded as base64 of the file content.
Json segments_to_wire(std::span<const Segment> segments);
Json to_wire(const ScoringRequest& req);
Json to_wire(const GenerationRequest& req);
Json to_json(const ScoringResponse& resp);
Json to_json(const GenerationResponse& resp);
ScoringResponse scoring_response_from_json(const Json& j);
GenerationResponse generation_response_from_json(const Json& j);

/// Deterministic in-process backend. Score and generate behaviour is supplied
/// as callables; a lookup table keyed by (context fingerprint, continuation)
/// takes precedence over the score callable.
class MockProvider : public Provider {
 public:
  using ScoreFn = std::function<double(const ScoringRequest&)>;
  using GenerateFn = std::function<std::string(const GenerationRequest&)>;

  MockProvider(ScoreFn score_fn, GenerateFn generate_fn, std::string model_id = "mock");

  /// Scores -1/l where l is the largest frame index among the image segments;
  /// generation is truth-telling (see truthful_gvl_answer).
  static std::unique_ptr<MockProvider> progress_ramp();

  /// Loads a table file: [{"context": fp, "continuation": s, "logprob": x}, ...].
  void load_table(const std::filesystem::path& path);
  void set_entry(const std::string& context_fp, const std::string& continuation, double logprob);

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResponse generate(const GenerationRequest& req) override;
  HealthStatus health() override { return {model_id_, true}; }
  std::size_t max_in_flight() const override { return 64; }

  std::size_t score_calls() const;

 private:
  ScoreFn score_fn_;
  GenerateFn generate_fn_;
  std::string model_id_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, double> table_;
  std::size_t score_calls_ = 0;
};

/// Splits a continuation into word-like tokens (leading space attached), so
/// that concatenating them gives back the input.
std::vector<std::string> split_words(const std::string& continuation);

/// Answer of a model that orders GVL frames correctly: reads the
/// "Frame {id}:" markers and the frame indices of the following images and
/// emits "Frame {id}: {percent}%" lines with percent rising with frame index.
std::string truthful_gvl_answer(const GenerationRequest& req);

/// Answers only from a recorded fixture; unknown fingerprints are errors.
class ReplayProvider : public Provider {
 public:
  explicit ReplayProvider(const std::filesystem::path& fixture);

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResponse generate(const GenerationRequest& req) override;
  HealthStatus health() override { return {model_id_, true}; }
  std::size_t max_in_flight() const override { return 64; }

 private:
  std::map<std::string, Json> records_;
  std::string model_id_ = "replay";
};

/// Forwards to an inner provider and records every (fingerprint, response).
class RecordingProvider : public Provider {
 public:
  explicit RecordingProvider(Provider& inner) : inner_(inner) {}

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResponse generate(const GenerationRequest& req) override;
  HealthStatus health() override { return inner_.health(); }
  std::size_t max_in_flight() const override { return inner_.max_in_flight(); }

  /// Fixture document: records sorted by fingerprint, duplicates stored once.
  /// save() writes numbers at full precision so replay is bit-exact.
  Json fixture() const;
  void save(const std::filesystem::path& path) const;

 private:
  Provider& inner_;
  mutable std::mutex mu_;
  std::map<std::string, Json> records_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::duration<double> base_delay{0.5};
  double multiplier = 2.0;
};

struct BatchOptions {
  std::size_t max_in_flight = 1;
  RetryPolicy retry;
};

class BatchError : public Error {
 public:
  BatchError(std::vector<std::size_t> failed, std::vector<std::string> messages);
  const std::vector<std::size_t>& failed_indices() const { return failed_; }
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::size_t> failed_;
  std::vector<std::string> messages_;
};

/// Scores all requests with at most `max_in_flight` concurrent calls.
/// Responses come back in request order. Retryable failures are retried with
/// exponential backoff; anything still failing is reported in one BatchError.
std::vector<ScoringResponse> batch_score(Provider& provider, std::span<const ScoringRequest> reqs,
                                         const BatchOptions& opts = {});

/// Calls `fn` with retries for retryable ProviderErrors.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn) -> decltype(fn());

}  // namespace vlmprog

#include "vlmprog/detail/retry.hpp"
