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

#include "vlmprog/provider.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <regex>
#include <thread>

#include "vlmprog/digest.hpp"

namespace vlmprog {
namespace {

std::string image_digest(const ImageSegment& img) {
  const std::filesystem::path p = img.frame.uri;
  std::error_code ec;
  if (img.frame.uri.empty() || !std::filesystem::is_regular_file(p, ec)) {
    throw ProviderError(ProviderError::Kind::image_not_found, "image not found: " + img.frame.uri);
  }
  try {
    return sha256_file(p);
  } catch (const IoError&) {
    throw ProviderError(ProviderError::Kind::image_not_found, "image not found: " + img.frame.uri);
  }
}

std::string length_prefixed(char tag, const std::string& s) {
  return tag + std::to_string(s.size()) + ":" + s + "\n";
}

}  // namespace

std::string context_fingerprint(std::span<const Segment> segments) {
  std::string material = "ctx-v1\n";
  for (const Segment& seg : segments) {
    if (const auto* t = std::get_if<TextSegment>(&seg)) {
      material += length_prefixed('T', t->text);
    } else {
      material += "I" + image_digest(std::get<ImageSegment>(seg)) + "\n";
    }
  }
  return sha256_hex(material);
}

std::string request_fingerprint(const ScoringRequest& req) {
  std::string material = "score-v1\n" + context_fingerprint(req.segments) + "\n";
  material += length_prefixed('C', req.continuation);
  material += req.want_per_token ? "P1\n" : "P0\n";
  return sha256_hex(material);
}

std::string request_fingerprint(const GenerationRequest& req) {
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", req.temperature);
  std::string material = "generate-v1\n" + context_fingerprint(req.segments) + "\n";
  material += "M" + std::to_string(req.max_tokens) + "\nT" + temp + "\n";
  return sha256_hex(material);
}

void check_request(const ScoringRequest& req) {
  if (req.segments.empty()) {
    throw ProviderError(ProviderError::Kind::rejected, "scoring request has no segments");
  }
  if (req.continuation.empty()) {
    throw ProviderError(ProviderError::Kind::rejected, "scoring request has empty continuation");
  }
}

void check_request(const GenerationRequest& req) {
  if (req.segments.empty()) {
    throw ProviderError(ProviderError::Kind::rejected, "generation request has no segments");
  }
  if (req.max_tokens <= 0) {
    throw ProviderError(ProviderError::Kind::rejected, "max_tokens must be positive");
  }
  if (!(req.temperature >= 0.0)) {
    throw ProviderError(ProviderError::Kind::rejected, "temperature must be >= 0");
  }
}

void check_response(const ScoringResponse& resp) {
  if (resp.token_logprobs.empty()) {
    throw ProviderError(ProviderError::Kind::rejected, "scoring response has no tokens");
  }
  double sum = 0.0;
  for (const auto& t : resp.token_logprobs) {
    if (!std::isfinite(t.logprob) || t.logprob > 0.0) {
      throw ProviderError(ProviderError::Kind::rejected,
                          "invalid token log-probability for '" + t.token + "'");
    }
    sum += t.logprob;
  }
  if (!std::isfinite(resp.sum_logprob) || resp.sum_logprob > 0.0 ||
      std::abs(sum - resp.sum_logprob) > 1e-6) {
    throw ProviderError(ProviderError::Kind::rejected,
                        "sum_logprob disagrees with per-token log-probabilities");
  }
}

Json segments_to_wire(std::span<const Segment> segments) {
  Json arr = Json::array();
  for (const Segment& seg : segments) {
    if (const auto* t = std::get_if<TextSegment>(&seg)) {
      arr.push_back(Json{{"type", "text"}, {"text", t->text}});
    } else {
      const auto& img = std::get<ImageSegment>(seg);
      image_digest(img);  // existence check with the canonical error
      arr.push_back(Json{{"type", "image"}, {"b64", base64_encode(read_text_file(img.frame.uri))}});
    }
  }
  return arr;
}

Json to_wire(const ScoringRequest& req) {
  return Json{{"segments", segments_to_wire(req.segments)},
              {"continuation", req.continuation},
              {"want_per_token", req.want_per_token}};
}

Json to_wire(const GenerationRequest& req) {
  return Json{{"segments", segments_to_wire(req.segments)},
              {"max_tokens", req.max_tokens},
              {"temperature", req.temperature}};
}

Json to_json(const ScoringResponse& resp) {
  Json toks = Json::array();
  for (const auto& t : resp.token_logprobs) {
    toks.push_back(Json{{"token", t.token}, {"logprob", t.logprob}});
  }
  return Json{{"token_logprobs", std::move(toks)},
              {"sum_logprob", resp.sum_logprob},
              {"model_id", resp.model_id}};
}

Json to_json(const GenerationResponse& resp) {
  return Json{{"text", resp.text}, {"model_id", resp.model_id}};
}

ScoringResponse scoring_response_from_json(const Json& j) {
  try {
    ScoringResponse r;
    for (const auto& t : j.at("token_logprobs")) {
      r.token_logprobs.push_back({t.at("token").get<std::string>(), t.at("logprob").get<double>()});
    }
    r.sum_logprob = j.at("sum_logprob").get<double>();
    r.model_id = j.at("model_id").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed scoring response: ") + e.what());
  }
}

GenerationResponse generation_response_from_json(const Json& j) {
  try {
    return {j.at("text").get<std::string>(), j.at("model_id").get<std::string>()};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed generation response: ") + e.what());
  }
}

std::vector<std::string> split_words(const std::string& continuation) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : continuation) {
    if (c == ' ' && !cur.empty() && cur.back() != ' ') {
      out.push_back(cur);
      cur.clear();
    }
    cur += c;
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string truthful_gvl_answer(const GenerationRequest& req) {
  static const std::regex marker(R"(Frame\s+(\d+)\s*:\s*$)");
  std::vector<std::pair<int, FrameIndex>> labeled;
  std::optional<int> pending;
  for (const Segment& seg : req.segments) {
    if (const auto* t = std::get_if<TextSegment>(&seg)) {
      std::smatch m;
      if (std::regex_search(t->text, m, marker)) pending = std::stoi(m[1].str());
    } else if (pending) {
      labeled.emplace_back(*pending, std::get<ImageSegment>(seg).frame.index);
      pending.reset();
    }
  }
  if (labeled.empty()) return "No frames were provided.";
  std::sort(labeled.begin(), labeled.end());
  auto [lo, hi] = std::minmax_element(labeled.begin(), labeled.end(),
                                      [](auto& a, auto& b) { return a.second < b.second; });
  const double min_idx = lo->second;
  const double span = hi->second - lo->second;
  std::string out;
  for (const auto& [id, idx] : labeled) {
    const long pct = span > 0 ? std::lround(100.0 * (idx - min_idx) / span) : 100;
    out += "Frame " + std::to_string(id) + ": " + std::to_string(pct) + "%\n";
  }
  return out;
}

MockProvider::MockProvider(ScoreFn score_fn, GenerateFn generate_fn, std::string model_id)
    : score_fn_(std::move(score_fn)),
      generate_fn_(std::move(generate_fn)),
      model_id_(std::move(model_id)) {}

std::unique_ptr<MockProvider> MockProvider::progress_ramp() {
  auto score = [](const ScoringRequest& req) {
    FrameIndex longest = 1;
    for (const auto& seg : req.segments) {
      if (const auto* img = std::get_if<ImageSegment>(&seg)) {
        longest = std::max(longest, img->frame.index);
      }
    }
    return -1.0 / longest;
  };
  return std::make_unique<MockProvider>(score, truthful_gvl_answer, "mock-progress-ramp");
}

void MockProvider::load_table(const std::filesystem::path& path) {
  const Json doc = read_json_file(path);
  if (!doc.is_array()) throw ParseError("mock table must be an array");
  for (const auto& row : doc) {
    try {
      set_entry(row.at("context").get<std::string>(), row.at("continuation").get<std::string>(),
                row.at("logprob").get<double>());
    } catch (const Json::exception& e) {
      throw ParseError(std::string("malformed mock table row: ") + e.what());
    }
  }
}

void MockProvider::set_entry(const std::string& context_fp, const std::string& continuation,
                             double logprob) {
  std::lock_guard lock(mu_);
  table_[{context_fp, continuation}] = logprob;
}

ScoringResponse MockProvider::score(const ScoringRequest& req) {
  check_request(req);
  const std::string ctx = context_fingerprint(req.segments);
  std::optional<double> total;
  {
    std::lock_guard lock(mu_);
    ++score_calls_;
    if (auto it = table_.find({ctx, req.continuation}); it != table_.end()) total = it->second;
  }
  if (!total) {
    if (!score_fn_) {
      throw ProviderError(ProviderError::Kind::rejected, "no mock entry for request");
    }
    total = score_fn_(req);
  }
  ScoringResponse resp;
  resp.model_id = model_id_;
  const auto words = req.want_per_token ? split_words(req.continuation)
                                        : std::vector<std::string>{req.continuation};
  const double each = *total / static_cast<double>(words.size());
  for (const auto& w : words) {
    resp.token_logprobs.push_back({w, each});
    resp.sum_logprob += each;
  }
  return resp;
}

GenerationResponse MockProvider::generate(const GenerationRequest& req) {
  check_request(req);
  context_fingerprint(req.segments);  // same image checks as a real backend
  if (!generate_fn_) throw ProviderError(ProviderError::Kind::rejected, "mock cannot generate");
  return {generate_fn_(req), model_id_};
}

std::size_t MockProvider::score_calls() const {
  std::lock_guard lock(mu_);
  return score_calls_;
}

ReplayProvider::ReplayProvider(const std::filesystem::path& fixture) {
  const Json doc = read_json_file(fixture);
  if (!doc.is_array()) throw ParseError("replay fixture must be an array of records");
  for (const auto& rec : doc) {
    if (!rec.contains("fingerprint") || !rec.contains("response")) {
      throw ParseError("replay fixture record needs fingerprint and response");
    }
    records_[rec["fingerprint"].get<std::string>()] = rec["response"];
  }
}

ScoringResponse ReplayProvider::score(const ScoringRequest& req) {
  check_request(req);
  const std::string fp = request_fingerprint(req);
  auto it = records_.find(fp);
  if (it == records_.end()) {
    throw ProviderError(ProviderError::Kind::unknown_fingerprint,
                        "replay fixture has no response for fingerprint " + fp);
  }
  return scoring_response_from_json(it->second);
}

GenerationResponse ReplayProvider::generate(const GenerationRequest& req) {
  check_request(req);
  const std::string fp = request_fingerprint(req);
  auto it = records_.find(fp);
  if (it == records_.end()) {
    throw ProviderError(ProviderError::Kind::unknown_fingerprint,
                        "replay fixture has no response for fingerprint " + fp);
  }
  return generation_response_from_json(it->second);
}

ScoringResponse RecordingProvider::score(const ScoringRequest& req) {
  ScoringResponse resp = inner_.score(req);
  const std::string fp = request_fingerprint(req);
  std::lock_guard lock(mu_);
  records_[fp] = Json{{"fingerprint", fp}, {"kind", "score"}, {"response", to_json(resp)}};
  return resp;
}

GenerationResponse RecordingProvider::generate(const GenerationRequest& req) {
  GenerationResponse resp = inner_.generate(req);
  const std::string fp = request_fingerprint(req);
  std::lock_guard lock(mu_);
  records_[fp] = Json{{"fingerprint", fp}, {"kind", "generate"}, {"response", to_json(resp)}};
  return resp;
}

Json RecordingProvider::fixture() const {
  std::lock_guard lock(mu_);
  Json arr = Json::array();
  for (const auto& [fp, rec] : records_) arr.push_back(rec);
  return arr;
}

void RecordingProvider::save(const std::filesystem::path& path) const {
  write_text_file_atomic(path, canonical_dump(fixture(), kExactDigits));
}

BatchError::BatchError(std::vector<std::size_t> failed, std::vector<std::string> messages)
    : Error([&] {
        std::string msg = "batch scoring failed for request(s)";
        for (std::size_t i = 0; i < failed.size(); ++i) {
          msg += (i ? ", " : " ") + std::to_string(failed[i]) + " (" + messages[i] + ")";
        }
        return msg;
      }()),
      failed_(std::move(failed)),
      messages_(std::move(messages)) {}

std::vector<ScoringResponse> batch_score(Provider& provider, std::span<const ScoringRequest> reqs,
                                         const BatchOptions& opts) {
  if (opts.max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
  std::vector<ScoringResponse> out(reqs.size());
  std::vector<std::optional<std::string>> errors(reqs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < reqs.size(); i = next++) {
      try {
        out[i] = with_retry(opts.retry, [&] {
          ScoringResponse r = provider.score(reqs[i]);
          check_response(r);
          return r;
        });
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t workers = std::min(opts.max_in_flight, reqs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  std::vector<std::size_t> failed;
  std::vector<std::string> messages;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    if (errors[i]) {
      failed.push_back(i);
      messages.push_back(*errors[i]);
    }
  }
  if (!failed.empty()) throw BatchError(std::move(failed), std::move(messages));
  return out;
}

}  // namespace vlmprog
