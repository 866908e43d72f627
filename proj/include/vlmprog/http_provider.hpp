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
#include <string>

#include "vlmprog/provider.hpp"

namespace vlmprog {

struct HttpProviderOptions {
  std::chrono::seconds timeout{120};
  /// Sent as "Authorization: Bearer ..." when non-empty.
  std::string api_key;
  std::size_t max_in_flight = 4;
};

/// Client for the JSON-over-HTTP scoring sidecar:
///   POST /v1/score, POST /v1/generate, GET /v1/health.
/// Transport failures and 5xx answers raise retryable ProviderErrors; 4xx
/// answers raise `rejected` with the server's error text.
class HttpProvider : public Provider {
 public:
  /// `base_url` like "http://127.0.0.1:8000" with an optional path prefix.
  explicit HttpProvider(std::string base_url, HttpProviderOptions opts = {});

  ScoringResponse score(const ScoringRequest& req) override;
  GenerationResponse generate(const GenerationRequest& req) override;
  HealthStatus health() override;
  std::size_t max_in_flight() const override { return opts_.max_in_flight; }

 private:
  Json post(const std::string& path, const Json& body);

  std::string scheme_host_port_;
  std::string path_prefix_;
  HttpProviderOptions opts_;
};

}  // namespace vlmprog
