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

#include "vlmprog/http_provider.hpp"

#include <httplib.h>

namespace vlmprog {
namespace {

httplib::Client make_client(const std::string& shp, const HttpProviderOptions& opts) {
  httplib::Client cli(shp);
  cli.set_connection_timeout(opts.timeout);
  cli.set_read_timeout(opts.timeout);
  cli.set_write_timeout(opts.timeout);
  if (!opts.api_key.empty()) cli.set_bearer_token_auth(opts.api_key);
  return cli;
}

std::string error_text(const std::string& body) {
  try {
    const Json j = Json::parse(body);
    if (j.contains("error") && j["error"].is_string()) return j["error"].get<std::string>();
  } catch (const Json::exception&) {
  }
  return body;
}

}  // namespace

HttpProvider::HttpProvider(std::string base_url, HttpProviderOptions opts) : opts_(std::move(opts)) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("http backend URL needs a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = base_url;
  } else {
    scheme_host_port_ = base_url.substr(0, path_start);
    path_prefix_ = base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

Json HttpProvider::post(const std::string& path, const Json& body) {
  auto cli = make_client(scheme_host_port_, opts_);
  auto res = cli.Post(path_prefix_ + path, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(ProviderError::Kind::transport,
                        "transport failure on " + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status >= 500) {
    throw ProviderError(ProviderError::Kind::transport,
                        "server error " + std::to_string(res->status) + ": " + error_text(res->body));
  }
  if (res->status >= 400) {
    throw ProviderError(ProviderError::Kind::rejected,
                        "backend rejected request (" + std::to_string(res->status) +
                            "): " + error_text(res->body));
  }
  try {
    return Json::parse(res->body);
  } catch (const Json::exception&) {
    throw ProviderError(ProviderError::Kind::rejected, "backend returned malformed JSON");
  }
}

ScoringResponse HttpProvider::score(const ScoringRequest& req) {
  check_request(req);
  ScoringResponse resp;
  try {
    resp = scoring_response_from_json(post("/v1/score", to_wire(req)));
  } catch (const ParseError& e) {
    throw ProviderError(ProviderError::Kind::rejected, e.what());
  }
  std::string joined;
  for (const auto& t : resp.token_logprobs) joined += t.token;
  if (joined != req.continuation) {
    throw ProviderError(ProviderError::Kind::tokenization_mismatch,
                        "backend tokenized continuation as '" + joined + "', expected '" +
                            req.continuation + "'");
  }
  check_response(resp);
  return resp;
}

GenerationResponse HttpProvider::generate(const GenerationRequest& req) {
  check_request(req);
  try {
    return generation_response_from_json(post("/v1/generate", to_wire(req)));
  } catch (const ParseError& e) {
    throw ProviderError(ProviderError::Kind::rejected, e.what());
  }
}

HealthStatus HttpProvider::health() {
  auto cli = make_client(scheme_host_port_, opts_);
  auto res = cli.Get(path_prefix_ + "/v1/health");
  if (!res || res->status != 200) return {"", false};
  try {
    const Json j = Json::parse(res->body);
    return {j.value("model_id", std::string{}), j.value("ready", false)};
  } catch (const Json::exception&) {
    return {"", false};
  }
}

}  // namespace vlmprog
