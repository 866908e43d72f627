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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/gvl.hpp"
#include "vlmprog/http_provider.hpp"
#include "vlmprog/ingest.hpp"
#include "vlmprog/provider.hpp"
#include "vlmprog/reward.hpp"

namespace vlmprog {

/// Backend selection: "mock", "mock:TABLE.json", "replay:FIXTURE.json",
/// "http:URL" (or a bare http:// URL).
std::unique_ptr<Provider> make_provider(const std::string& backend,
                                        const HttpProviderOptions& http_opts = {});

/// SHA-256 of the canonical rendering of `config`.
std::string config_fingerprint(const Json& config);

struct ScoreOptions {
  RewardConfig reward;
  std::size_t jobs = 1;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> record_fixture;
  std::string backend_label;
};

struct ScoreSummary {
  std::size_t episodes = 0;
  std::string fingerprint;
};

/// Writes `{id}.reward.json`, `{id}.progress.json` and `run.score.json`.
ScoreSummary run_score(const Manifest& manifest, Provider& provider, const ScoreOptions& opts);

struct EvaluateOptions {
  /// Trace kind to evaluate: "progress" (reward model) or "gvl".
  std::string kind = "progress";
  int success_tail = 3;
};

EvalReport run_evaluate(const Manifest& manifest, const std::filesystem::path& traces_dir,
                        const EvaluateOptions& opts = {});

struct SuccessReport {
  std::map<std::string, double> scores;
  std::map<std::string, std::optional<bool>> labels;
  std::optional<double> roc_auc;
  int tail = 3;
  std::string fingerprint;
  Json to_json() const;
};

/// Success score per episode from its reward trace, and ROC-AUC over the
/// labeled episodes when both classes are present.
SuccessReport run_success(const Manifest& manifest, const std::filesystem::path& traces_dir, int tail);

struct GvlRunOptions {
  GvlConfig gvl;
  std::size_t jobs = 1;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> record_fixture;
  std::string backend_label;
};

struct GvlSummary {
  std::size_t episodes = 0;
  std::size_t parse_failures = 0;
  std::string fingerprint;
};

/// Writes `{id}.gvl.json` per parsed episode, `gvl_failures.json` and `run.gvl.json`.
/// Episode i (manifest order) uses seed gvl.seed + i.
GvlSummary run_gvl(const Manifest& manifest, Provider& provider, const GvlRunOptions& opts);

struct AdvantageSummary {
  std::size_t written = 0;
  std::vector<std::string> skipped;
  std::string fingerprint;
};

/// Reads every `*.progress.json` in traces_dir, writes `{id}.advantage.json`
/// and `run.advantages.json` into out_dir. Traces shorter than 2 are skipped.
AdvantageSummary run_advantages(const std::filesystem::path& traces_dir, double scale_tau,
                                double delta_max, const std::filesystem::path& out_dir);

/// Default --jobs: logical processors, capped by what the provider accepts.
std::size_t default_jobs(const Provider& provider);

}  // namespace vlmprog
