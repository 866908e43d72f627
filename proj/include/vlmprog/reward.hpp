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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/json_io.hpp"
#include "vlmprog/prompt.hpp"
#include "vlmprog/provider.hpp"

namespace vlmprog {

struct RewardConfig {
  int k_count = 16;
  int frames_per_prefix_cap = 16;
  double epsilon = 1e-8;
  RewardVariant variant = RewardVariant::completion_token;
  /// Absent means no chat template, the default scoring mode.
  std::optional<ChatTemplate> chat_template;
  int success_tail = 3;
  /// Concurrent provider calls within one episode.
  std::size_t max_in_flight = 1;
  RetryPolicy retry;

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
  /// Every parameter that affects results; hashed into run fingerprints.
  Json to_json() const;
};

/// t_k = round_half_up(1 + (k-1)(T-1)/(K-1)) for k = 1..K, de-duplicated.
/// Computed in integer arithmetic so results are exact.
PrefixPlan plan_prefixes(int frame_count, int k_count, int frames_per_prefix_cap = 16);

/// min(t_k, cap) frames evenly spread over [1, t_k] with the same spacing rule.
std::vector<FrameRef> subsample_prefix(const Episode& e, FrameIndex t_k, int frames_per_prefix_cap);

/// The request scored for prefix t_k under the configured prompt variant.
ScoringRequest prefix_request(const Episode& e, FrameIndex t_k, const RewardConfig& cfg);

/// Failure while scoring one prefix; names the prefix end.
class ScoreError : public Error {
 public:
  ScoreError(std::string episode_id, FrameIndex t_k, const std::string& cause);
  const std::string& episode_id() const { return episode_id_; }
  FrameIndex t_k() const { return t_k_; }

 private:
  std::string episode_id_;
  FrameIndex t_k_;
};

/// One provider call per planned prefix. The completion variant records the
/// summed log-probability of "True"; the instruction variant records the sum of
/// the instruction's per-token log-probabilities.
RewardTrace score_episode(const Episode& e, const RewardConfig& cfg, Provider& provider);

/// Min-max normalization into [0,1]: (r - min) / (max - min + epsilon).
ProgressTrace normalize(const RewardTrace& trace, double epsilon);

/// delta_k = clip(scale_tau * exp(s_k - s_{k-1}), 0, delta_max) for k >= 2.
AdvantageTrace advantages(const ProgressTrace& trace, double scale_tau, double delta_max);

/// Mean of the last `tail` raw log-probabilities.
double success_score(const RewardTrace& trace, int tail);

}  // namespace vlmprog
