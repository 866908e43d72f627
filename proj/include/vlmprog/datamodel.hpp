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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlmprog {

/// 1-based frame index within an episode.
using FrameIndex = int;

/// Frames per second as a positive rational, e.g. 30000/1001.
struct Fps {
  std::int64_t num = 1;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  double period() const { return static_cast<double>(den) / static_cast<double>(num); }
  bool operator==(const Fps&) const = default;
};

struct FrameRef {
  FrameIndex index = 1;
  double timestamp_s = 0.0;
  /// Path (relative to the manifest directory or absolute) of a decoded still.
  std::string uri;

  bool operator==(const FrameRef&) const = default;
};

struct SubtaskSpan {
  std::string name;
  double start_second = 0.0;
  double end_second = 0.0;

  bool operator==(const SubtaskSpan&) const = default;
};

struct Episode {
  std::string id;
  std::string instruction;
  std::vector<FrameRef> frames;
  Fps fps;
  std::optional<std::vector<SubtaskSpan>> annotations;
  std::optional<bool> success_label;
  std::optional<std::string> platform_tag;

  /// Number of frames (T).
  int frame_count() const { return static_cast<int>(frames.size()); }
  /// Last frame timestamp plus one frame period; 0 for an empty episode.
  double duration_s() const;
  /// Frame with the given 1-based index. Throws ValidationError if absent.
  const FrameRef& frame(FrameIndex index) const;

  bool operator==(const Episode&) const = default;
};

/// One broken rule. `field` names the offending part, `rule` says what broke.
struct Violation {
  std::string field;
  std::string rule;

  std::string to_string() const { return field + ": " + rule; }
  auto operator<=>(const Violation&) const = default;
};

struct ValidationOptions {
  /// Largest allowed gap between consecutive annotation spans, in seconds.
  double annotation_granularity_s = 0.1;
};

/// Checks every Episode, FrameRef and SubtaskSpan invariant. Returns a sorted,
/// de-duplicated list; empty means the episode is valid.
std::vector<Violation> validate_episode(const Episode& e, const ValidationOptions& opts = {});

struct PrefixPlan {
  /// Requested K before clamping.
  int k_count = 2;
  /// t_1 < ... < t_K with t_1 = 1 and t_K = T.
  std::vector<FrameIndex> prefix_ends;
  int frames_per_prefix_cap = 16;
  /// Set when K exceeded T and duplicate prefix ends were dropped.
  bool clamped = false;

  bool operator==(const PrefixPlan&) const = default;
};

enum class RewardVariant { completion_token, instruction_likelihood };

std::string_view to_string(RewardVariant v);
/// Accepts the canonical names plus the short CLI forms "completion"/"instruction".
RewardVariant parse_reward_variant(std::string_view s);

struct RewardEntry {
  FrameIndex t_k = 1;
  /// Log-probability in nats, always <= 0.
  double r = 0.0;
  bool operator==(const RewardEntry&) const = default;
};

struct RewardTrace {
  std::string episode_id;
  std::vector<RewardEntry> entries;
  RewardVariant variant = RewardVariant::completion_token;
  bool operator==(const RewardTrace&) const = default;
};

struct ProgressEntry {
  FrameIndex t_k = 1;
  double s = 0.0;
  bool operator==(const ProgressEntry&) const = default;
};

struct ProgressTrace {
  std::string episode_id;
  std::vector<ProgressEntry> entries;
  double epsilon = 1e-8;
  bool operator==(const ProgressTrace&) const = default;
};

struct AdvantageEntry {
  FrameIndex t_k = 2;
  double delta = 0.0;
  bool operator==(const AdvantageEntry&) const = default;
};

struct AdvantageTrace {
  std::string episode_id;
  std::vector<AdvantageEntry> entries;
  double scale_tau = 2.0;
  double delta_max = 2.0;
  bool operator==(const AdvantageTrace&) const = default;
};

struct EpisodeEval {
  double voc = 0.0;
  std::optional<double> success_score;
  std::vector<double> final_raw_rewards;
  std::optional<bool> success_label;
  /// The episode produced no usable prediction (e.g. unparseable GVL output);
  /// its VOC is counted as 0 but reported separately.
  bool parse_failure = false;
  bool operator==(const EpisodeEval&) const = default;
};

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  bool operator==(const GroupStats&) const = default;
};

struct EvalReport {
  std::map<std::string, EpisodeEval> per_episode;
  std::map<std::string, GroupStats> per_task;
  std::map<std::string, GroupStats> per_dataset;
  /// Episode id -> task, task -> dataset, as used for the aggregation.
  std::map<std::string, std::string> episode_task;
  std::map<std::string, std::string> task_dataset;
  std::optional<double> roc_auc;
  std::string config_fingerprint;
  std::map<std::string, std::string> metadata;
  bool operator==(const EvalReport&) const = default;
};

}  // namespace vlmprog
