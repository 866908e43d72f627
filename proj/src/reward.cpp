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

#include "vlmprog/reward.hpp"

#include <algorithm>
#include <cmath>

namespace vlmprog {
namespace {

// round_half_up(1 + (k-1)(n-1)/(m-1)) for 1-based k, exactly.
FrameIndex spaced_index(long long k, long long n, long long m) {
  if (m <= 1) return static_cast<FrameIndex>(n);
  const long long num = (m - 1) + (k - 1) * (n - 1);
  const long long den = m - 1;
  return static_cast<FrameIndex>((2 * num + den) / (2 * den));
}

}  // namespace

void RewardConfig::validate() const {
  if (k_count < 2) throw ValidationError("k_count must be >= 2");
  if (frames_per_prefix_cap < 1) throw ValidationError("frames_per_prefix_cap must be >= 1");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (success_tail < 1) throw ValidationError("success_tail must be >= 1");
  if (max_in_flight < 1) throw ValidationError("max_in_flight must be >= 1");
}

Json RewardConfig::to_json() const {
  return Json{{"k_count", k_count},
              {"frames_per_prefix_cap", frames_per_prefix_cap},
              {"epsilon", epsilon},
              {"variant", std::string(to_string(variant))},
              {"prompt_version", std::string(variant == RewardVariant::completion_token
                                                 ? kCompletionPromptVersion
                                                 : kInstructionPromptVersion)},
              {"chat_template", chat_template ? chat_template->to_json() : Json(nullptr)},
              {"success_tail", success_tail},
              {"prefix_rounding", "half_up"}};
}

PrefixPlan plan_prefixes(int frame_count, int k_count, int frames_per_prefix_cap) {
  if (frame_count < 1) throw ValidationError("plan_prefixes needs at least one frame");
  if (k_count < 2) throw ValidationError("k_count must be >= 2");
  PrefixPlan plan;
  plan.k_count = k_count;
  plan.frames_per_prefix_cap = frames_per_prefix_cap;
  for (int k = 1; k <= k_count; ++k) {
    const FrameIndex t = spaced_index(k, frame_count, k_count);
    if (plan.prefix_ends.empty() || plan.prefix_ends.back() != t) plan.prefix_ends.push_back(t);
  }
  plan.clamped = static_cast<int>(plan.prefix_ends.size()) < k_count;
  return plan;
}

std::vector<FrameRef> subsample_prefix(const Episode& e, FrameIndex t_k, int frames_per_prefix_cap) {
  if (t_k < 1 || t_k > e.frame_count()) {
    throw ValidationError("prefix end " + std::to_string(t_k) + " outside episode " + e.id);
  }
  if (frames_per_prefix_cap < 1) throw ValidationError("frames_per_prefix_cap must be >= 1");
  const int m = std::min(t_k, frames_per_prefix_cap);
  std::vector<FrameRef> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int j = 1; j <= m; ++j) out.push_back(e.frame(spaced_index(j, t_k, m)));
  return out;
}

ScoringRequest prefix_request(const Episode& e, FrameIndex t_k, const RewardConfig& cfg) {
  const auto frames = subsample_prefix(e, t_k, cfg.frames_per_prefix_cap);
  PromptPair p = cfg.variant == RewardVariant::completion_token
                     ? build_completion_prompt(frames, e.instruction)
                     : build_instruction_prompt(frames, e.instruction);
  if (cfg.chat_template) p.segments = wrap_chat_template(std::move(p.segments), *cfg.chat_template);
  return {std::move(p.segments), std::move(p.continuation),
          cfg.variant == RewardVariant::instruction_likelihood};
}

ScoreError::ScoreError(std::string episode_id, FrameIndex t_k, const std::string& cause)
    : Error("episode " + episode_id + ", prefix t_k=" + std::to_string(t_k) + ": " + cause),
      episode_id_(std::move(episode_id)),
      t_k_(t_k) {}

RewardTrace score_episode(const Episode& e, const RewardConfig& cfg, Provider& provider) {
  cfg.validate();
  const PrefixPlan plan = plan_prefixes(e.frame_count(), cfg.k_count, cfg.frames_per_prefix_cap);

  std::vector<ScoringRequest> reqs;
  reqs.reserve(plan.prefix_ends.size());
  for (FrameIndex t : plan.prefix_ends) reqs.push_back(prefix_request(e, t, cfg));

  std::vector<ScoringResponse> responses;
  try {
    responses = batch_score(provider, reqs, {cfg.max_in_flight, cfg.retry});
  } catch (const BatchError& be) {
    const std::size_t first = be.failed_indices().front();
    throw ScoreError(e.id, plan.prefix_ends[first], be.messages().front());
  }

  RewardTrace trace{e.id, {}, cfg.variant};
  trace.entries.reserve(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    double r = 0.0;
    if (cfg.variant == RewardVariant::instruction_likelihood) {
      for (const auto& t : responses[i].token_logprobs) r += t.logprob;
    } else {
      r = responses[i].sum_logprob;
    }
    trace.entries.push_back({plan.prefix_ends[i], r});
  }
  return trace;
}

ProgressTrace normalize(const RewardTrace& trace, double epsilon) {
  if (trace.entries.empty()) throw ValidationError("cannot normalize an empty trace");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  double lo = trace.entries.front().r;
  double hi = lo;
  for (const auto& e : trace.entries) {
    if (!std::isfinite(e.r)) throw ValidationError("non-finite reward in trace " + trace.episode_id);
    lo = std::min(lo, e.r);
    hi = std::max(hi, e.r);
  }
  const double denom = hi - lo + epsilon;
  ProgressTrace out{trace.episode_id, {}, epsilon};
  out.entries.reserve(trace.entries.size());
  for (const auto& e : trace.entries) out.entries.push_back({e.t_k, (e.r - lo) / denom});
  return out;
}

AdvantageTrace advantages(const ProgressTrace& trace, double scale_tau, double delta_max) {
  if (trace.entries.size() < 2) {
    throw ValidationError("advantages need a trace of length >= 2 (" + trace.episode_id + ")");
  }
  if (!(scale_tau > 0.0)) throw ValidationError("scale_tau must be > 0");
  if (!(delta_max > 0.0)) throw ValidationError("delta_max must be > 0");
  AdvantageTrace out{trace.episode_id, {}, scale_tau, delta_max};
  out.entries.reserve(trace.entries.size() - 1);
  for (std::size_t k = 1; k < trace.entries.size(); ++k) {
    const double inc = trace.entries[k].s - trace.entries[k - 1].s;
    const double delta = std::clamp(scale_tau * std::exp(inc), 0.0, delta_max);
    out.entries.push_back({trace.entries[k].t_k, delta});
  }
  return out;
}

double success_score(const RewardTrace& trace, int tail) {
  if (tail < 1) throw ValidationError("success tail must be >= 1");
  if (static_cast<int>(trace.entries.size()) < tail) {
    throw ValidationError("trace " + trace.episode_id + " shorter than success tail");
  }
  double sum = 0.0;
  for (auto it = trace.entries.end() - tail; it != trace.entries.end(); ++it) sum += it->r;
  return sum / tail;
}

}  // namespace vlmprog
