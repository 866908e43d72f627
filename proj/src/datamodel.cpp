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

#include "vlmprog/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vlmprog/errors.hpp"

namespace vlmprog {
namespace {

// Absorbs binary rounding in second-valued comparisons (e.g. 4.0 - 3.9 > 0.1).
constexpr double kTimeTolerance = 1e-9;

}  // namespace

double Episode::duration_s() const {
  if (frames.empty()) return 0.0;
  return frames.back().timestamp_s + fps.period();
}

const FrameRef& Episode::frame(FrameIndex index) const {
  // Frames are normally stored densely as 1..T.
  if (index >= 1 && index <= frame_count() && frames[index - 1].index == index) {
    return frames[index - 1];
  }
  auto it = std::find_if(frames.begin(), frames.end(),
                         [index](const FrameRef& f) { return f.index == index; });
  if (it == frames.end()) {
    throw ValidationError("episode " + id + " has no frame " + std::to_string(index));
  }
  return *it;
}

std::vector<Violation> validate_episode(const Episode& e, const ValidationOptions& opts) {
  std::vector<Violation> out;
  auto add = [&out](std::string field, std::string rule) {
    out.push_back({std::move(field), std::move(rule)});
  };

  if (e.id.empty()) add("id", "id empty");
  if (e.instruction.empty()) add("instruction", "instruction empty");
  const bool fps_ok = e.fps.num > 0 && e.fps.den > 0;
  if (!fps_ok) add("fps", "fps not positive");

  if (e.frames.empty()) {
    add("frames", "frames empty");
  } else {
    std::set<FrameIndex> seen;
    for (std::size_t i = 0; i < e.frames.size(); ++i) {
      const FrameRef& f = e.frames[i];
      if (f.index < 1) add("frames", "frame index below 1");
      if (!seen.insert(f.index).second) add("frames", "duplicate frame index");
      if (!std::isfinite(f.timestamp_s) || f.timestamp_s < 0.0) {
        add("frames", "negative or non-finite timestamp");
      }
      if (i > 0 && !(f.timestamp_s > e.frames[i - 1].timestamp_s)) {
        add("frames", "timestamps not strictly increasing");
      }
      if (fps_ok && f.index >= 1 && std::isfinite(f.timestamp_s)) {
        const double expected = (f.index - 1) * e.fps.period();
        if (std::abs(f.timestamp_s - expected) > e.fps.period() + kTimeTolerance) {
          add("frames", "timestamp inconsistent with index and fps");
        }
      }
      if (f.uri.empty()) add("frames", "frame uri empty");
    }
  }

  if (e.annotations) {
    const auto& spans = *e.annotations;
    const double duration = e.duration_s();
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const SubtaskSpan& s = spans[i];
      if (!(s.start_second < s.end_second)) add("annotations", "span start not before end");
      if (s.start_second < -kTimeTolerance || s.end_second > duration + kTimeTolerance) {
        add("annotations", "span outside episode");
      }
      if (i == 0) continue;
      const SubtaskSpan& prev = spans[i - 1];
      if (s.start_second < prev.start_second) {
        add("annotations", "spans out of order");
      } else if (s.start_second < prev.end_second - kTimeTolerance) {
        add("annotations", "overlapping spans");
      } else if (s.start_second - prev.end_second >
                 opts.annotation_granularity_s + kTimeTolerance) {
        add("annotations", "gap between spans exceeds granularity");
      }
    }
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string_view to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::completion_token:
      return "completion_token";
    case RewardVariant::instruction_likelihood:
      return "instruction_likelihood";
  }
  return "unknown";
}

RewardVariant parse_reward_variant(std::string_view s) {
  if (s == "completion_token" || s == "completion") return RewardVariant::completion_token;
  if (s == "instruction_likelihood" || s == "instruction") {
    return RewardVariant::instruction_likelihood;
  }
  throw ParseError("unknown reward variant: " + std::string(s));
}

}  // namespace vlmprog
