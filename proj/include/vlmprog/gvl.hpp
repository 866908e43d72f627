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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/prompt.hpp"
#include "vlmprog/provider.hpp"

namespace vlmprog {

struct ShuffledFrames {
  /// Frames in presentation order, labeled with display ids 1..n.
  std::vector<LabeledFrame> labeled;
  /// permutation[d - 1] = chronological position of the frame shown as d.
  std::vector<std::size_t> permutation;

  /// Maps per-display-id values back to chronological order.
  template <typename T>
  std::vector<T> unshuffle(std::span<const T> by_display_id) const {
    std::vector<T> out(by_display_id.size());
    for (std::size_t d = 0; d < permutation.size(); ++d) out[permutation[d]] = by_display_id[d];
    return out;
  }
};

/// Seeded Fisher-Yates over std::mt19937_64, identical on every platform.
ShuffledFrames shuffle_frames(std::span<const FrameRef> frames, std::uint64_t seed);

class GvlParseError : public ParseError {
 public:
  using ParseError::ParseError;
};

struct GvlParse {
  /// Progress per display id (index d-1), each in [0,1].
  std::vector<double> values;
  std::vector<std::string> warnings;
};

/// Reads "Frame {id}: {v}%" (v/100) or "Frame {id}: {v}" lines; other lines are
/// ignored. Out-of-range values are clamped with a warning. Throws
/// GvlParseError when nothing parses, ids are duplicated or out of range, or
/// some ids are missing.
GvlParse parse_gvl_output(const std::string& text, int n);

struct GvlResult {
  std::string episode_id;
  /// Chronological progress trace; empty entries on parse failure.
  ProgressTrace trace;
  std::optional<std::string> parse_failure;
  std::vector<std::string> warnings;
  std::string raw_text;
  std::vector<std::size_t> permutation;
};

struct GvlConfig {
  int k_count = 16;
  std::uint64_t seed = 0;
  int max_tokens = 1024;
  RetryPolicy retry;
  Json to_json() const;
};

/// K frames spaced like plan_prefixes, shuffled, one generation call, parsed
/// and put back in chronological order. Parse problems are recorded in the
/// result; provider errors propagate.
GvlResult gvl_episode(const Episode& e, const GvlConfig& cfg, Provider& provider);

}  // namespace vlmprog
