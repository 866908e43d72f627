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
#include <string_view>
#include <utility>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/json_io.hpp"
#include "vlmprog/provider.hpp"

namespace vlmprog {

enum class PromptKind { completion_token, instruction_likelihood, gvl_baseline };

std::string_view to_string(PromptKind k);
PromptKind prompt_kind_for(RewardVariant v);

inline constexpr std::string_view kCompletionPromptVersion = "completion-v1";
inline constexpr std::string_view kInstructionPromptVersion = "instruction-v1";
inline constexpr std::string_view kGvlPromptVersion = "gvl-v1";

/// Text that follows the video in the completion prompt, with {INSTRUCTION}
/// substituted by the caller.
inline constexpr std::string_view kTrajectoryLead =
    " The above video shows a robot manipulation trajectory that completes the following task: ";
inline constexpr std::string_view kCompletionQuestion =
    ". Decide whether the above statement is True or not. The answer is: ";
inline constexpr std::string_view kAffirmativeToken = "True";

struct PromptPair {
  std::vector<Segment> segments;
  std::string continuation;
};

/// Strips surrounding whitespace and one trailing period.
/// Throws ValidationError if nothing is left.
std::string normalize_instruction(std::string_view instruction);

/// [image..., text] where text is the trajectory lead, the instruction and the
/// True/False question; continuation "True".
PromptPair build_completion_prompt(std::span<const FrameRef> frames, std::string_view instruction);

/// [image..., text(lead)]; continuation is the instruction with a final period.
PromptPair build_instruction_prompt(std::span<const FrameRef> frames, std::string_view instruction);

struct LabeledFrame {
  int display_id = 1;
  FrameRef frame;
};

/// "Frame {id}:" markers interleaved with images, then a request for one line
/// per frame of the form "Frame {id}: {percent}%".
std::vector<Segment> build_gvl_prompt(std::span<const LabeledFrame> frames,
                                      std::string_view instruction);

/// Role markers as literal strings. user_prefix, user_suffix and
/// assistant_prefix are required (possibly empty); the system pair is optional.
struct ChatTemplate {
  std::string name = "identity";
  std::optional<std::string> system_prefix;
  std::optional<std::string> system_suffix;
  std::optional<std::string> user_prefix;
  std::optional<std::string> user_suffix;
  std::optional<std::string> assistant_prefix;

  static ChatTemplate identity();
  /// Throws ParseError("malformed chat template ...") on missing required keys.
  static ChatTemplate from_json(const Json& j);
  static ChatTemplate load(const std::filesystem::path& path);
  Json to_json() const;
  bool is_identity() const;
};

/// Surrounds the segments with the user markers and appends the assistant
/// prefix, leaving the original segments untouched. Empty markers add nothing.
std::vector<Segment> wrap_chat_template(std::vector<Segment> segments, const ChatTemplate& tmpl);

}  // namespace vlmprog
