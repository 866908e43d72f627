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

#include "vlmprog/prompt.hpp"

#include <set>

namespace vlmprog {
namespace {

std::vector<Segment> image_segments(std::span<const FrameRef> frames) {
  std::vector<Segment> segs;
  segs.reserve(frames.size() + 1);
  for (const auto& f : frames) segs.push_back(image_segment(f));
  return segs;
}

void require_frames(std::span<const FrameRef> frames) {
  if (frames.empty()) throw ValidationError("prompt needs at least one frame");
}

std::optional<std::string> optional_marker(const Json& j, const char* key, bool required) {
  if (!j.contains(key)) {
    if (required) throw ParseError(std::string("malformed chat template: missing '") + key + "'");
    return std::nullopt;
  }
  if (!j[key].is_string()) {
    throw ParseError(std::string("malformed chat template: '") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

}  // namespace

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::completion_token:
      return "completion_token";
    case PromptKind::instruction_likelihood:
      return "instruction_likelihood";
    case PromptKind::gvl_baseline:
      return "gvl_baseline";
  }
  return "unknown";
}

PromptKind prompt_kind_for(RewardVariant v) {
  return v == RewardVariant::completion_token ? PromptKind::completion_token
                                              : PromptKind::instruction_likelihood;
}

std::string normalize_instruction(std::string_view instruction) {
  constexpr std::string_view ws = " \t\r\n";
  const auto b = instruction.find_first_not_of(ws);
  if (b == std::string_view::npos) throw ValidationError("instruction empty");
  instruction = instruction.substr(b, instruction.find_last_not_of(ws) - b + 1);
  if (instruction.back() == '.') instruction.remove_suffix(1);
  if (instruction.empty()) throw ValidationError("instruction empty");
  return std::string(instruction);
}

PromptPair build_completion_prompt(std::span<const FrameRef> frames, std::string_view instruction) {
  require_frames(frames);
  const std::string inst = normalize_instruction(instruction);
  PromptPair p{image_segments(frames), std::string(kAffirmativeToken)};
  p.segments.push_back(
      text_segment(std::string(kTrajectoryLead) + inst + std::string(kCompletionQuestion)));
  return p;
}

PromptPair build_instruction_prompt(std::span<const FrameRef> frames, std::string_view instruction) {
  require_frames(frames);
  PromptPair p{image_segments(frames), normalize_instruction(instruction) + "."};
  p.segments.push_back(text_segment(std::string(kTrajectoryLead)));
  return p;
}

std::vector<Segment> build_gvl_prompt(std::span<const LabeledFrame> frames,
                                      std::string_view instruction) {
  if (frames.empty()) throw ValidationError("GVL prompt needs at least one frame");
  const std::string inst = normalize_instruction(instruction);
  std::set<int> ids;
  for (const auto& lf : frames) {
    if (lf.display_id < 1 || lf.display_id > static_cast<int>(frames.size())) {
      throw ValidationError("GVL display ids must be 1..n");
    }
    if (!ids.insert(lf.display_id).second) throw ValidationError("duplicate GVL display id");
  }

  std::vector<Segment> segs;
  for (const auto& lf : frames) {
    segs.push_back(text_segment("Frame " + std::to_string(lf.display_id) + ":"));
    segs.push_back(image_segment(lf.frame));
  }
  const std::string n = std::to_string(frames.size());
  segs.push_back(text_segment(
      "\nThe frames above come from a video of a robot manipulation trajectory and are "
      "shown in random order. The task is: " + inst +
      ".\nFor each frame, estimate how much of the task has been completed at that frame, "
      "as a percentage from 0% (not started) to 100% (fully completed). "
      "Answer with exactly " + n + " lines, one per frame, each of the form "
      "\"Frame {id}: {percent}%\", and nothing else.\n"));
  return segs;
}

ChatTemplate ChatTemplate::identity() {
  ChatTemplate t;
  t.user_prefix = "";
  t.user_suffix = "";
  t.assistant_prefix = "";
  return t;
}

ChatTemplate ChatTemplate::from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("malformed chat template: expected an object");
  ChatTemplate t;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError("malformed chat template: 'name' must be a string");
    t.name = j["name"].get<std::string>();
  } else {
    t.name = "custom";
  }
  t.system_prefix = optional_marker(j, "system_prefix", false);
  t.system_suffix = optional_marker(j, "system_suffix", false);
  t.user_prefix = optional_marker(j, "user_prefix", true);
  t.user_suffix = optional_marker(j, "user_suffix", true);
  t.assistant_prefix = optional_marker(j, "assistant_prefix", true);
  return t;
}

ChatTemplate ChatTemplate::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

Json ChatTemplate::to_json() const {
  Json j{{"name", name}};
  auto put = [&j](const char* k, const std::optional<std::string>& v) {
    if (v) j[k] = *v;
  };
  put("system_prefix", system_prefix);
  put("system_suffix", system_suffix);
  put("user_prefix", user_prefix);
  put("user_suffix", user_suffix);
  put("assistant_prefix", assistant_prefix);
  return j;
}

bool ChatTemplate::is_identity() const {
  auto empty = [](const std::optional<std::string>& v) { return !v || v->empty(); };
  return empty(system_prefix) && empty(system_suffix) && empty(user_prefix) &&
         empty(user_suffix) && empty(assistant_prefix);
}

std::vector<Segment> wrap_chat_template(std::vector<Segment> segments, const ChatTemplate& tmpl) {
  if (!tmpl.user_prefix || !tmpl.user_suffix || !tmpl.assistant_prefix) {
    throw ParseError("malformed chat template: user and assistant markers are required");
  }
  std::vector<Segment> out;
  out.reserve(segments.size() + 3);
  const std::string system = tmpl.system_prefix.value_or("") + tmpl.system_suffix.value_or("");
  if (!system.empty()) out.push_back(text_segment(system));
  if (!tmpl.user_prefix->empty()) out.push_back(text_segment(*tmpl.user_prefix));
  for (auto& s : segments) out.push_back(std::move(s));
  const std::string tail = *tmpl.user_suffix + *tmpl.assistant_prefix;
  if (!tail.empty()) out.push_back(text_segment(tail));
  return out;
}

}  // namespace vlmprog
