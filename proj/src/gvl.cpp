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

#include "vlmprog/gvl.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include "vlmprog/reward.hpp"

namespace vlmprog {
namespace {

// Unbiased draw from [0, bound) by rejection; only uses the engine's raw output.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

ShuffledFrames shuffle_frames(std::span<const FrameRef> frames, std::uint64_t seed) {
  ShuffledFrames out;
  out.permutation.resize(frames.size());
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = frames.size(); i > 1; --i) {
    std::swap(out.permutation[i - 1], out.permutation[bounded(rng, i)]);
  }
  out.labeled.reserve(frames.size());
  for (std::size_t d = 0; d < frames.size(); ++d) {
    out.labeled.push_back({static_cast<int>(d + 1), frames[out.permutation[d]]});
  }
  return out;
}

GvlParse parse_gvl_output(const std::string& text, int n) {
  if (n < 1) throw ValidationError("parse_gvl_output: n must be >= 1");
  static const std::regex line_re(
      R"(^[^\w]*frame\s*(\d+)\s*\**\s*[:=]\s*\**\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+))\s*(%?))",
      std::regex::icase);
  std::map<int, double> by_id;
  GvlParse out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, line_re)) continue;
    const int id = std::stoi(m[1].str());
    double v = std::stod(m[2].str());
    if (m[3].length() > 0) v /= 100.0;
    if (id < 1 || id > n) {
      throw GvlParseError("unexpected frame id " + std::to_string(id));
    }
    if (by_id.contains(id)) throw GvlParseError("duplicate frame id " + std::to_string(id));
    if (v < 0.0 || v > 1.0) {
      out.warnings.push_back("frame " + std::to_string(id) + " value clamped to [0,1]");
      v = std::clamp(v, 0.0, 1.0);
    }
    by_id[id] = v;
  }
  if (by_id.empty()) throw GvlParseError("unparseable GVL output");
  std::string missing;
  for (int id = 1; id <= n; ++id) {
    if (!by_id.contains(id)) missing += (missing.empty() ? "" : ",") + std::to_string(id);
  }
  if (!missing.empty()) throw GvlParseError("wrong count: missing frame ids " + missing);
  for (const auto& [id, v] : by_id) out.values.push_back(v);
  return out;
}

Json GvlConfig::to_json() const {
  return Json{{"k_count", k_count},
              {"seed", seed},
              {"max_tokens", max_tokens},
              {"prompt_version", std::string(kGvlPromptVersion)},
              {"calls_per_episode", 1}};
}

GvlResult gvl_episode(const Episode& e, const GvlConfig& cfg, Provider& provider) {
  const PrefixPlan plan = plan_prefixes(e.frame_count(), cfg.k_count);
  std::vector<FrameRef> sampled;
  sampled.reserve(plan.prefix_ends.size());
  for (FrameIndex t : plan.prefix_ends) sampled.push_back(e.frame(t));

  const ShuffledFrames shuffled = shuffle_frames(sampled, cfg.seed);
  GenerationRequest req{build_gvl_prompt(shuffled.labeled, e.instruction), cfg.max_tokens, 0.0};
  const GenerationResponse resp = with_retry(cfg.retry, [&] { return provider.generate(req); });

  GvlResult result;
  result.episode_id = e.id;
  result.raw_text = resp.text;
  result.permutation = shuffled.permutation;
  result.trace.episode_id = e.id;
  result.trace.epsilon = 0.0;
  try {
    GvlParse parsed = parse_gvl_output(resp.text, static_cast<int>(sampled.size()));
    result.warnings = std::move(parsed.warnings);
    const auto chrono = shuffled.unshuffle<double>(parsed.values);
    for (std::size_t i = 0; i < chrono.size(); ++i) {
      result.trace.entries.push_back({plan.prefix_ends[i], chrono[i]});
    }
  } catch (const GvlParseError& err) {
    result.parse_failure = err.what();
  }
  return result;
}

}  // namespace vlmprog
