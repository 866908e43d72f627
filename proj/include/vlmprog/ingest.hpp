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
#include <string>
#include <vector>

#include "vlmprog/datamodel.hpp"
#include "vlmprog/json_io.hpp"

namespace vlmprog {

/// Schema versions this build reads and writes ("1" and "1.x").
inline constexpr const char* kSchemaVersion = "1.0";

struct Manifest {
  std::string dataset_name;
  std::string schema_version = kSchemaVersion;
  std::vector<Episode> episodes;
  /// Validation findings that did not abort loading (non-strict mode).
  std::vector<std::string> warnings;
  /// Directory relative frame URIs are resolved against.
  std::filesystem::path base_dir;

  const Episode& episode(const std::string& id) const;

  /// Compares the persisted content only (warnings and base_dir excluded).
  bool operator==(const Manifest& o) const {
    return dataset_name == o.dataset_name && schema_version == o.schema_version &&
           episodes == o.episodes;
  }
};

struct LoadOptions {
  /// Validation violations abort the load instead of becoming warnings.
  bool strict = true;
  /// Check that every frame URI resolves to an existing file at load time.
  bool check_frames = false;
  ValidationOptions validation;
};

/// Throws ParseError (malformed document or schema-version mismatch),
/// ValidationError (duplicate ids, strict-mode violations, missing frames).
Manifest load_manifest(const std::filesystem::path& path, const LoadOptions& opts = {});
/// Written with full-precision numbers so user-supplied times round-trip exactly.
void write_manifest(const Manifest& m, const std::filesystem::path& path);

/// Index of the last frame whose timestamp is <= t_s.
/// Throws ValidationError when t_s lies outside [0, duration].
FrameIndex seconds_to_frame(const Episode& e, double t_s);

/// Copy of the episode with every relative frame URI made absolute against base_dir.
Episode resolve_frame_uris(Episode e, const std::filesystem::path& base_dir);

// JSON mapping of the domain types. These are the wire schemas used by the
// manifest, trace files and the annotation service.
Json to_json(const FrameRef& f);
Json to_json(const SubtaskSpan& s);
Json to_json(const std::vector<SubtaskSpan>& spans);
Json to_json(const Episode& e);
Json to_json(const RewardTrace& t);
Json to_json(const ProgressTrace& t);
Json to_json(const AdvantageTrace& t);
Json to_json(const EvalReport& r);

SubtaskSpan span_from_json(const Json& j);
std::vector<SubtaskSpan> spans_from_json(const Json& j);
Episode episode_from_json(const Json& j);
RewardTrace reward_trace_from_json(const Json& j);
ProgressTrace progress_trace_from_json(const Json& j);
AdvantageTrace advantage_trace_from_json(const Json& j);
EvalReport report_from_json(const Json& j);

void write_trace(const RewardTrace& t, const std::filesystem::path& path);
void write_trace(const ProgressTrace& t, const std::filesystem::path& path);
void write_trace(const AdvantageTrace& t, const std::filesystem::path& path);
RewardTrace read_reward_trace(const std::filesystem::path& path);
ProgressTrace read_progress_trace(const std::filesystem::path& path);
AdvantageTrace read_advantage_trace(const std::filesystem::path& path);

/// Throws ValidationError("non-finite value") if any number is NaN/inf.
void write_report(const EvalReport& r, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);
/// One row per episode: episode,task,dataset,voc,success_score,label,parse_failure.
std::string report_csv(const EvalReport& r);

/// Annotation sidecar: {"episode_id", "revision", "annotations": [...]}.
struct AnnotationSidecar {
  std::string episode_id;
  std::uint64_t revision = 0;
  std::vector<SubtaskSpan> annotations;
  bool operator==(const AnnotationSidecar&) const = default;
};

std::filesystem::path sidecar_path(const std::filesystem::path& dir, const std::string& episode_id);
void write_annotation_sidecar(const AnnotationSidecar& s, const std::filesystem::path& path);
AnnotationSidecar read_annotation_sidecar(const std::filesystem::path& path);

/// `{dir}/{episode_id}.{kind}.json`
std::filesystem::path trace_path(const std::filesystem::path& dir, const std::string& episode_id,
                                 const std::string& kind);

}  // namespace vlmprog
