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

#include "vlmprog/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "vlmprog/errors.hpp"

namespace vlmprog {
namespace fs = std::filesystem;
namespace {

const Json& require(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(std::string(where) + ": missing key '" + key + "'");
  }
  return j.at(key);
}

std::string get_string(const Json& j, const char* key, const char* where) {
  const Json& v = require(j, key, where);
  if (!v.is_string()) throw ParseError(std::string(where) + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double get_number(const Json& j, const char* key, const char* where) {
  const Json& v = require(j, key, where);
  if (!v.is_number()) throw ParseError(std::string(where) + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_integer(const Json& j, const char* key, const char* where) {
  const Json& v = require(j, key, where);
  if (!v.is_number_integer()) {
    throw ParseError(std::string(where) + ": '" + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

Fps fps_from_json(const Json& j) {
  if (j.is_number_integer()) {
    return {j.get<std::int64_t>(), 1};
  }
  if (j.is_number_float()) {
    // Decimal rates such as 29.97 become 2997/100.
    const double v = j.get<double>();
    const auto scaled = static_cast<std::int64_t>(std::llround(v * 1000.0));
    const std::int64_t g = std::gcd(scaled, std::int64_t{1000});
    if (g == 0) return {0, 1};
    return {scaled / g, 1000 / g};
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    const auto slash = s.find('/');
    Fps f{0, 1};
    auto parse = [&s](std::size_t b, std::size_t e, std::int64_t& out) {
      auto [p, ec] = std::from_chars(s.data() + b, s.data() + e, out);
      return ec == std::errc() && p == s.data() + e;
    };
    const bool ok = slash == std::string::npos
                        ? parse(0, s.size(), f.num)
                        : parse(0, slash, f.num) && parse(slash + 1, s.size(), f.den);
    if (!ok) throw ParseError("fps: cannot parse '" + s + "'");
    return f;
  }
  throw ParseError("fps: expected a number or \"num/den\" string");
}

Json fps_to_json(const Fps& f) {
  if (f.den == 1) return f.num;
  return std::to_string(f.num) + "/" + std::to_string(f.den);
}

FrameRef frame_from_json(const Json& j) {
  FrameRef f;
  f.index = static_cast<FrameIndex>(get_integer(j, "index", "frame"));
  f.timestamp_s = get_number(j, "timestamp_s", "frame");
  f.uri = get_string(j, "uri", "frame");
  return f;
}

bool filename_safe(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return id.find_first_of("/\\") == std::string::npos;
}

void check_schema_version(const std::string& v) {
  if (v != "1" && v.rfind("1.", 0) != 0) {
    throw ParseError("schema-version mismatch: got '" + v + "', supported 1.x");
  }
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json stats_to_json(const GroupStats& g) {
  return Json{{"count", g.count}, {"mean", g.mean}, {"std", g.std}};
}

GroupStats stats_from_json(const Json& j) {
  GroupStats g;
  g.count = static_cast<std::size_t>(get_integer(j, "count", "stats"));
  g.mean = get_number(j, "mean", "stats");
  g.std = get_number(j, "std", "stats");
  return g;
}

void check_kind(const Json& j, const char* kind) {
  const std::string got = get_string(j, "kind", "trace");
  if (got != kind) {
    throw ParseError(std::string("trace kind mismatch: expected ") + kind + ", got " + got);
  }
}

}  // namespace

const Episode& Manifest::episode(const std::string& id) const {
  for (const auto& e : episodes) {
    if (e.id == id) return e;
  }
  throw ValidationError("unknown episode id: " + id);
}

Json to_json(const FrameRef& f) {
  return Json{{"index", f.index}, {"timestamp_s", f.timestamp_s}, {"uri", f.uri}};
}

Json to_json(const SubtaskSpan& s) {
  return Json{{"name", s.name}, {"start_second", s.start_second}, {"end_second", s.end_second}};
}

Json to_json(const std::vector<SubtaskSpan>& spans) {
  Json arr = Json::array();
  for (const auto& s : spans) arr.push_back(to_json(s));
  return arr;
}

Json to_json(const Episode& e) {
  Json frames = Json::array();
  for (const auto& f : e.frames) frames.push_back(to_json(f));
  Json j{{"id", e.id}, {"instruction", e.instruction}, {"fps", fps_to_json(e.fps)},
         {"frames", std::move(frames)}};
  if (e.annotations) j["annotations"] = to_json(*e.annotations);
  if (e.success_label) j["success_label"] = *e.success_label;
  if (e.platform_tag) j["platform_tag"] = *e.platform_tag;
  return j;
}

SubtaskSpan span_from_json(const Json& j) {
  SubtaskSpan s;
  s.name = get_string(j, "name", "annotation");
  s.start_second = get_number(j, "start_second", "annotation");
  s.end_second = get_number(j, "end_second", "annotation");
  return s;
}

std::vector<SubtaskSpan> spans_from_json(const Json& j) {
  if (!j.is_array()) throw ParseError("annotations must be an array");
  std::vector<SubtaskSpan> out;
  for (const auto& s : j) out.push_back(span_from_json(s));
  return out;
}

Episode episode_from_json(const Json& j) {
  Episode e;
  e.id = get_string(j, "id", "episode");
  e.instruction = get_string(j, "instruction", "episode");
  e.fps = fps_from_json(require(j, "fps", "episode"));
  const Json& frames = require(j, "frames", "episode");
  if (!frames.is_array()) throw ParseError("episode " + e.id + ": frames must be an array");
  for (const auto& f : frames) e.frames.push_back(frame_from_json(f));
  if (j.contains("annotations") && !j["annotations"].is_null()) {
    e.annotations = spans_from_json(j["annotations"]);
  }
  if (j.contains("success_label") && !j["success_label"].is_null()) {
    if (!j["success_label"].is_boolean()) throw ParseError("success_label must be a boolean");
    e.success_label = j["success_label"].get<bool>();
  }
  if (j.contains("platform_tag") && !j["platform_tag"].is_null()) {
    e.platform_tag = get_string(j, "platform_tag", "episode");
  }
  return e;
}

Manifest load_manifest(const fs::path& path, const LoadOptions& opts) {
  const Json doc = read_json_file(path);
  if (!doc.is_object()) throw ParseError("manifest must be an object");
  Manifest m;
  m.base_dir = path.parent_path();
  m.dataset_name = get_string(doc, "dataset_name", "manifest");
  m.schema_version = get_string(doc, "schema_version", "manifest");
  check_schema_version(m.schema_version);
  const Json& eps = require(doc, "episodes", "manifest");
  if (!eps.is_array()) throw ParseError("manifest: episodes must be an array");

  std::set<std::string> ids;
  for (const auto& ej : eps) {
    Episode e = episode_from_json(ej);
    if (!ids.insert(e.id).second) throw ValidationError("duplicate id: " + e.id);
    if (!filename_safe(e.id)) throw ValidationError("episode id not filename-safe: " + e.id);

    std::vector<std::string> problems;
    for (const auto& v : validate_episode(e, opts.validation)) {
      problems.push_back("episode " + e.id + ": " + v.to_string());
    }
    if (opts.check_frames) {
      for (const auto& f : e.frames) {
        fs::path p = f.uri;
        if (p.is_relative()) p = m.base_dir / p;
        if (!fs::exists(p)) problems.push_back("episode " + e.id + ": frame not found: " + f.uri);
      }
    }
    if (!problems.empty()) {
      if (opts.strict) throw ValidationError(problems.front());
      m.warnings.insert(m.warnings.end(), problems.begin(), problems.end());
    }
    m.episodes.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  Json eps = Json::array();
  for (const auto& e : m.episodes) eps.push_back(to_json(e));
  Json doc{{"dataset_name", m.dataset_name},
           {"schema_version", m.schema_version},
           {"episodes", std::move(eps)}};
  // User-supplied times must survive a write/load cycle unchanged.
  write_text_file_atomic(path, canonical_dump(doc, kExactDigits));
}

FrameIndex seconds_to_frame(const Episode& e, double t_s) {
  if (e.frames.empty()) throw ValidationError("episode " + e.id + " has no frames");
  if (!std::isfinite(t_s) || t_s < 0.0 || t_s > e.duration_s()) {
    throw ValidationError("time " + format_number(t_s) + " s outside episode " + e.id);
  }
  // Last frame with timestamp <= t_s; frames are sorted by timestamp.
  auto it = std::upper_bound(e.frames.begin(), e.frames.end(), t_s,
                             [](double t, const FrameRef& f) { return t < f.timestamp_s; });
  if (it == e.frames.begin()) return e.frames.front().index;
  return std::prev(it)->index;
}

Episode resolve_frame_uris(Episode e, const fs::path& base_dir) {
  for (auto& f : e.frames) {
    fs::path p = f.uri;
    if (p.is_relative()) f.uri = (base_dir / p).lexically_normal().string();
  }
  return e;
}

Json to_json(const RewardTrace& t) {
  Json entries = Json::array();
  for (const auto& e : t.entries) entries.push_back(Json{{"t_k", e.t_k}, {"r", e.r}});
  return Json{{"kind", "reward"},
              {"episode_id", t.episode_id},
              {"variant", std::string(to_string(t.variant))},
              {"entries", std::move(entries)}};
}

Json to_json(const ProgressTrace& t) {
  Json entries = Json::array();
  for (const auto& e : t.entries) entries.push_back(Json{{"t_k", e.t_k}, {"s", e.s}});
  return Json{{"kind", "progress"},
              {"episode_id", t.episode_id},
              {"epsilon", t.epsilon},
              {"entries", std::move(entries)}};
}

Json to_json(const AdvantageTrace& t) {
  Json entries = Json::array();
  for (const auto& e : t.entries) entries.push_back(Json{{"t_k", e.t_k}, {"delta", e.delta}});
  return Json{{"kind", "advantage"},
              {"episode_id", t.episode_id},
              {"scale_tau", t.scale_tau},
              {"delta_max", t.delta_max},
              {"entries", std::move(entries)}};
}

RewardTrace reward_trace_from_json(const Json& j) {
  check_kind(j, "reward");
  RewardTrace t;
  t.episode_id = get_string(j, "episode_id", "trace");
  t.variant = parse_reward_variant(get_string(j, "variant", "trace"));
  for (const auto& e : require(j, "entries", "trace")) {
    t.entries.push_back({static_cast<FrameIndex>(get_integer(e, "t_k", "entry")),
                         get_number(e, "r", "entry")});
  }
  return t;
}

ProgressTrace progress_trace_from_json(const Json& j) {
  check_kind(j, "progress");
  ProgressTrace t;
  t.episode_id = get_string(j, "episode_id", "trace");
  t.epsilon = get_number(j, "epsilon", "trace");
  for (const auto& e : require(j, "entries", "trace")) {
    t.entries.push_back({static_cast<FrameIndex>(get_integer(e, "t_k", "entry")),
                         get_number(e, "s", "entry")});
  }
  return t;
}

AdvantageTrace advantage_trace_from_json(const Json& j) {
  check_kind(j, "advantage");
  AdvantageTrace t;
  t.episode_id = get_string(j, "episode_id", "trace");
  t.scale_tau = get_number(j, "scale_tau", "trace");
  t.delta_max = get_number(j, "delta_max", "trace");
  for (const auto& e : require(j, "entries", "trace")) {
    t.entries.push_back({static_cast<FrameIndex>(get_integer(e, "t_k", "entry")),
                         get_number(e, "delta", "entry")});
  }
  return t;
}

Json to_json(const EvalReport& r) {
  Json eps = Json::object();
  for (const auto& [id, e] : r.per_episode) {
    eps[id] = Json{{"voc", e.voc},
                   {"success_score", optional_number(e.success_score)},
                   {"final_raw_rewards", e.final_raw_rewards},
                   {"success_label", e.success_label ? Json(*e.success_label) : Json(nullptr)},
                   {"parse_failure", e.parse_failure}};
  }
  Json tasks = Json::object();
  for (const auto& [k, g] : r.per_task) tasks[k] = stats_to_json(g);
  Json datasets = Json::object();
  for (const auto& [k, g] : r.per_dataset) datasets[k] = stats_to_json(g);
  return Json{{"per_episode", std::move(eps)},
              {"per_task", std::move(tasks)},
              {"per_dataset", std::move(datasets)},
              {"episode_task", r.episode_task},
              {"task_dataset", r.task_dataset},
              {"roc_auc", optional_number(r.roc_auc)},
              {"config_fingerprint", r.config_fingerprint},
              {"metadata", r.metadata}};
}

EvalReport report_from_json(const Json& j) {
  EvalReport r;
  for (const auto& [id, e] : require(j, "per_episode", "report").items()) {
    EpisodeEval ev;
    ev.voc = get_number(e, "voc", "episode report");
    if (!e.at("success_score").is_null()) ev.success_score = e.at("success_score").get<double>();
    ev.final_raw_rewards = e.at("final_raw_rewards").get<std::vector<double>>();
    if (!e.at("success_label").is_null()) ev.success_label = e.at("success_label").get<bool>();
    ev.parse_failure = e.at("parse_failure").get<bool>();
    r.per_episode[id] = std::move(ev);
  }
  for (const auto& [k, g] : require(j, "per_task", "report").items()) {
    r.per_task[k] = stats_from_json(g);
  }
  for (const auto& [k, g] : require(j, "per_dataset", "report").items()) {
    r.per_dataset[k] = stats_from_json(g);
  }
  r.episode_task = require(j, "episode_task", "report").get<std::map<std::string, std::string>>();
  r.task_dataset = require(j, "task_dataset", "report").get<std::map<std::string, std::string>>();
  if (!require(j, "roc_auc", "report").is_null()) r.roc_auc = j.at("roc_auc").get<double>();
  r.config_fingerprint = get_string(j, "config_fingerprint", "report");
  r.metadata = require(j, "metadata", "report").get<std::map<std::string, std::string>>();
  return r;
}

void write_trace(const RewardTrace& t, const fs::path& path) {
  write_text_file_atomic(path, canonical_dump(to_json(t)));
}
void write_trace(const ProgressTrace& t, const fs::path& path) {
  write_text_file_atomic(path, canonical_dump(to_json(t)));
}
void write_trace(const AdvantageTrace& t, const fs::path& path) {
  write_text_file_atomic(path, canonical_dump(to_json(t)));
}

RewardTrace read_reward_trace(const fs::path& path) {
  return reward_trace_from_json(read_json_file(path));
}
ProgressTrace read_progress_trace(const fs::path& path) {
  return progress_trace_from_json(read_json_file(path));
}
AdvantageTrace read_advantage_trace(const fs::path& path) {
  return advantage_trace_from_json(read_json_file(path));
}

void write_report(const EvalReport& r, const fs::path& path) {
  // canonical_dump rejects NaN/inf before anything touches the disk.
  write_text_file_atomic(path, canonical_dump(to_json(r)));
}

EvalReport read_report(const fs::path& path) { return report_from_json(read_json_file(path)); }

std::string report_csv(const EvalReport& r) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::ostringstream out;
  out << "episode,task,dataset,voc,success_score,label,parse_failure\n";
  for (const auto& [id, e] : r.per_episode) {
    std::string task, dataset;
    if (auto it = r.episode_task.find(id); it != r.episode_task.end()) {
      task = it->second;
      if (auto dt = r.task_dataset.find(task); dt != r.task_dataset.end()) dataset = dt->second;
    }
    out << quote(id) << ',' << quote(task) << ',' << quote(dataset) << ',' << format_number(e.voc)
        << ',' << (e.success_score ? format_number(*e.success_score) : "") << ','
        << (e.success_label ? (*e.success_label ? "1" : "0") : "") << ','
        << (e.parse_failure ? "1" : "0") << '\n';
  }
  return out.str();
}

fs::path sidecar_path(const fs::path& dir, const std::string& episode_id) {
  return dir / (episode_id + ".annotations.json");
}

void write_annotation_sidecar(const AnnotationSidecar& s, const fs::path& path) {
  Json doc{{"episode_id", s.episode_id},
           {"revision", s.revision},
           {"annotations", to_json(s.annotations)}};
  write_text_file_atomic(path, canonical_dump(doc, kExactDigits));
}

AnnotationSidecar read_annotation_sidecar(const fs::path& path) {
  const Json j = read_json_file(path);
  AnnotationSidecar s;
  s.episode_id = get_string(j, "episode_id", "sidecar");
  s.revision = static_cast<std::uint64_t>(get_integer(j, "revision", "sidecar"));
  s.annotations = spans_from_json(require(j, "annotations", "sidecar"));
  return s;
}

fs::path trace_path(const fs::path& dir, const std::string& episode_id, const std::string& kind) {
  return dir / (episode_id + "." + kind + ".json");
}

}  // namespace vlmprog
