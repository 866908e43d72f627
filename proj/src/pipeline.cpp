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

#include "vlmprog/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "vlmprog/digest.hpp"
#include "vlmprog/metrics.hpp"

namespace vlmprog {
namespace fs = std::filesystem;
namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. If any call throws, the
// exception of the lowest failing index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Json read_run_fingerprint(const fs::path& dir, const char* name) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) return nullptr;
  const Json j = read_json_file(p);
  return j.value("fingerprint", Json(nullptr));
}

void write_run_file(const fs::path& path, Json config, const std::string& fingerprint, Json extra) {
  Json doc{{"config", std::move(config)}, {"fingerprint", fingerprint}};
  for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  write_text_file_atomic(path, canonical_dump(doc));
}

}  // namespace

std::unique_ptr<Provider> make_provider(const std::string& backend, const HttpProviderOptions& http_opts) {
  if (backend == "mock") return MockProvider::progress_ramp();
  if (backend.rfind("mock:", 0) == 0) {
    auto p = MockProvider::progress_ramp();
    p->load_table(backend.substr(5));
    return p;
  }
  if (backend.rfind("replay:", 0) == 0) return std::make_unique<ReplayProvider>(backend.substr(7));
  HttpProviderOptions opts = http_opts;
  if (opts.api_key.empty()) {
    if (const char* key = std::getenv("VLMPROG_API_KEY")) opts.api_key = key;
  }
  if (backend.rfind("http://", 0) == 0 || backend.rfind("https://", 0) == 0) {
    return std::make_unique<HttpProvider>(backend, opts);
  }
  if (backend.rfind("http:", 0) == 0) return std::make_unique<HttpProvider>(backend.substr(5), opts);
  throw ValidationError("unknown backend '" + backend + "' (expected mock|replay:FILE|http:URL)");
}

std::string config_fingerprint(const Json& config) { return sha256_hex(canonical_dump(config)); }

std::size_t default_jobs(const Provider& provider) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(hw, provider.max_in_flight()));
}

ScoreSummary run_score(const Manifest& manifest, Provider& provider, const ScoreOptions& opts) {
  opts.reward.validate();
  fs::create_directories(opts.out_dir);

  std::optional<RecordingProvider> recorder;
  if (opts.record_fixture) recorder.emplace(provider);
  Provider& backend = recorder ? static_cast<Provider&>(*recorder) : provider;

  parallel_for(manifest.episodes.size(), opts.jobs, [&](std::size_t i) {
    const Episode e = resolve_frame_uris(manifest.episodes[i], manifest.base_dir);
    const RewardTrace rt = score_episode(e, opts.reward, backend);
    write_trace(rt, trace_path(opts.out_dir, e.id, "reward"));
    write_trace(normalize(rt, opts.reward.epsilon), trace_path(opts.out_dir, e.id, "progress"));
  });

  if (recorder) recorder->save(*opts.record_fixture);

  Json config = opts.reward.to_json();
  config["dataset_name"] = manifest.dataset_name;
  config["backend"] = opts.backend_label;
  ScoreSummary s{manifest.episodes.size(), config_fingerprint(config)};
  Json ids = Json::array();
  for (const auto& e : manifest.episodes) ids.push_back(e.id);
  write_run_file(opts.out_dir / "run.score.json", config, s.fingerprint, Json{{"episodes", ids}});
  return s;
}

EvalReport run_evaluate(const Manifest& manifest, const fs::path& traces_dir,
                        const EvaluateOptions& opts) {
  if (opts.kind != "progress" && opts.kind != "gvl") {
    throw ValidationError("evaluate: trace kind must be progress or gvl");
  }
  if (opts.success_tail < 1) throw ValidationError("success tail must be >= 1");

  std::map<std::string, std::string> gvl_failures;
  if (opts.kind == "gvl" && fs::exists(traces_dir / "gvl_failures.json")) {
    for (const auto& rec : read_json_file(traces_dir / "gvl_failures.json")) {
      gvl_failures[rec.at("episode_id").get<std::string>()] = rec.at("error").get<std::string>();
    }
  }

  std::map<std::string, EpisodeEval> per_episode;
  Grouping grouping;
  for (const auto& e : manifest.episodes) {
    EpisodeEval ev;
    ev.success_label = e.success_label;
    const fs::path tp = trace_path(traces_dir, e.id, opts.kind);
    if (fs::exists(tp)) {
      const ProgressTrace pt = read_progress_trace(tp);
      ev.voc = pt.entries.size() >= 2 ? voc(pt) : 0.0;
    } else if (gvl_failures.contains(e.id)) {
      ev.voc = 0.0;
      ev.parse_failure = true;
    } else {
      throw ValidationError("missing " + opts.kind + " trace for episode " + e.id);
    }
    const fs::path rp = trace_path(traces_dir, e.id, "reward");
    if (opts.kind == "progress" && fs::exists(rp)) {
      const RewardTrace rt = read_reward_trace(rp);
      const int tail = std::min<int>(opts.success_tail, static_cast<int>(rt.entries.size()));
      for (auto it = rt.entries.end() - tail; it != rt.entries.end(); ++it) {
        ev.final_raw_rewards.push_back(it->r);
      }
      if (static_cast<int>(rt.entries.size()) >= opts.success_tail) {
        ev.success_score = success_score(rt, opts.success_tail);
      }
    }
    per_episode[e.id] = std::move(ev);
    grouping.episode_task[e.id] = e.instruction;
    grouping.task_dataset[e.instruction] = manifest.dataset_name;
  }

  EvalReport report = aggregate(per_episode, grouping);

  std::vector<double> pos, neg;
  std::size_t failures = 0;
  for (const auto& [id, ev] : report.per_episode) {
    failures += ev.parse_failure ? 1 : 0;
    if (!ev.success_score || !ev.success_label) continue;
    (*ev.success_label ? pos : neg).push_back(*ev.success_score);
  }
  if (!pos.empty() && !neg.empty()) report.roc_auc = roc_auc(pos, neg);

  Json config{{"trace_kind", opts.kind},
              {"success_tail", opts.success_tail},
              {"dataset_name", manifest.dataset_name},
              {"source_fingerprint",
               read_run_fingerprint(traces_dir, opts.kind == "gvl" ? "run.gvl.json" : "run.score.json")},
              {"aggregation", report.metadata["aggregation"]},
              {"voc_ties", report.metadata["voc_ties"]}};
  report.config_fingerprint = config_fingerprint(config);
  report.metadata["trace_kind"] = opts.kind;
  report.metadata["parse_failures"] = std::to_string(failures);
  return report;
}

Json SuccessReport::to_json() const {
  Json eps = Json::object();
  for (const auto& [id, s] : scores) {
    const auto& label = labels.at(id);
    eps[id] = Json{{"success_score", s}, {"success_label", label ? Json(*label) : Json(nullptr)}};
  }
  return Json{{"episodes", std::move(eps)},
              {"roc_auc", roc_auc ? Json(*roc_auc) : Json(nullptr)},
              {"tail", tail},
              {"fingerprint", fingerprint}};
}

SuccessReport run_success(const Manifest& manifest, const fs::path& traces_dir, int tail) {
  SuccessReport rep;
  rep.tail = tail;
  std::vector<double> pos, neg;
  for (const auto& e : manifest.episodes) {
    const RewardTrace rt = read_reward_trace(trace_path(traces_dir, e.id, "reward"));
    const double s = success_score(rt, tail);
    rep.scores[e.id] = s;
    rep.labels[e.id] = e.success_label;
    if (e.success_label) (*e.success_label ? pos : neg).push_back(s);
  }
  if (!pos.empty() && !neg.empty()) rep.roc_auc = roc_auc(pos, neg);
  rep.fingerprint = config_fingerprint(Json{{"tail", tail},
                                            {"dataset_name", manifest.dataset_name},
                                            {"source_fingerprint",
                                             read_run_fingerprint(traces_dir, "run.score.json")}});
  return rep;
}

GvlSummary run_gvl(const Manifest& manifest, Provider& provider, const GvlRunOptions& opts) {
  fs::create_directories(opts.out_dir);
  std::optional<RecordingProvider> recorder;
  if (opts.record_fixture) recorder.emplace(provider);
  Provider& backend = recorder ? static_cast<Provider&>(*recorder) : provider;

  std::vector<GvlResult> results(manifest.episodes.size());
  parallel_for(manifest.episodes.size(), opts.jobs, [&](std::size_t i) {
    const Episode e = resolve_frame_uris(manifest.episodes[i], manifest.base_dir);
    GvlConfig cfg = opts.gvl;
    cfg.seed = opts.gvl.seed + i;
    results[i] = gvl_episode(e, cfg, backend);
    if (!results[i].parse_failure) {
      write_trace(results[i].trace, trace_path(opts.out_dir, e.id, "gvl"));
    }
  });
  if (recorder) recorder->save(*opts.record_fixture);

  GvlSummary s;
  s.episodes = results.size();
  Json failures = Json::array();
  Json warnings = Json::array();
  for (const auto& r : results) {
    if (r.parse_failure) {
      ++s.parse_failures;
      failures.push_back(
          Json{{"episode_id", r.episode_id}, {"error", *r.parse_failure}, {"raw_text", r.raw_text}});
    }
    for (const auto& w : r.warnings) warnings.push_back(Json{{"episode_id", r.episode_id}, {"warning", w}});
  }
  write_text_file_atomic(opts.out_dir / "gvl_failures.json", canonical_dump(failures));

  Json config = opts.gvl.to_json();
  config["dataset_name"] = manifest.dataset_name;
  config["backend"] = opts.backend_label;
  config["seed_rule"] = "seed_plus_episode_ordinal";
  s.fingerprint = config_fingerprint(config);
  write_run_file(opts.out_dir / "run.gvl.json", config, s.fingerprint,
                 Json{{"parse_failures", s.parse_failures}, {"warnings", warnings}});
  return s;
}

AdvantageSummary run_advantages(const fs::path& traces_dir, double scale_tau, double delta_max,
                                const fs::path& out_dir) {
  if (!fs::is_directory(traces_dir)) throw IoError("not a directory: " + traces_dir.string());
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(traces_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 14 && name.ends_with(".progress.json")) inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  fs::create_directories(out_dir);

  AdvantageSummary s;
  for (const auto& p : inputs) {
    const ProgressTrace pt = read_progress_trace(p);
    if (pt.entries.size() < 2) {
      s.skipped.push_back(pt.episode_id);
      continue;
    }
    write_trace(advantages(pt, scale_tau, delta_max), trace_path(out_dir, pt.episode_id, "advantage"));
    ++s.written;
  }
  Json config{{"scale_tau", scale_tau},
              {"delta_max", delta_max},
              {"source_fingerprint", read_run_fingerprint(traces_dir, "run.score.json")}};
  s.fingerprint = config_fingerprint(config);
  write_run_file(out_dir / "run.advantages.json", config, s.fingerprint,
                 Json{{"written", s.written}, {"skipped", s.skipped}});
  return s;
}

}  // namespace vlmprog
