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

#include "vlmprog/service.hpp"

#include <httplib.h>

#include <map>
#include <mutex>
#include <shared_mutex>

#include "vlmprog/digest.hpp"
#include "vlmprog/errors.hpp"
#include "vlmprog/ingest.hpp"
#include "vlmprog/metrics.hpp"

namespace vlmprog {
namespace fs = std::filesystem;
namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg,
                const Json& violations = Json::array()) {
  send_json(res, status, Json{{"error", msg}, {"violations", violations}});
}

std::string content_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  return "application/octet-stream";
}

}  // namespace

struct AnnotationService::Impl {
  ServiceConfig cfg;
  Manifest manifest;
  fs::path annotations_dir;
  httplib::Server server;

  struct EpisodeState {
    std::mutex write_mu;
    std::uint64_t revision = 0;
    std::optional<std::vector<SubtaskSpan>> annotations;
  };
  std::map<std::string, std::unique_ptr<EpisodeState>> states;
  mutable std::shared_mutex read_mu;  // guards revision/annotations snapshots

  explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
    manifest = load_manifest(cfg.manifest_path, LoadOptions{.strict = false, .check_frames = false, .validation = cfg.validation});
    annotations_dir = cfg.annotations_dir.value_or(manifest.base_dir / "annotations");
    for (const auto& e : manifest.episodes) {
      auto st = std::make_unique<EpisodeState>();
      st->annotations = e.annotations;
      const fs::path side = sidecar_path(annotations_dir, e.id);
      if (fs::exists(side)) {
        AnnotationSidecar s = read_annotation_sidecar(side);
        st->revision = s.revision;
        st->annotations = std::move(s.annotations);
      }
      states[e.id] = std::move(st);
    }
    routes();
  }

  const Episode* find(const std::string& id) const {
    for (const auto& e : manifest.episodes) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  // Episode with the current (possibly sidecar) annotations applied.
  Episode current(const Episode& e, std::uint64_t* revision = nullptr) const {
    std::shared_lock lock(read_mu);
    const auto& st = *states.at(e.id);
    Episode copy = e;
    copy.annotations = st.annotations;
    if (revision) *revision = st.revision;
    return copy;
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, PUT, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type, If-None-Match");
      res.status = 204;
    });

    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, Json{{"ok", true}, {"dataset_name", manifest.dataset_name}});
    });

    server.Get("/episodes", [this](const httplib::Request&, httplib::Response& res) {
      Json list = Json::array();
      for (const auto& e : manifest.episodes) {
        const Episode cur = current(e);
        list.push_back(Json{{"id", e.id},
                            {"instruction", e.instruction},
                            {"n_frames", e.frame_count()},
                            {"has_annotations", cur.annotations && !cur.annotations->empty()}});
      }
      send_json(res, 200, Json{{"episodes", std::move(list)}});
    });

    server.Get(R"(/episodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const Episode* e = find(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown episode");
      std::uint64_t rev = 0;
      Json j = to_json(current(*e, &rev));
      j["duration_s"] = e->duration_s();
      j["revision"] = rev;
      send_json(res, 200, j);
    });

    server.Get(R"(/episodes/([^/]+)/frames/(\d+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const Episode* e = find(req.matches[1]);
                 if (!e) return send_error(res, 404, "unknown episode");
                 const int index = std::stoi(req.matches[2]);
                 const FrameRef* f = nullptr;
                 for (const auto& fr : e->frames) {
                   if (fr.index == index) f = &fr;
                 }
                 if (!f) return send_error(res, 404, "unknown frame");
                 fs::path p = f->uri;
                 if (p.is_relative()) p = manifest.base_dir / p;
                 std::string bytes;
                 try {
                   bytes = read_text_file(p);
                 } catch (const IoError&) {
                   return send_error(res, 404, "frame file not found");
                 }
                 const std::string etag = "\"" + sha256_hex(bytes) + "\"";
                 res.set_header("ETag", etag);
                 res.set_header("Cache-Control", "no-cache");
                 if (req.get_header_value("If-None-Match") == etag) {
                   res.status = 304;
                   return;
                 }
                 res.status = 200;
                 res.set_content(std::move(bytes), content_type_for(p));
               });

    server.Get(R"(/episodes/([^/]+)/annotations)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 const Episode* e = find(req.matches[1]);
                 if (!e) return send_error(res, 404, "unknown episode");
                 std::uint64_t rev = 0;
                 const Episode cur = current(*e, &rev);
                 send_json(res, 200,
                           Json{{"episode_id", e->id},
                                {"revision", rev},
                                {"annotations", to_json(cur.annotations.value_or(
                                                    std::vector<SubtaskSpan>{}))}});
               });

    server.Put(R"(/episodes/([^/]+)/annotations)",
               [this](const httplib::Request& req, httplib::Response& res) { put_annotations(req, res); });

    server.Get(R"(/episodes/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      const Episode* e = find(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown episode");
      const fs::path p = trace_path(cfg.traces_dir, e->id, "progress");
      if (cfg.traces_dir.empty() || !fs::exists(p)) return send_error(res, 404, "no trace");
      ProgressTrace trace;
      try {
        trace = read_progress_trace(p);
      } catch (const Error& err) {
        return send_error(res, 500, err.what());
      }
      const Episode cur = current(*e);
      Json gt = nullptr;
      if (cur.annotations && !cur.annotations->empty()) {
        std::vector<double> times;
        for (const auto& en : trace.entries) times.push_back(cur.frame(en.t_k).timestamp_s);
        const auto values = stage_gt(cur, times);
        gt = Json::array();
        for (std::size_t i = 0; i < values.size(); ++i) {
          gt.push_back(Json{{"t_k", trace.entries[i].t_k},
                            {"timestamp_s", times[i]},
                            {"gt", values[i]}});
        }
      }
      send_json(res, 200, Json{{"trace", to_json(trace)}, {"stage_gt", gt}});
    });
  }

  void put_annotations(const httplib::Request& req, httplib::Response& res) {
    const Episode* e = find(req.matches[1]);
    if (!e) return send_error(res, 404, "unknown episode");
    Json body;
    std::vector<SubtaskSpan> spans;
    std::optional<std::uint64_t> client_revision;
    try {
      body = Json::parse(req.body);
      if (!body.is_object() || !body.contains("annotations")) {
        throw ParseError("body must be {\"annotations\": [...], \"revision\": n}");
      }
      spans = spans_from_json(body["annotations"]);
      if (body.contains("revision") && !body["revision"].is_null()) {
        client_revision = body["revision"].get<std::uint64_t>();
      }
    } catch (const std::exception& err) {
      return send_error(res, 400, std::string("malformed annotations: ") + err.what());
    }

    Episode candidate = *e;
    candidate.annotations = spans;
    const auto violations = validate_episode(candidate, cfg.validation);
    if (!violations.empty()) {
      Json v = Json::array();
      for (const auto& x : violations) v.push_back(Json{{"field", x.field}, {"rule", x.rule}});
      return send_error(res, 422, "annotation validation failed", v);
    }

    auto& st = *states.at(e->id);
    std::lock_guard write_lock(st.write_mu);
    std::uint64_t next_rev;
    {
      std::shared_lock lock(read_mu);
      next_rev = st.revision + 1;
    }
    try {
      fs::create_directories(annotations_dir);
      write_annotation_sidecar({e->id, next_rev, spans}, sidecar_path(annotations_dir, e->id));
    } catch (const std::exception& err) {
      return send_error(res, 500, err.what());
    }
    {
      std::unique_lock lock(read_mu);
      st.revision = next_rev;
      st.annotations = spans;
    }
    send_json(res, 200,
              Json{{"episode_id", e->id},
                   {"revision", next_rev},
                   {"client_revision", client_revision ? Json(*client_revision) : Json(nullptr)},
                   {"annotations", to_json(spans)}});
  }
};

AnnotationService::AnnotationService(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AnnotationService::listen() { impl_->server.listen_after_bind(); }

void AnnotationService::stop() {
  if (impl_) impl_->server.stop();
}

void AnnotationService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace vlmprog
