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
#include <memory>
#include <optional>
#include <string>

#include "vlmprog/datamodel.hpp"

namespace vlmprog {

struct ServiceConfig {
  std::filesystem::path manifest_path;
  /// Directory with `{id}.progress.json` traces for the overlay endpoint.
  std::filesystem::path traces_dir;
  /// Where annotation sidecars live; defaults to `<manifest dir>/annotations`.
  std::optional<std::filesystem::path> annotations_dir;
  ValidationOptions validation;
};

/// REST server for the annotation workflow.
///
///   GET  /healthz
///   GET  /episodes
///   GET  /episodes/{id}
///   GET  /episodes/{id}/frames/{index}      image bytes, content-digest ETag
///   GET  /episodes/{id}/annotations
///   PUT  /episodes/{id}/annotations         {"annotations": [...], "revision": n}
///   GET  /episodes/{id}/trace               progress trace + stage ground truth
///
/// Errors are {"error": ..., "violations": [...]}. The manifest is never
/// written; annotations go to per-episode sidecar files (write-temp-rename).
/// PUTs to one episode are serialized, last writer wins, and every accepted PUT
/// bumps the revision.
class AnnotationService {
 public:
  /// Loads the manifest (non-strict) and existing sidecars.
  explicit AnnotationService(ServiceConfig cfg);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds host:port; port 0 picks a free port. Returns the bound port.
  /// Throws IoError on bind failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vlmprog
