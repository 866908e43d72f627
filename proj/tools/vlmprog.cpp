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

// vlmprog: score episodes with a VLM backend, evaluate progress traces,
// export advantages, run the GVL baseline and synthetic studies, and serve
// the annotation REST API.

#include <CLI11.hpp>

#include <cmath>
#include <csignal>
#include <iostream>
#include <sstream>

#include "vlmprog/gvl.hpp"
#include "vlmprog/ingest.hpp"
#include "vlmprog/metrics.hpp"
#include "vlmprog/pipeline.hpp"
#include "vlmprog/service.hpp"
#include "vlmprog/synthlab.hpp"

namespace fs = std::filesystem;
using namespace vlmprog;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitProvider = 2;

AnnotationService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.empty()) throw ValidationError("--levels needs at least one value");
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text_file_atomic(p, content);
}

std::vector<TokenRow> token_rows_from_json(const Json& doc) {
  std::vector<TokenRow> rows;
  for (const auto& r : doc) {
    rows.push_back({r.at("episode_id").get<std::string>(), r.at("success").get<bool>(),
                    r.at("token_probs").get<std::map<std::string, double>>()});
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot VLM progress rewards: scoring, evaluation and annotation tools"};
  app.require_subcommand(1);

  // score
  std::string manifest_path, backend = "mock", variant = "completion", chat_template_path,
                             record_path, out_dir, traces_dir, out_path, addr = "127.0.0.1:8080";
  int k = 16, prefix_cap = 16, tail = 3, seeds = 100, n_points = 30;
  double epsilon = 1e-8, tau = 2.0, delta_max = 2.0, ramp = 0.5, sigma = 0.01;
  std::size_t jobs = 0, max_in_flight = 4;
  std::uint64_t seed = 0;
  bool lenient = false;
  std::string kind = "progress", levels = "0.8,0.5,0.3", token_input, tokens;

  auto* score = app.add_subcommand("score", "Score every episode prefix and write reward/progress traces");
  score->add_option("--manifest", manifest_path, "Dataset manifest")->required();
  score->add_option("--backend", backend, "mock | mock:TABLE | replay:FIXTURE | http:URL");
  score->add_option("--variant", variant, "completion | instruction");
  score->add_option("--k", k, "Number of prefix lengths K");
  score->add_option("--prefix-cap", prefix_cap, "Max frames per prefix");
  score->add_option("--epsilon", epsilon, "Normalization epsilon");
  score->add_option("--chat-template", chat_template_path, "Chat template JSON (ablation)");
  score->add_option("--record", record_path, "Record backend responses to this fixture");
  score->add_option("--jobs", jobs, "Parallel episodes (default: cores, capped by backend)");
  score->add_option("--max-in-flight", max_in_flight, "Concurrent requests for http backends");
  score->add_flag("--lenient", lenient, "Keep episodes with validation warnings");
  score->add_option("--out", out_dir, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "VOC aggregation over traces");
  evaluate->add_option("--manifest", manifest_path)->required();
  evaluate->add_option("--traces", traces_dir)->required();
  evaluate->add_option("--kind", kind, "progress | gvl");
  evaluate->add_option("--tail,--success-tail", tail, "Success tail length for final rewards");
  evaluate->add_option("--out", out_path, "report.json; report.csv is written alongside")->required();

  auto* success = app.add_subcommand("success", "Success scores and ROC-AUC");
  success->add_option("--manifest", manifest_path)->required();
  success->add_option("--traces", traces_dir)->required();
  success->add_option("--tail,--success-tail", tail, "Number of final prefixes averaged");
  success->add_option("--out", out_path, "success.json; success.csv alongside")->required();

  auto* gvl = app.add_subcommand("gvl", "Zero-shot GVL baseline");
  gvl->add_option("--manifest", manifest_path)->required();
  gvl->add_option("--backend", backend);
  gvl->add_option("--k", k);
  gvl->add_option("--seed", seed);
  gvl->add_option("--record", record_path);
  gvl->add_option("--jobs", jobs);
  gvl->add_option("--max-in-flight", max_in_flight);
  gvl->add_flag("--lenient", lenient);
  gvl->add_option("--out", out_dir)->required();

  auto* adv = app.add_subcommand("advantages", "Clipped-exponential advantage weights");
  adv->add_option("--traces", traces_dir)->required();
  adv->add_option("--tau", tau, "Scaling factor");
  adv->add_option("--delta-max", delta_max, "Upper clip");
  adv->add_option("--out", out_dir)->required();

  auto* synth = app.add_subcommand("synth", "Synthetic studies");
  synth->require_subcommand(1);
  auto* voc_study = synth->add_subcommand("voc-study", "VOC of plateauing synthetic curves");
  voc_study->add_option("--levels", levels, "Comma-separated plateau levels");
  voc_study->add_option("--n", n_points);
  voc_study->add_option("--ramp", ramp);
  voc_study->add_option("--sigma", sigma);
  voc_study->add_option("--seeds", seeds);
  voc_study->add_option("--seed", seed, "Base seed");
  voc_study->add_option("--out", out_path, "CSV output (stdout summary always printed)");
  auto* token_study = synth->add_subcommand("token-study", "Affirmative-token separation");
  token_study->add_option("--input", token_input, "Rows JSON [{episode_id, success, token_probs}]");
  token_study->add_option("--manifest", manifest_path, "Score candidates with a backend instead");
  token_study->add_option("--backend", backend);
  token_study->add_option("--tokens", tokens, "Comma-separated candidate tokens");
  token_study->add_option("--prefix-cap", prefix_cap);
  token_study->add_option("--out", out_path, "CSV output");

  auto* serve = app.add_subcommand("serve", "Annotation REST service");
  serve->add_option("--manifest", manifest_path)->required();
  serve->add_option("--traces", traces_dir);
  serve->add_option("--addr", addr, "host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    HttpProviderOptions http_opts;
    http_opts.max_in_flight = max_in_flight;
    LoadOptions load_opts;
    load_opts.strict = !lenient;

    if (score->parsed()) {
      const Manifest m = load_manifest(manifest_path, load_opts);
      auto provider = make_provider(backend, http_opts);
      ScoreOptions opts;
      opts.reward.k_count = k;
      opts.reward.frames_per_prefix_cap = prefix_cap;
      opts.reward.epsilon = epsilon;
      opts.reward.variant = parse_reward_variant(variant);
      if (!chat_template_path.empty()) opts.reward.chat_template = ChatTemplate::load(chat_template_path);
      opts.jobs = jobs ? jobs : default_jobs(*provider);
      opts.out_dir = out_dir;
      if (!record_path.empty()) opts.record_fixture = record_path;
      opts.backend_label = backend.substr(0, backend.find(':'));
      const ScoreSummary s = run_score(m, *provider, opts);
      std::cout << "scored " << s.episodes << " episode(s), fingerprint " << s.fingerprint << "\n";
    } else if (evaluate->parsed()) {
      const Manifest m = load_manifest(manifest_path, load_opts);
      const EvalReport r = run_evaluate(m, traces_dir, {kind, tail});
      write_report(r, out_path);
      fs::path csv = out_path;
      csv.replace_extension(".csv");
      write_file(csv, report_csv(r));
      for (const auto& [ds, g] : r.per_dataset) {
        std::cout << ds << ": mean VOC " << format_number(g.mean) << " over " << g.count
                  << " task(s)\n";
      }
    } else if (success->parsed()) {
      const Manifest m = load_manifest(manifest_path, load_opts);
      const SuccessReport r = run_success(m, traces_dir, tail);
      write_file(out_path, canonical_dump(r.to_json()));
      std::string csv_text = "episode,success_score,label\n";
      for (const auto& [id, s] : r.scores) {
        const auto& l = r.labels.at(id);
        csv_text += id + "," + format_number(s) + "," + (l ? (*l ? "1" : "0") : "") + "\n";
      }
      fs::path csv = out_path;
      csv.replace_extension(".csv");
      write_file(csv, csv_text);
      std::cout << "ROC-AUC: " << (r.roc_auc ? format_number(*r.roc_auc) : "n/a") << "\n";
    } else if (gvl->parsed()) {
      const Manifest m = load_manifest(manifest_path, load_opts);
      auto provider = make_provider(backend, http_opts);
      GvlRunOptions opts;
      opts.gvl.k_count = k;
      opts.gvl.seed = seed;
      opts.jobs = jobs ? jobs : default_jobs(*provider);
      opts.out_dir = out_dir;
      if (!record_path.empty()) opts.record_fixture = record_path;
      opts.backend_label = backend.substr(0, backend.find(':'));
      const GvlSummary s = run_gvl(m, *provider, opts);
      std::cout << "gvl: " << s.episodes << " episode(s), " << s.parse_failures
                << " parse failure(s)\n";
    } else if (adv->parsed()) {
      const AdvantageSummary s = run_advantages(traces_dir, tau, delta_max, out_dir);
      std::cout << "wrote " << s.written << " advantage trace(s)";
      if (!s.skipped.empty()) std::cout << ", skipped " << s.skipped.size() << " short trace(s)";
      std::cout << "\n";
    } else if (voc_study->parsed()) {
      PlateauCurveSpec base{n_points, 1.0, ramp, sigma, seed};
      const auto lv = parse_levels(levels);
      const auto rows = voc_failure_study(lv, base, seeds);
      std::cout << "level,mean_voc,std_voc,mean_final_value\n";
      for (const auto& r : rows) {
        std::cout << format_number(r.level) << ',' << format_number(r.mean_voc) << ','
                  << format_number(r.std_voc) << ',' << format_number(r.mean_final_value) << "\n";
      }
      if (!out_path.empty()) write_file(out_path, voc_study_csv(rows, base));
    } else if (token_study->parsed()) {
      std::vector<TokenRow> rows;
      if (!token_input.empty()) {
        rows = token_rows_from_json(read_json_file(token_input));
      } else {
        if (manifest_path.empty()) throw ValidationError("token-study needs --input or --manifest");
        const Manifest m = load_manifest(manifest_path, load_opts);
        auto provider = make_provider(backend, http_opts);
        std::vector<std::string> cands = default_candidate_tokens();
        if (!tokens.empty()) {
          cands.clear();
          std::stringstream ss(tokens);
          for (std::string t; std::getline(ss, t, ',');) cands.push_back(t);
        }
        RewardConfig cfg;
        cfg.frames_per_prefix_cap = prefix_cap;
        for (const auto& e0 : m.episodes) {
          if (!e0.success_label) continue;
          const Episode e = resolve_frame_uris(e0, m.base_dir);
          ScoringRequest base_req = prefix_request(e, e.frame_count(), cfg);
          TokenRow row{e.id, *e.success_label, {}};
          for (const auto& tok : cands) {
            base_req.continuation = tok;
            row.token_probs[tok] = std::exp(provider->score(base_req).sum_logprob);
          }
          rows.push_back(std::move(row));
        }
      }
      const auto result = token_separation(rows);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
      const std::string csv = token_separation_csv(result.ranked);
      std::cout << csv;
      if (!out_path.empty()) write_file(out_path, csv);
    } else if (serve->parsed()) {
      ServiceConfig cfg;
      cfg.manifest_path = manifest_path;
      cfg.traces_dir = traces_dir;
      AnnotationService service(cfg);
      const auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw ValidationError("--addr must be host:port");
      const int port = service.bind(addr.substr(0, colon), std::stoi(addr.substr(colon + 1)));
      std::cout << "serving on " << addr.substr(0, colon) << ":" << port << std::endl;
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen();
      g_service = nullptr;
    }
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const ScoreError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const BatchError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
