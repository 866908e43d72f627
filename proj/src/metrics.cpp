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

#include "vlmprog/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlmprog/errors.hpp"

namespace vlmprog {
namespace {

GroupStats stats_of(const std::vector<double>& xs) {
  GroupStats g;
  g.count = xs.size();
  if (xs.empty()) return g;
  g.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - g.mean) * (x - g.mean);
  g.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return g;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank (i+1 + j) / 2
    const double r = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double voc(std::span<const double> scores, std::span<const double> times) {
  if (scores.size() != times.size()) throw ValidationError("voc: length mismatch");
  if (scores.size() < 2) throw ValidationError("voc: need at least two points");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ValidationError("voc: non-finite score");
  }
  const auto rs = average_ranks(scores);
  const auto rt = average_ranks(times);
  return pearson(rs, rt);
}

double voc(const ProgressTrace& trace) {
  std::vector<double> s, t;
  s.reserve(trace.entries.size());
  t.reserve(trace.entries.size());
  for (const auto& e : trace.entries) {
    s.push_back(e.s);
    t.push_back(e.t_k);
  }
  return voc(s, t);
}

double roc_auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty()) {
    throw ValidationError("roc_auc: both classes need at least one score");
  }
  std::vector<double> all(pos_scores.begin(), pos_scores.end());
  all.insert(all.end(), neg_scores.begin(), neg_scores.end());
  const auto ranks = average_ranks(all);
  const double n_pos = static_cast<double>(pos_scores.size());
  const double n_neg = static_cast<double>(neg_scores.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < pos_scores.size(); ++i) rank_sum += ranks[i];
  // U counts pos>neg pairs plus half the ties.
  const double u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

std::vector<double> stage_gt(const Episode& e, std::span<const double> at_seconds) {
  if (!e.annotations || e.annotations->empty()) {
    throw ValidationError("stage_gt: episode " + e.id + " has no annotations");
  }
  const auto& spans = *e.annotations;
  const double n = static_cast<double>(spans.size());
  std::vector<double> out;
  out.reserve(at_seconds.size());
  for (double t : at_seconds) {
    double completed = 0.0;
    double active = 0.0;
    for (const auto& s : spans) {
      if (s.end_second <= t) {
        completed += 1.0;
      } else if (s.start_second <= t) {
        active = (t - s.start_second) / (s.end_second - s.start_second);
      }
    }
    out.push_back(std::clamp((completed + active) / n, 0.0, 1.0));
  }
  return out;
}

EvalReport aggregate(const std::map<std::string, EpisodeEval>& per_episode, const Grouping& grouping) {
  if (per_episode.empty()) throw ValidationError("aggregate: no episodes");
  EvalReport r;
  r.per_episode = per_episode;

  std::map<std::string, std::vector<double>> task_vocs;
  for (const auto& [id, ev] : per_episode) {
    auto it = grouping.episode_task.find(id);
    if (it == grouping.episode_task.end() || it->second.empty()) {
      throw ValidationError("aggregate: episode " + id + " has no task label");
    }
    task_vocs[it->second].push_back(ev.voc);
    r.episode_task[id] = it->second;
  }

  std::map<std::string, std::vector<double>> dataset_means;
  for (const auto& [task, vocs] : task_vocs) {
    r.per_task[task] = stats_of(vocs);
    auto it = grouping.task_dataset.find(task);
    if (it == grouping.task_dataset.end() || it->second.empty()) {
      throw ValidationError("aggregate: task " + task + " has no dataset label");
    }
    dataset_means[it->second].push_back(r.per_task[task].mean);
    r.task_dataset[task] = it->second;
  }
  for (const auto& [ds, means] : dataset_means) r.per_dataset[ds] = stats_of(means);

  r.metadata["voc_ties"] = "average_ranks";
  r.metadata["aggregation"] = "task_then_dataset_unweighted";
  r.metadata["std"] = "population";
  return r;
}

}  // namespace vlmprog
