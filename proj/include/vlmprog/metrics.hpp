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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "vlmprog/datamodel.hpp"

namespace vlmprog {

/// 1-based ranks with ties sharing the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation; 0 when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

/// Value-order correlation: Spearman correlation (average ranks for ties)
/// between predicted scores and frame times. Returns 0 when all scores tie.
/// Throws ValidationError on length mismatch or fewer than two points.
double voc(std::span<const double> scores, std::span<const double> times);

/// VOC of a progress trace against its prefix ends.
double voc(const ProgressTrace& trace);

/// Mann-Whitney pair statistic: P(pos > neg) + 0.5 P(pos == neg).
/// Throws ValidationError when either class is empty.
double roc_auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// Stage-aware ground truth at each time: (completed spans + elapsed fraction of
/// the active span) / N. Held constant in gaps; 1 at or after the last end.
std::vector<double> stage_gt(const Episode& e, std::span<const double> at_seconds);

struct Grouping {
  std::map<std::string, std::string> episode_task;
  std::map<std::string, std::string> task_dataset;
};

/// Task mean = unweighted mean over its episodes; dataset mean = unweighted mean
/// over its task means. Standard deviations are population (ddof 0).
/// Throws ValidationError for empty input or missing task/dataset labels.
EvalReport aggregate(const std::map<std::string, EpisodeEval>& per_episode, const Grouping& grouping);

}  // namespace vlmprog
