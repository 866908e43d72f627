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

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace vlmprog {

struct PlateauCurveSpec {
  int n_points = 30;
  double plateau_level = 1.0;
  double ramp_fraction = 0.5;
  double noise_sigma = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Standard normal draws via Box-Muller over std::mt19937_64, so sequences are
/// the same on every standard library.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}
  double next();

 private:
  double uniform01();  // in (0, 1]
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// y_i = level * min(u_i / ramp, 1) + noise, u_i = i / (n - 1), clipped to
/// [0, 1.05 * level].
std::vector<double> gen_plateau_curve(const PlateauCurveSpec& spec);

struct VocStudyRow {
  double level = 0.0;
  double mean_voc = 0.0;
  double std_voc = 0.0;
  double mean_final_value = 0.0;
  std::vector<double> vocs;  // one per seed
};

/// For each level, VOC of `repeats` seeded curves against times 1..n.
/// Seeds are base.seed, base.seed + 1, ...
std::vector<VocStudyRow> voc_failure_study(std::span<const double> levels,
                                           const PlateauCurveSpec& base, int repeats);

/// CSV with one row per (level, seed): level,seed,voc,final_value.
std::string voc_study_csv(std::span<const VocStudyRow> rows, const PlateauCurveSpec& base);

struct TokenRow {
  std::string episode_id;
  bool success = false;
  std::map<std::string, double> token_probs;
};

struct TokenSeparation {
  std::string token;
  double abs_delta = 0.0;
  double mean_success = 0.0;
  double mean_fail = 0.0;
};

struct TokenSeparationResult {
  std::vector<TokenSeparation> ranked;
  std::vector<std::string> warnings;
};

/// Ranks tokens by |mean prob over successes - mean prob over failures|,
/// descending (ties by token text). Tokens missing from a row count as 0.
TokenSeparationResult token_separation(std::span<const TokenRow> rows);

std::string token_separation_csv(std::span<const TokenSeparation> ranked);

/// Default candidate tokens for the separation study.
std::vector<std::string> default_candidate_tokens();

}  // namespace vlmprog
