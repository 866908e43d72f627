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

#include "vlmprog/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "vlmprog/errors.hpp"
#include "vlmprog/json_io.hpp"
#include "vlmprog/metrics.hpp"

namespace vlmprog {

void PlateauCurveSpec::validate() const {
  if (n_points < 2) throw ValidationError("n_points must be >= 2");
  if (!(plateau_level > 0.0 && plateau_level <= 1.0)) {
    throw ValidationError("plateau_level must be in (0, 1]");
  }
  if (!(ramp_fraction > 0.0 && ramp_fraction <= 1.0)) {
    throw ValidationError("ramp_fraction must be in (0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
}

double NormalSampler::uniform01() {
  // 53 random mantissa bits, shifted off zero so log() is finite.
  return (static_cast<double>(rng_() >> 11) + 1.0) * 0x1.0p-53;
}

double NormalSampler::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::vector<double> gen_plateau_curve(const PlateauCurveSpec& spec) {
  spec.validate();
  NormalSampler noise(spec.seed);
  std::vector<double> y(static_cast<std::size_t>(spec.n_points));
  const double hi = 1.05 * spec.plateau_level;
  for (int i = 0; i < spec.n_points; ++i) {
    const double u = static_cast<double>(i) / (spec.n_points - 1);
    double v = spec.plateau_level * std::min(u / spec.ramp_fraction, 1.0);
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.next();
    y[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, hi);
  }
  return y;
}

std::vector<VocStudyRow> voc_failure_study(std::span<const double> levels,
                                           const PlateauCurveSpec& base, int repeats) {
  if (repeats < 1) throw ValidationError("voc_failure_study needs at least one repeat");
  std::vector<double> times(static_cast<std::size_t>(base.n_points));
  std::iota(times.begin(), times.end(), 1.0);

  std::vector<VocStudyRow> rows;
  for (double level : levels) {
    VocStudyRow row;
    row.level = level;
    double final_sum = 0.0;
    for (int r = 0; r < repeats; ++r) {
      PlateauCurveSpec spec = base;
      spec.plateau_level = level;
      spec.seed = base.seed + static_cast<std::uint64_t>(r);
      const auto curve = gen_plateau_curve(spec);
      row.vocs.push_back(voc(curve, times));
      final_sum += curve.back();
    }
    const double n = static_cast<double>(repeats);
    row.mean_voc = std::accumulate(row.vocs.begin(), row.vocs.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : row.vocs) ss += (v - row.mean_voc) * (v - row.mean_voc);
    row.std_voc = std::sqrt(ss / n);
    row.mean_final_value = final_sum / n;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string voc_study_csv(std::span<const VocStudyRow> rows, const PlateauCurveSpec& base) {
  std::ostringstream out;
  out << "# n_points=" << base.n_points << " ramp_fraction=" << format_number(base.ramp_fraction)
      << " noise_sigma=" << format_number(base.noise_sigma) << " base_seed=" << base.seed << "\n";
  out << "level,seed,voc,final_value\n";
  for (const auto& row : rows) {
    for (std::size_t r = 0; r < row.vocs.size(); ++r) {
      PlateauCurveSpec spec = base;
      spec.plateau_level = row.level;
      spec.seed = base.seed + r;
      out << format_number(row.level) << ',' << spec.seed << ',' << format_number(row.vocs[r])
          << ',' << format_number(gen_plateau_curve(spec).back()) << '\n';
    }
  }
  return out.str();
}

TokenSeparationResult token_separation(std::span<const TokenRow> rows) {
  std::size_t n_succ = 0, n_fail = 0;
  std::set<std::string> vocab;
  for (const auto& row : rows) {
    (row.success ? n_succ : n_fail) += 1;
    for (const auto& [tok, p] : row.token_probs) vocab.insert(tok);
  }
  if (n_succ == 0 || n_fail == 0) {
    throw ValidationError("token_separation: need both successful and failed rows");
  }

  TokenSeparationResult out;
  for (const auto& tok : vocab) {
    double sum_s = 0.0, sum_f = 0.0;
    for (const auto& row : rows) {
      auto it = row.token_probs.find(tok);
      double p = 0.0;
      if (it == row.token_probs.end()) {
        out.warnings.push_back("token '" + tok + "' absent from " + row.episode_id +
                               ", treated as 0");
      } else {
        p = it->second;
      }
      (row.success ? sum_s : sum_f) += p;
    }
    TokenSeparation ts;
    ts.token = tok;
    ts.mean_success = sum_s / static_cast<double>(n_succ);
    ts.mean_fail = sum_f / static_cast<double>(n_fail);
    ts.abs_delta = std::abs(ts.mean_success - ts.mean_fail);
    out.ranked.push_back(ts);
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const TokenSeparation& a, const TokenSeparation& b) {
                     return a.abs_delta > b.abs_delta;
                   });
  return out;
}

std::string token_separation_csv(std::span<const TokenSeparation> ranked) {
  std::ostringstream out;
  out << "token,delta,mean_success,mean_fail\n";
  for (const auto& t : ranked) {
    out << Json(t.token).dump() << ',' << format_number(t.abs_delta) << ','
        << format_number(t.mean_success) << ',' << format_number(t.mean_fail) << '\n';
  }
  return out.str();
}

std::vector<std::string> default_candidate_tokens() {
  return {"True", "False", "Yes", "No", "true", "yes", "done", "complete", "finished", "not"};
}

}  // namespace vlmprog
