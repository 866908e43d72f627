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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "vlmprog/errors.hpp"
#include "vlmprog/json_io.hpp"
#include "vlmprog/metrics.hpp"
#include "vlmprog/synthlab.hpp"

namespace vlmprog {
namespace {

TEST(NormalSampler, MomentsAndDeterminism) {
  NormalSampler a(9), b(9);
  double sum = 0, sq = 0;
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = a.next();
    ASSERT_EQ(x, b.next());
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(PlateauCurve, NoiselessShape) {
  PlateauCurveSpec spec{.n_points = 30, .plateau_level = 0.8, .ramp_fraction = 0.5,
                        .noise_sigma = 0.0, .seed = 0};
  const auto y = gen_plateau_curve(spec);
  ASSERT_EQ(y.size(), 30u);
  EXPECT_EQ(y.front(), 0.0);
  EXPECT_DOUBLE_EQ(y.back(), 0.8);
  for (int i = 0; i < 30; ++i) {
    const double u = i / 29.0;
    EXPECT_NEAR(y[i], 0.8 * std::min(u / 0.5, 1.0), 1e-15);
  }
}

TEST(PlateauCurve, NoiselessVocMatchesOracle) {
  // Ramp of 15 distinct points, then 15 tied plateau points.
  PlateauCurveSpec spec{.n_points = 30, .plateau_level = 0.5, .ramp_fraction = 0.5,
                        .noise_sigma = 0.0, .seed = 0};
  const auto y = gen_plateau_curve(spec);
  std::vector<double> t(30);
  std::iota(t.begin(), t.end(), 1.0);
  EXPECT_NEAR(voc(y, t), testing::oracle::spearman(y, t), 1e-12);
  EXPECT_NEAR(voc(y, t), 0.9356372855677594, 1e-12);
}

TEST(PlateauCurve, ClippedAndSeeded) {
  PlateauCurveSpec spec{.n_points = 50, .plateau_level = 0.3, .ramp_fraction = 0.4,
                        .noise_sigma = 0.2, .seed = 5};
  const auto y = gen_plateau_curve(spec);
  EXPECT_EQ(y, gen_plateau_curve(spec));
  for (double v : y) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.05 * 0.3);
  }
  spec.n_points = 1;
  EXPECT_THROW(gen_plateau_curve(spec), ValidationError);
}

TEST(VocStudy, LevelsAreNotSeparatedByVoc) {
  const std::vector<double> levels{0.8, 0.5, 0.3};
  PlateauCurveSpec base{.n_points = 30, .plateau_level = 1.0, .ramp_fraction = 0.5,
                        .noise_sigma = 0.01, .seed = 0};
  const auto rows = voc_failure_study(levels, base, 100);
  ASSERT_EQ(rows.size(), 3u);
  double lo = 1, hi = -1;
  for (const auto& r : rows) {
    EXPECT_EQ(r.vocs.size(), 100u);
    EXPECT_GE(r.mean_voc, 0.85);
    lo = std::min(lo, r.mean_voc);
    hi = std::max(hi, r.mean_voc);
  }
  EXPECT_LT(hi - lo, 0.05);
  // Final values, unlike VOC, separate the curves.
  EXPECT_GT(rows[0].mean_final_value, rows[1].mean_final_value + 0.2);
  EXPECT_GT(rows[1].mean_final_value, rows[2].mean_final_value + 0.1);

  const std::string csv = voc_study_csv(rows, base);
  EXPECT_EQ(csv.rfind("# n_points=30 ramp_fraction=0.5 noise_sigma=0.01 base_seed=0\n"
                      "level,seed,voc,final_value\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 302);
}

std::vector<TokenRow> fixture_rows() {
  const Json j = read_json_file(testing::fixture_dir() / "token_rows.json");
  std::vector<TokenRow> rows;
  for (const auto& r : j) {
    rows.push_back({r.at("episode_id"), r.at("success"),
                    r.at("token_probs").get<std::map<std::string, double>>()});
  }
  return rows;
}

TEST(TokenSeparation, FixtureRanksTrueFirst) {
  const auto res = token_separation(fixture_rows());
  ASSERT_FALSE(res.ranked.empty());
  EXPECT_EQ(res.ranked.front().token, "True");
  EXPECT_NEAR(res.ranked.front().abs_delta, 0.45, 1e-12);
  for (std::size_t i = 1; i < res.ranked.size(); ++i) {
    EXPECT_GE(res.ranked[i - 1].abs_delta, res.ranked[i].abs_delta);
  }
}

TEST(TokenSeparation, ShiftInvariantAndMissingCountsZero) {
  std::vector<TokenRow> rows{{"a", true, {{"x", 0.9}, {"y", 0.2}}},
                             {"b", true, {{"x", 0.7}, {"y", 0.4}}},
                             {"c", false, {{"x", 0.1}}}};
  const auto base = token_separation(rows);
  ASSERT_EQ(base.ranked.size(), 2u);
  EXPECT_EQ(base.ranked[0].token, "x");
  EXPECT_NEAR(base.ranked[0].abs_delta, 0.7, 1e-12);
  EXPECT_NEAR(base.ranked[1].abs_delta, 0.3, 1e-12);
  EXPECT_FALSE(base.warnings.empty());

  for (auto& r : rows) {
    for (auto& [tok, p] : r.token_probs) p += 0.05;
    r.token_probs.try_emplace("y", 0.05);
  }
  const auto shifted = token_separation(rows);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(shifted.ranked[i].token, base.ranked[i].token);
    EXPECT_NEAR(shifted.ranked[i].abs_delta, base.ranked[i].abs_delta, 1e-12);
  }
}

TEST(TokenSeparation, NeedsBothClasses) {
  std::vector<TokenRow> rows{{"a", true, {{"x", 0.9}}}};
  EXPECT_THROW(token_separation(rows), ValidationError);
}

}  // namespace
}  // namespace vlmprog
