// Copyright 2026 The vflrps Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "oracles.hpp"
#include "vflrps/error.hpp"
#include "vflrps/scenario.hpp"

namespace vflrps {
namespace {

namespace fs = std::filesystem;

const fs::path kScenarios = fs::path(VFLRPS_SOURCE_DIR) / "scenarios";

template <typename F>
Error error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorCode::kInvalidInput, "none");
}

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path p = fs::path(::testing::TempDir()) / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

TEST(LoadCsv, ReadsCommaAndSemicolonFiles) {
  const Table a = load_csv(write_temp("a.csv", "x,y,\"z\"\n1,2,3\n4.5,-6,7e1\n"), "y");
  EXPECT_EQ(a.names, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(a.column("x"), (std::vector<double>{1, 4.5}));
  EXPECT_EQ(a.column("z"), (std::vector<double>{3, 70}));
  const Table b = load_csv(write_temp("b.csv", "\"fixed acidity\";\"quality\"\n7.0;6\n6.3;5\n"), "quality");
  EXPECT_TRUE(b.has("fixed acidity"));
  EXPECT_EQ(b.column("quality"), (std::vector<double>{6, 5}));
}

TEST(LoadCsv, DropsRowsWithMissingValues) {
  const Table t = load_csv(write_temp("m.csv", "x,y\n1,2\nNA,3\n4,?\n5,6\n,7\n"), "y");
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.dropped_rows, 3u);
}

TEST(LoadCsv, ErrorsNameTheProblem) {
  const Error bad = error_of([] { load_csv(write_temp("n.csv", "x,y\n1,2\nabc,3\n"), "y"); });
  EXPECT_EQ(bad.code(), ErrorCode::kNonNumericColumn);
  EXPECT_NE(std::string(bad.what()).find("x"), std::string::npos);
  EXPECT_EQ(error_of([] { load_csv(write_temp("t.csv", "x,y\n1,2\n"), "label"); }).code(), ErrorCode::kMissingTarget);
  EXPECT_EQ(error_of([] { load_csv(write_temp("f.csv", "x,y\n1,2,3\n"), "y"); }).code(), ErrorCode::kInvalidInput);
  EXPECT_EQ(error_of([] { load_csv(write_temp("e.csv", "x,y\nNA,1\n"), "y"); }).code(),
            ErrorCode::kEmptyAfterFiltering);
  EXPECT_EQ(error_of([] { load_csv("/nonexistent/file.csv", "y"); }).code(), ErrorCode::kIoError);
}

TEST(SplitIndices, EightyTwentyPartition) {
  const auto [train, test] = split_indices(100, 0.8, 42);
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(test.size(), 20u);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(*all.rbegin(), 99u);
  EXPECT_EQ(split_indices(100, 0.8, 42), split_indices(100, 0.8, 42));
  EXPECT_NE(split_indices(100, 0.8, 42).first, split_indices(100, 0.8, 43).first);
}

TEST(SplitIndices, RejectsTinyTablesAndBadRatios) {
  EXPECT_EQ(error_of([] { split_indices(4, 0.8, 1); }).code(), ErrorCode::kInvalidConfig);
  EXPECT_EQ(error_of([] { split_indices(10, 1.0, 1); }).code(), ErrorCode::kInvalidConfig);
  EXPECT_EQ(split_indices(5, 0.99, 1).second.size(), 1u);
}

TEST(ScenarioConfig, JsonRoundTripAndDigest) {
  const auto c = ScenarioConfig::load(kScenarios / "synthetic_basic.json");
  const auto again = ScenarioConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
  EXPECT_EQ(scenario_digest(again), scenario_digest(c));
  auto tweaked = c;
  tweaked.m = 2;
  tweaked.thresholds.tau = 0.5;
  EXPECT_EQ(scenario_digest(tweaked), scenario_digest(c));
  tweaked.seeds.split += 1;
  EXPECT_NE(scenario_digest(tweaked), scenario_digest(c));
  EXPECT_EQ(c.party_ids(), (std::vector<int>{1, 2, 3, 4, 5, 6}));
}

TEST(ScenarioConfig, ShippedScenariosParse) {
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    EXPECT_NO_THROW(ScenarioConfig::load(entry.path())) << entry.path();
  }
}

TEST(ScenarioConfig, RejectsInvalidLayouts) {
  const json base = ScenarioConfig::load(kScenarios / "synthetic_basic.json").to_json();
  auto expect_config_error = [&](json j, const char* what) {
    EXPECT_EQ(error_of([&] { ScenarioConfig::from_json(j); }).code(), ErrorCode::kInvalidConfig) << what;
  };
  json j = base;
  j["surprise"] = 1;
  expect_config_error(j, "unknown key");
  j = base;
  j["selection"]["m"] = 7;
  expect_config_error(j, "M > K");
  j = base;
  j["selection"]["m"] = 0;
  expect_config_error(j, "M = 0");
  j = base;
  j["parties"]["1"].push_back("y");
  expect_config_error(j, "target assigned");
  j = base;
  j["parties"]["2"].push_back("p1_0");
  expect_config_error(j, "column twice");
  j = base;
  j["training"]["learning_rate"] = 0;
  expect_config_error(j, "lr");
  j = base;
  j["duplicates"] = json::array({{{"column", "p1_0"}, {"party", 9}, {"transform", "copy"}}});
  expect_config_error(j, "duplicates without overlapping kind");
}

TEST(Partition, PreservesCellsAndAssignsEveryColumn) {
  auto c = ScenarioConfig::load(kScenarios / "synthetic_basic.json");
  const Table t = generate_synthetic(*c.synthetic, c.task, c.seeds.data);
  std::map<std::string, double> betas;
  for (const auto& f : c.synthetic->features) betas[f.name] = f.beta;
  const Partition p = partition_vertical(t, c, betas);
  EXPECT_EQ(p.active.columns.size(), 3u);
  EXPECT_EQ(p.active.labels, t.column("y"));
  ASSERT_EQ(p.passive.size(), 6u);
  for (const auto& party : p.passive) {
    for (std::size_t f = 0; f < party.features(); ++f) {
      EXPECT_EQ(party.columns[f], t.column(party.feature_names[f]));
    }
  }
  EXPECT_EQ(p.truth.informative_parties, (std::set<int>{1, 2, 3}));

  const auto rows = std::vector<std::size_t>{5, 1, 9};
  const Partition sub = select_rows(p, rows);
  EXPECT_EQ(sub.passive[2].columns[1][0], p.passive[2].columns[1][5]);
  EXPECT_EQ((*sub.active.labels)[2], (*p.active.labels)[9]);
}

TEST(Partition, UnassignedColumnIsInvalidConfig) {
  auto c = ScenarioConfig::load(kScenarios / "synthetic_basic.json");
  Table t = generate_synthetic(*c.synthetic, c.task, c.seeds.data);
  t.names.push_back("stray");
  t.columns.push_back(t.columns.front());
  EXPECT_EQ(error_of([&] { partition_vertical(t, c); }).code(), ErrorCode::kInvalidConfig);
}

TEST(Partition, WineStyleLayoutFromCsv) {
  std::string csv = "\"fixed acidity\";\"volatile acidity\";\"citric acid\";\"residual sugar\";\"chlorides\";"
                    "\"free sulfur dioxide\";\"total sulfur dioxide\";\"density\";\"pH\";\"sulphates\";\"alcohol\";"
                    "\"quality\"\n";
  for (int i = 0; i < 40; ++i) {
    for (int f = 0; f < 11; ++f) csv += std::to_string((i * 7 + f * 3) % 17) + ";";
    csv += std::to_string(3 + i % 6) + "\n";
  }
  write_temp("winequality-white.csv", csv);
  json j = ScenarioConfig::load(kScenarios / "wine_quality_classification.json").to_json();
  j["source"]["csv"] = "winequality-white.csv";
  const auto c = ScenarioConfig::from_json(j, ::testing::TempDir());
  const PreparedScenario s = prepare_scenario(c);
  EXPECT_EQ(s.train.active.columns.size(), 3u);
  ASSERT_EQ(s.train.passive.size(), 4u);
  for (const auto& p : s.train.passive) EXPECT_EQ(p.features(), 2u);
  EXPECT_EQ(s.train.active.samples() + s.test.active.samples(), 40u);
  for (double y : *s.train.active.labels) EXPECT_TRUE(y == 0.0 || y == 1.0);
  // quality >= 6 is positive: i % 6 in {3, 4, 5}, 7 + 6 + 6 rows
  double positives = 0;
  for (double y : *s.train.active.labels) positives += y;
  for (double y : *s.test.active.labels) positives += y;
  EXPECT_EQ(positives, 19.0);
}

TEST(Partition, OverlappingGroundTruth) {
  const auto c = ScenarioConfig::load(kScenarios / "synthetic_overlapping.json");
  const auto s = prepare_scenario(c);
  using P = std::pair<FeatureRef, FeatureRef>;
  const std::set<P> expected{P{{1, 0}, {6, 0}}, P{{1, 1}, {6, 1}}, P{{2, 0}, {7, 0}}, P{{2, 1}, {7, 1}},
                             P{{3, 0}, {8, 1}}};
  EXPECT_EQ(s.truth.redundant_feature_pairs, expected);
  EXPECT_EQ(s.truth.active_duplicates, (std::set<FeatureRef>{{8, 0}}));
  const auto& p7 = s.train.passive[6];
  ASSERT_EQ(p7.party_id, 7);
  EXPECT_EQ(p7.feature_names[0], "p2_0_dup7");
  EXPECT_DOUBLE_EQ(p7.columns[0][3], 2 * s.train.passive[1].columns[0][3] + 1);
}

TEST(Partition, NoisePartiesAreUncorrelatedWithTarget) {
  const auto c = ScenarioConfig::load(kScenarios / "synthetic_irrelevant.json");
  const auto s = prepare_scenario(c);
  EXPECT_EQ(s.truth.noise_parties, (std::set<int>{2, 4, 6}));
  for (const auto& p : s.train.passive) {
    if (!s.truth.noise_parties.count(p.party_id)) continue;
    for (const auto& col : p.columns) EXPECT_LT(std::abs(oracle::spearman(col, *s.train.active.labels)), 0.1);
  }
}

TEST(PrepareScenario, RegressionTargetStandardizedOnTrain) {
  const auto s = prepare_scenario(ScenarioConfig::load(kScenarios / "synthetic_basic.json"));
  const auto& y = *s.train.active.labels;
  double m = 0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double ss = 0;
  for (double v : y) ss += (v - m) * (v - m);
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(ss / static_cast<double>(y.size())), 1.0, 1e-12);
  EXPECT_EQ(s.train.active.samples(), 1600u);
  EXPECT_EQ(s.test.active.samples(), 400u);
}

SyntheticSpec spec_with(std::vector<double> betas, double sigma, std::size_t n) {
  SyntheticSpec spec;
  spec.n = n;
  spec.noise_sigma = sigma;
  for (std::size_t j = 0; j < betas.size(); ++j) spec.features.push_back({"f" + std::to_string(j), betas[j]});
  return spec;
}

TEST(GenerateSynthetic, ZeroBetaFeatureIsIndependentOfTarget) {
  const Table t = generate_synthetic(spec_with({1.0, 0.0}, 0.5, 2000), Task::kRegression, 3);
  EXPECT_LT(std::abs(oracle::spearman(t.column("f1"), t.column("y"))), 0.1);
  EXPECT_GT(std::abs(oracle::spearman(t.column("f0"), t.column("y"))), 0.5);
}

TEST(GenerateSynthetic, DominantFeatureCorrelatesMost) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Table t = generate_synthetic(spec_with({0.3, 2.0, 0.5}, 0.5, 1000), Task::kRegression, seed);
    const double dominant = std::abs(oracle::spearman(t.column("f1"), t.column("y")));
    EXPECT_GT(dominant, std::abs(oracle::spearman(t.column("f0"), t.column("y"))));
    EXPECT_GT(dominant, std::abs(oracle::spearman(t.column("f2"), t.column("y"))));
  }
}

TEST(GenerateSynthetic, NoiselessTargetIsExactlyLinear) {
  const Table t = generate_synthetic(spec_with({1.5, -0.5}, 0.0, 300), Task::kRegression, 9);
  const auto fit = oracle::centralized_gd({t.column("f0"), t.column("f1")}, t.column("y"), 0.5, 2000, false);
  EXPECT_NEAR(fit.w[0], 1.5, 1e-6);
  EXPECT_NEAR(fit.w[1], -0.5, 1e-6);
}

TEST(GenerateSynthetic, ClassificationLabelsAreBinaryAndSeeded) {
  const auto spec = spec_with({1.0}, 0.0, 200);
  const Table a = generate_synthetic(spec, Task::kClassification, 4);
  for (double y : a.column("y")) EXPECT_TRUE(y == 0.0 || y == 1.0);
  EXPECT_EQ(a.columns, generate_synthetic(spec, Task::kClassification, 4).columns);
  EXPECT_NE(a.columns, generate_synthetic(spec, Task::kClassification, 5).columns);
}

}  // namespace
}  // namespace vflrps
