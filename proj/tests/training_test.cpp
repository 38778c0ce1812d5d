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

#include <cmath>
#include <memory>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"
#include "vflrps/error.hpp"
#include "vflrps/training.hpp"

namespace vflrps {
namespace {

using ::vflrps::testing::Gen;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidInput;
}

// Active block plus passive trainers served in-process.
class TrainingRig {
 public:
  TrainingRig(FeatureColumns active, std::vector<double> y, std::vector<FeatureColumns> passive)
      : trainer_(active, active, std::move(y), network_) {
    for (std::size_t k = 0; k < passive.size(); ++k) {
      const int id = static_cast<int>(k + 1);
      nodes_.push_back(std::make_unique<PassiveTrainer>(passive[k], passive[k]));
      PassiveTrainer* node = nodes_.back().get();
      network_.serve("p" + std::to_string(id), [node](const Envelope& e) { return node->handle(e); });
      links_.push_back({id, "p" + std::to_string(id)});
    }
  }

  FederatedTrainer& trainer() { return trainer_; }
  InProcNetwork& network() { return network_; }
  const std::vector<PassiveLink>& links() const { return links_; }

 private:
  InProcNetwork network_;
  std::vector<std::unique_ptr<PassiveTrainer>> nodes_;
  std::vector<PassiveLink> links_;
  FederatedTrainer trainer_;
};

TrainConfig cfg(double lr, int epochs, Task task = Task::kRegression) {
  TrainConfig c;
  c.learning_rate = lr;
  c.epochs = epochs;
  c.task = task;
  return c;
}

TEST(FederatedTrainer, RecoversSlopeHeldByPassiveParty) {
  Gen g(1);
  const auto x = ::vflrps::oracle::standardize({g.normals(500)}).front();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2 * x[i];
  TrainingRig s({}, y, {{x}});
  const auto model = s.trainer().fit(s.links(), cfg(0.1, 1000), "slope");
  EXPECT_NEAR(model.passive_weights.at(1)[0], 2.0, 1e-3);
  EXPECT_NEAR(model.bias, 0.0, 1e-3);
  EXPECT_EQ(model.loss_curve.size(), 1000u);
}

TEST(FederatedTrainer, MatchesCentralizedGradientDescent) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    Gen g(seed);
    const std::size_t n = g.size(20, 300);
    const bool logistic = seed % 2 == 0;
    const std::size_t d = g.size(0, 2);
    const std::size_t k = g.size(1, 3);
    FeatureColumns all;
    FeatureColumns active;
    std::vector<FeatureColumns> passive(k);
    for (std::size_t j = 0; j < d; ++j) active.push_back(g.normals(n));
    for (auto& p : passive) {
      for (std::size_t j = 0, f = g.size(1, 3); j < f; ++j) p.push_back(g.normals(n));
    }
    all = active;
    for (const auto& p : passive) all.insert(all.end(), p.begin(), p.end());
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double t = 0.3 * g.normal();
      for (const auto& c : all) t += 0.5 * c[i];
      y[i] = logistic ? (t > 0 ? 1.0 : 0.0) : t;
    }
    const double lr = 0.05;
    const int epochs = 200;
    const auto expected = ::vflrps::oracle::centralized_gd(all, y, lr, epochs, logistic);

    TrainingRig s(active, y, passive);
    const auto model =
        s.trainer().fit(s.links(), cfg(lr, epochs, logistic ? Task::kClassification : Task::kRegression), "m");
    std::vector<double> got = model.active_weights;
    for (const auto& [id, w] : model.passive_weights) got.insert(got.end(), w.begin(), w.end());
    ASSERT_EQ(got.size(), expected.w.size());
    for (std::size_t j = 0; j < got.size(); ++j) {
      EXPECT_NEAR(got[j], expected.w[j], 1e-6) << ::vflrps::testing::case_label(seed);
    }
    EXPECT_NEAR(model.bias, expected.b, 1e-6);
  }
}

TEST(FederatedTrainer, OneEpochIsOneGradientStep) {
  const FeatureColumns active{{1, 2, 3, 4}};
  const FeatureColumns passive{{-1, 0, 0, 1}};
  const std::vector<double> y{1, 0, 2, 1};
  TrainingRig s(active, y, {passive});
  const auto model = s.trainer().fit(s.links(), cfg(0.5, 1), "one");
  // residual = -y; w -= lr/n X^T residual
  EXPECT_NEAR(model.active_weights[0], 0.5 / 4 * (1 + 0 + 6 + 4), 1e-15);
  EXPECT_NEAR(model.passive_weights.at(1)[0], 0.5 / 4 * (-1 + 0 + 0 + 1), 1e-15);
  EXPECT_NEAR(model.bias, 0.5 * 1.0, 1e-15);
  ASSERT_EQ(model.loss_curve.size(), 1u);
  EXPECT_NEAR(model.loss_curve[0], (1 + 0 + 4 + 1) / 4.0, 1e-15);
}

TEST(FederatedTrainer, LogisticStepFollowsFiniteDifferenceGradient) {
  Gen g(8);
  const FeatureColumns x{g.normals(60), g.normals(60)};
  std::vector<double> y(60);
  for (std::size_t i = 0; i < 60; ++i) y[i] = x[0][i] - x[1][i] > 0 ? 1 : 0;
  const double lr = 0.1;
  TrainingRig s({x[0]}, y, {{x[1]}});
  const auto model = s.trainer().fit(s.links(), cfg(lr, 1, Task::kClassification), "lg");
  const double h = 1e-6;
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> up(2, 0.0);
    std::vector<double> down(2, 0.0);
    up[j] = h;
    down[j] = -h;
    const double grad =
        (::vflrps::oracle::log_loss(x, y, up, 0) - ::vflrps::oracle::log_loss(x, y, down, 0)) / (2 * h);
    const double w = j == 0 ? model.active_weights[0] : model.passive_weights.at(1)[0];
    EXPECT_NEAR(w, -lr * grad, 1e-7);
  }
  EXPECT_NEAR(model.loss_curve[0], std::log(2.0), 1e-12);
}

TEST(FederatedTrainer, RegressionLossIsNonIncreasing) {
  Gen g(4);
  const FeatureColumns x{g.normals(200), g.normals(200)};
  std::vector<double> y(200);
  for (std::size_t i = 0; i < 200; ++i) y[i] = x[0][i] - 0.5 * x[1][i] + 0.2 * g.normal();
  TrainingRig s({x[0]}, y, {{x[1]}});
  const auto model = s.trainer().fit(s.links(), cfg(0.01, 300), "mono");
  for (std::size_t e = 1; e < model.loss_curve.size(); ++e) EXPECT_LE(model.loss_curve[e], model.loss_curve[e - 1]);
}

TEST(FederatedTrainer, PredictWithOtherPartiesIsInvalidConfig) {
  Gen g(5);
  TrainingRig s({g.normals(10)}, g.normals(10), {{g.normals(10)}, {g.normals(10)}});
  const auto model = s.trainer().fit({s.links()[0]}, cfg(0.1, 2), "m");
  EXPECT_EQ(code_of([&] { s.trainer().predict(model, s.links(), Split::kTest); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(s.trainer().predict(model, {s.links()[0]}, Split::kTest).size(), 10u);
}

TEST(FederatedTrainer, ZeroWeightsPredictOneHalf) {
  Gen g(6);
  TrainingRig s({g.normals(10)}, std::vector<double>(10, 1.0), {{g.normals(10)}});
  FederatedModel model;
  model.task = Task::kClassification;
  model.parties = {1};
  model.active_weights = {0.0};
  model.model_id = "zero";
  push_passive_weights(s.network(), s.links()[0], "zero", {0.0});
  for (double p : s.trainer().predict(model, s.links(), Split::kTest)) EXPECT_EQ(p, 0.5);
}

TEST(FederatedTrainer, ExplodingLossIsDiverged) {
  Gen g(7);
  TrainingRig s({g.normals(50)}, g.normals(50), {{g.normals(50)}});
  EXPECT_EQ(code_of([&] { s.trainer().fit(s.links(), cfg(1e6, 1000), "boom"); }), ErrorCode::kDiverged);
}

TEST(TrainConfig, ValidateRejectsBadValues) {
  EXPECT_EQ(code_of([] { cfg(0, 10).validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { cfg(0.1, 0).validate(); }), ErrorCode::kInvalidConfig);
}

TEST(ColumnScaler, UsesTrainingStatistics) {
  const ColumnScaler s = ColumnScaler::fit({{1, 2, 3}, {5, 5, 5}});
  const auto out = s.apply({{1, 2, 3, 4}, {5, 6, 4, 5}});
  const double k = 1.0 / std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(out[0][0], -k, 1e-12);
  EXPECT_NEAR(out[0][3], 2 * k, 1e-12);
  EXPECT_EQ(out[1], (std::vector<double>{0, 1, -1, 0}));
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0), 0.5);
  EXPECT_GT(sigmoid(-800), 0.0 - 1e-300);
  EXPECT_LE(sigmoid(800), 1.0);
  EXPECT_FALSE(std::isnan(sigmoid(-800)));
}

}  // namespace
}  // namespace vflrps
