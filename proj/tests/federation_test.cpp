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
#include <vector>

#include "harness.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "vflrps/error.hpp"
#include "vflrps/federation.hpp"

namespace vflrps {
namespace {

using ::vflrps::testing::Gen;
using ::vflrps::testing::LocalHarness;
using ::vflrps::testing::make_party;

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

CorrelationMatrix matrix_of(int party, std::size_t d, std::vector<std::vector<double>> rows) {
  CorrelationMatrix m(party, d, rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

TEST(CorrelationMatrix, MatchesPlaintextOracle) {
  for (std::uint64_t s = 1; s <= 8; ++s) {
    Gen g(s);
    const std::size_t n = g.size(5, 300);
    auto fed = ::vflrps::testing::random_federation(g, g.size(1, 3), g.size(1, 4), n, 3);
    const auto rows = ::vflrps::testing::active_rows(fed.active);
    LocalHarness h(fed.active, fed.passive, s, s % 2 ? InProcNetwork::Mode::kSerialized : InProcNetwork::Mode::kDirect);
    const auto matrices = h.matrices();
    for (std::size_t k = 0; k < matrices.size(); ++k) {
      const auto& m = matrices[k];
      ASSERT_EQ(m.rows(), rows.size());
      ASSERT_EQ(m.passive_features, fed.passive[k].features());
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.passive_features; ++j) {
          EXPECT_NEAR(m.at(i, j), ::vflrps::oracle::spearman(rows[i], fed.passive[k].columns[j]), 1e-9)
              << ::vflrps::testing::case_label(s);
        }
      }
    }
  }
}

TEST(CorrelationMatrix, TcpAndInProcessAgree) {
  Gen g(3);
  auto fed = ::vflrps::testing::random_federation(g, 1, 2, 120, 3);
  const auto a = compute_correlation_matrix(fed.active, fed.passive[0], TransportKind::kInProcess, 99);
  const auto b = compute_correlation_matrix(fed.active, fed.passive[0], TransportKind::kTcp, 99);
  EXPECT_EQ(a.entries, b.entries);
}

TEST(CorrelationMatrix, CopiedColumnCorrelatesToOne) {
  Gen g(5);
  const auto x = g.normals(200);
  const auto y = g.related(x);
  const auto active = make_party(0, {x}, y);
  const auto passive = make_party(1, {x, g.normals(200)});
  const auto m = compute_correlation_matrix(active, passive, TransportKind::kInProcess, 1);
  EXPECT_NEAR(m.at(0, 0), 1.0, 1e-9);
}

TEST(CorrelationMatrix, IndependentNoiseStaysSmall) {
  Gen g(17);
  const auto active = make_party(0, {g.normals(2000)}, g.normals(2000));
  const auto passive = make_party(1, {g.normals(2000), g.normals(2000), g.normals(2000)});
  const auto m = compute_correlation_matrix(active, passive, TransportKind::kInProcess, 4);
  for (double v : m.entries) EXPECT_LT(std::abs(v), 0.1);
}

TEST(CorrelationMatrix, ConstantPassiveColumnIsFlagged) {
  Gen g(2);
  const auto active = make_party(0, {g.normals(50)}, g.normals(50));
  const auto passive = make_party(1, {std::vector<double>(50, 3.0), g.normals(50)});
  const auto m = compute_correlation_matrix(active, passive, TransportKind::kInProcess, 4);
  EXPECT_TRUE(m.constant_at(0, 0));
  EXPECT_TRUE(m.constant_at(1, 0));
  EXPECT_EQ(m.at(1, 0), 0.0);
  EXPECT_FALSE(m.constant_at(0, 1));
}

TEST(ActiveOverlap, ThresholdIsStrictAndIgnoresTarget) {
  // d = 2; the last row is the target.
  const auto m = matrix_of(1, 2, {{0.9, 0.91, 0.1, -0.95}, {0.2, 0.0, 0.1, 0.0}, {0.99, 0.0, 0.99, 0.0}});
  EXPECT_EQ(detect_active_overlap(m, 0.9), (std::vector<std::size_t>{1, 3}));
}

TEST(CrossPartyCandidates, DistanceBelowDelta) {
  const auto a = matrix_of(1, 1, {{0.1, 0.5}, {0.8, 0.0}});
  const auto b = matrix_of(2, 1, {{0.15, -0.5}, {0.75, 0.0}});
  // (0,0): 0.0707, (1,0): sqrt(0.1225+0.5625)=0.8276, (0,1) and (1,1): exactly 1
  EXPECT_EQ(detect_cross_party_candidates(a, b, 0.5), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));
  EXPECT_EQ(detect_cross_party_candidates(a, b, 1.0),
            (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 0}}));
  EXPECT_EQ(detect_cross_party_candidates(a, b, 1.0 + 1e-9),
            (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
  EXPECT_TRUE(detect_cross_party_candidates(a, b, 0.5, {0}).empty());
}

TEST(RedundancyReport, MatchesPooledOracle) {
  const Thresholds t{0.9, 0.5, 0.95};
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Gen g(s * 7919);
    const std::size_t n = g.size(50, 400);
    auto fed = ::vflrps::testing::random_federation(g, g.size(2, 4), g.size(1, 3), n, 3);
    std::vector<::vflrps::oracle::PooledParty> pooled;
    for (const auto& p : fed.passive) pooled.push_back({p.party_id, p.columns});
    const auto expected =
        ::vflrps::oracle::pooled_redundancy(fed.active.columns, *fed.active.labels, pooled, t.theta, t.delta, t.tau);

    LocalHarness h(fed.active, fed.passive, s);
    const auto report = h.report(h.matrices(), t);
    std::set<std::pair<int, std::size_t>> overlap;
    for (const auto& f : report.active_overlap) overlap.insert({f.party_id, f.feature});
    std::set<std::pair<std::pair<int, std::size_t>, std::pair<int, std::size_t>>> pairs;
    for (const auto& p : report.cross_pairs) {
      pairs.insert({{p.first.party_id, p.first.feature}, {p.second.party_id, p.second.feature}});
      EXPECT_GT(std::abs(p.rho), t.tau);
    }
    EXPECT_EQ(overlap, expected.overlap) << ::vflrps::testing::case_label(s);
    EXPECT_EQ(pairs, expected.pairs) << ::vflrps::testing::case_label(s);
  }
}

TEST(RedundancyReport, AffineCopyAcrossPartiesIsConfirmed) {
  Gen g(11);
  const auto a = g.normals(300);
  const auto x = g.normals(300);
  std::vector<double> y(300);
  std::vector<double> affine(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = a[i] + x[i] + 0.3 * g.normal();
    affine[i] = 2 * x[i] + 1;
  }
  LocalHarness h(make_party(0, {a}, y), {make_party(1, {x}), make_party(2, {g.normals(300), affine})}, 5);
  const auto report = h.report(h.matrices(), {});
  ASSERT_EQ(report.cross_pairs.size(), 1u);
  EXPECT_EQ(report.cross_pairs[0].first, (FeatureRef{1, 0}));
  EXPECT_EQ(report.cross_pairs[0].second, (FeatureRef{2, 1}));
  EXPECT_NEAR(report.cross_pairs[0].rho, 1.0, 1e-9);
  EXPECT_TRUE(report.active_overlap.empty());
}

TEST(RedundancyReport, PairConfirmationOnlyReturnsRho) {
  Gen g(12);
  const auto x = g.normals(100);
  LocalHarness h(make_party(0, {g.normals(100)}, g.normals(100)), {make_party(1, {x}), make_party(2, {x})}, 5);
  const auto& peers = h.peers();
  EXPECT_NEAR(h.active().correlate_passive_pair(peers[0], 0, peers[1], 0).rho, 1.0, 1e-9);
  EXPECT_TRUE(h.active().confirm_redundancy(peers[0], 0, peers[1], 0, 0.95).has_value());
}

TEST(Hello, MismatchedSamplesOrDigestIsAlignmentError) {
  Gen g(1);
  InProcNetwork network;
  auto passive = make_party(1, {g.normals(10)});
  PassiveNode node(passive, passive, network, {1, "abc"});
  network.serve("p1", node.handler());
  ActiveParty wrong_n(make_party(0, {g.normals(11)}, g.normals(11)), network, {});
  EXPECT_EQ(code_of([&] { wrong_n.hello(1, "p1", "abc"); }), ErrorCode::kAlignmentError);
  ActiveParty right_n(make_party(0, {g.normals(10)}, g.normals(10)), network, {});
  EXPECT_EQ(code_of([&] { right_n.hello(1, "p1", "xyz"); }), ErrorCode::kAlignmentError);
  EXPECT_EQ(code_of([&] { right_n.hello(2, "p1", "abc"); }), ErrorCode::kAlignmentError);
  EXPECT_EQ(right_n.hello(1, "p1", "abc").features, 1u);
}

TEST(PartyDataset, ValidateRejectsBadShapes) {
  auto p = make_party(1, {{1, 2, 3}, {1, 2}});
  EXPECT_EQ(code_of([&] { p.validate(); }), ErrorCode::kAlignmentError);
  auto q = make_party(1, {{1, 2}, {1, 2}});
  q.feature_names[1] = q.feature_names[0];
  EXPECT_EQ(code_of([&] { q.validate(); }), ErrorCode::kInvalidInput);
  auto r = make_party(1, {{1, std::nan("")}});
  EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::kInvalidInput);
}

TEST(Thresholds, ValidateRejectsOutOfRange) {
  EXPECT_EQ(code_of([] { Thresholds{1.5, 0.5, 0.9}.validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { Thresholds{0.9, -0.1, 0.9}.validate(); }), ErrorCode::kInvalidConfig);
}

}  // namespace
}  // namespace vflrps
