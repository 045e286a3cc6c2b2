/* Copyright 2026 The Entropic Trees Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "entropic_trees/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace etrees {
namespace {

TEST(Ecdf, SingleValue) {
  const auto e = ecdf({5.0});
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].x, 5.0);
  EXPECT_EQ(e[0].f, 1.0);
}

TEST(Ecdf, TiesCollapseToLastRank) {
  const auto e = ecdf({4.0, 2.0, 1.0, 2.0});
  ASSERT_EQ(e.size(), 3u);
  EXPECT_EQ(e[0].f, 0.25);
  EXPECT_EQ(e[1].x, 2.0);
  EXPECT_EQ(e[1].f, 0.75);
  EXPECT_EQ(e[2].f, 1.0);
}

TEST(Ecdf, Errors) {
  EXPECT_THROW(ecdf({}), Error);
  EXPECT_THROW(ecdf({1.0, NAN}), Error);
}

// Reference values from scipy.stats.anderson_ksamp (midrank).
TEST(AndersonDarling, MatchesReferenceWithTies) {
  const std::vector<std::vector<double>> labs = {
      {38.7, 41.5, 43.8, 44.5, 45.5, 46.0, 47.7, 58.0},
      {39.2, 39.3, 39.7, 41.4, 41.8, 42.9, 43.3, 45.8},
      {34.0, 35.0, 39.0, 40.0, 43.0, 43.0, 44.0, 45.0},
      {34.0, 34.8, 34.8, 35.4, 37.2, 37.8, 41.2, 42.8},
  };
  const auto r = anderson_darling_k(labs);
  EXPECT_NEAR(r.standardized, 4.479780627135335, 1e-12);
  const std::array<double, 7> crit = {0.49854918, 1.3236709, 1.91577682, 2.49304213, 3.24593219, 3.82285604, 5.12078789};
  for (std::size_t i = 0; i < crit.size(); ++i) EXPECT_NEAR(r.critical[i], crit[i], 1e-8);
  EXPECT_EQ(r.p_range, PRange::From0_1To0_5);
  EXPECT_EQ(to_string(r.p_range), "0.001<p<=0.005");
  EXPECT_NEAR(r.p_approx, 0.002225442310933593, 1e-12);
  EXPECT_TRUE(r.rejects(0.01));
  EXPECT_FALSE(r.rejects(0.001));
}

TEST(AndersonDarling, MatchesReferenceSmallSamples) {
  const auto two = anderson_darling_k({{1, 2, 2, 3, 5}, {2, 2, 4, 6, 6, 7}});
  EXPECT_NEAR(two.standardized, 0.9207976162206941, 1e-12);
  EXPECT_NEAR(two.p_approx, 0.13659795394615193, 1e-12);
  EXPECT_EQ(two.p_range, PRange::From10To25);
  const auto three = anderson_darling_k({{0.5, 1.5, 2.5, 3.5}, {1, 2, 3, 4}, {0.2, 0.9, 5, 7}});
  EXPECT_NEAR(three.standardized, -0.49497083550111826, 1e-12);
  EXPECT_EQ(three.p_range, PRange::Above25);
  EXPECT_EQ(three.p_approx, 0.25);
}

TEST(AndersonDarling, InvariantUnderMonotoneTransformAndPermutation) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e1(1.0), e3(3.0);
  std::vector<double> a(40), b(50);
  for (double& x : a) x = e1(rng);
  for (double& x : b) x = e3(rng);
  const auto base = anderson_darling_k({a, b});
  auto la = a, lb = b;
  for (double& x : la) x = std::log(x);
  for (double& x : lb) x = std::log(x);
  EXPECT_NEAR(anderson_darling_k({la, lb}).statistic, base.statistic, 1e-12);
  std::shuffle(a.begin(), a.end(), rng);
  EXPECT_NEAR(anderson_darling_k({b, a}).statistic, base.statistic, 1e-12);
}

TEST(AndersonDarling, IdenticalSamplesDoNotReject) {
  const std::vector<double> s = {1, 2, 3, 4, 5, 6, 7, 8};
  const auto r = anderson_darling_k({s, s, s});
  EXPECT_EQ(r.p_range, PRange::Above25);
}

TEST(AndersonDarling, Errors) {
  EXPECT_THROW(anderson_darling_k({{1, 2, 3}}), Error);
  EXPECT_THROW(anderson_darling_k({{1, 2, 3}, {}}), Error);
  EXPECT_THROW(anderson_darling_k({{1}, {2}}), Error);
  EXPECT_THROW(anderson_darling_k({{1, 1}, {1, 1}}), Error);
}

TEST(AndersonDarling, RoughCalibration) {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(1.0);
  int rejected = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> a(60), b(60);
    for (double& x : a) x = e(rng);
    for (double& x : b) x = e(rng);
    rejected += anderson_darling_k({a, b}).rejects(0.05);
  }
  EXPECT_GE(rejected, trials / 100);
  EXPECT_LE(rejected, trials / 10);
}

ThreadRecord thread(const std::string& id, const std::string& event, Label label, std::vector<double> times) {
  ThreadRecord t;
  t.thread_id = id;
  t.event = event;
  t.label = label;
  for (std::size_t i = 0; i < times.size(); ++i)
    t.posts.push_back({id + "-" + std::to_string(i), "text", times[i],
                       i == 0 ? std::nullopt : std::optional<std::string>(id + "-0")});
  return t;
}

TEST(AnalyzeEvent, GroupsDelaysByLabel) {
  const std::vector<ThreadRecord> ts = {
      thread("a", "e", Label::TR, {100, 101, 103}),
      thread("b", "e", Label::FR, {50, 60, 70, 80}),
      thread("c", "other", Label::UR, {0, 1}),
      thread("d", "e", Label::TR, {10, 9}),
  };
  const auto r = analyze_event(ts, "e");
  ASSERT_EQ(r.labels, (std::vector<Label>{Label::TR, Label::FR}));
  ASSERT_EQ(r.ecdfs[0].size(), 3u);  // {0, 1, 3}
  EXPECT_EQ(r.ecdfs[0][0].x, 0.0);
  EXPECT_EQ(r.ecdfs[1].back().x, 30.0);
  EXPECT_EQ(r.test.n, 6u);
  EXPECT_THROW(analyze_event(ts, "other"), Error);
  EXPECT_THROW(analyze_event(ts, "e", {Label::TR, Label::UR}), Error);
  EXPECT_EQ(analyze_event(ts, "e", {Label::FR, Label::TR}).labels.size(), 2u);
  EXPECT_EQ(delays_by_label(ts)[2].size(), 1u);
  EXPECT_THROW(analyze_event(ts, "missing"), Error);
}

}  // namespace
}  // namespace etrees
