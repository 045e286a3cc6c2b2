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

#include "entropic_trees/propagation.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <sstream>

namespace etrees {
namespace {

ThreadRecord chain_thread(std::vector<double> times) {
  ThreadRecord t;
  t.thread_id = "t";
  t.event = "e";
  t.label = Label::FR;
  for (std::size_t i = 0; i < times.size(); ++i) {
    Post p;
    p.id = "p" + std::to_string(i);
    p.text = "post " + std::to_string(i);
    p.time = times[i];
    if (i > 0) p.reply_to = "p" + std::to_string(i - 1);
    t.posts.push_back(p);
  }
  return t;
}

TEST(ParseThreads, OneClaimTwoReplies) {
  std::istringstream in(
      R"({"thread_id": "a", "event": "ev", "label": "TR", "posts": [)"
      R"({"id": "1", "text": "claim", "time": 10, "reply_to": null},)"
      R"({"id": "2", "text": "r1", "time": 20, "reply_to": "1"},)"
      R"({"id": "3", "text": "r2", "time": 15, "reply_to": "1"}]})"
      "\n");
  const ParseResult r = parse_threads(in);
  ASSERT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.threads.size(), 1u);
  const ThreadRecord& t = r.threads[0];
  EXPECT_EQ(t.posts.size(), 3u);
  EXPECT_EQ(t.label, Label::TR);
  // replies are ordered by time after the claim
  EXPECT_EQ(t.posts[0].id, "1");
  EXPECT_EQ(t.posts[1].id, "3");
  EXPECT_EQ(t.posts[2].id, "2");
}

TEST(ParseThreads, MissingParentRejectsThread) {
  std::istringstream in(
      R"({"thread_id": "a", "label": "FR", "posts": [{"id": "1", "time": 0, "reply_to": null},)"
      R"({"id": "2", "time": 1, "reply_to": "nope"}]})"
      "\n");
  const ParseResult r = parse_threads(in);
  EXPECT_TRUE(r.threads.empty());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].thread_id, "a");
  EXPECT_NE(r.diagnostics[0].message.find("unknown id"), std::string::npos);
}

TEST(ParseThreads, MalformedLineSkippedOthersKept) {
  std::istringstream in(
      "{not json\n"
      "\n"
      R"({"thread_id": "b", "label": "UR", "posts": [{"id": "1", "time": 0, "reply_to": null}]})"
      "\n"
      R"({"thread_id": "c", "label": "UR", "posts": [{"id": "1", "time": 0}, {"id": "1", "time": 1, "reply_to": "1"}]})"
      "\n");
  const ParseResult r = parse_threads(in);
  ASSERT_EQ(r.threads.size(), 1u);
  EXPECT_EQ(r.threads[0].thread_id, "b");
  ASSERT_EQ(r.diagnostics.size(), 2u);
  EXPECT_EQ(r.diagnostics[0].line, 1u);
  EXPECT_EQ(r.diagnostics[1].line, 4u);
  EXPECT_NE(r.diagnostics[1].message.find("duplicate"), std::string::npos);
}

TEST(ParseThreads, BadLabelAndIsoTimestamps) {
  std::istringstream in(
      R"({"thread_id": "x", "label": "MAYBE", "posts": [{"id": "1", "time": 0}]})"
      "\n"
      R"({"thread_id": "y", "label": "TR", "posts": [{"id": "1", "time": "2015-01-07T11:06:08Z"},)"
      R"({"id": "2", "time": "2015-01-07T12:06:08+01:00", "reply_to": "1"},)"
      R"({"id": "3", "time": "2015-01-07T11:07:08.5", "reply_to": "1"}]})"
      "\n");
  const ParseResult r = parse_threads(in);
  ASSERT_EQ(r.threads.size(), 1u);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  const auto& posts = r.threads[0].posts;
  EXPECT_DOUBLE_EQ(posts[0].time, 1420628768.0);
  EXPECT_EQ(posts[1].id, "2");  // +01:00 offset makes it simultaneous with the claim
  EXPECT_DOUBLE_EQ(posts[1].time, 1420628768.0);
  EXPECT_DOUBLE_EQ(posts[2].time, 1420628828.5);
}

TEST(ParseIso8601, RejectsGarbage) {
  EXPECT_FALSE(parse_iso8601("2015-13-07T11:06:08Z"));
  EXPECT_FALSE(parse_iso8601("yesterday"));
  EXPECT_FALSE(parse_iso8601("2015-01-07T11:06:08+0100"));
  EXPECT_EQ(*parse_iso8601("1970-01-01T00:00:00"), 0.0);
}

TEST(BuildPropagationTree, SingleReply) {
  const auto tree = build_propagation_tree(chain_thread({0, 100}));
  ASSERT_EQ(tree.edges.size(), 1u);
  EXPECT_EQ(tree.edges[0].weight, 100.0);
  EXPECT_EQ(tree.total_volume, 200.0);
}

TEST(BuildPropagationTree, SameTimestampClampsToMinWeight) {
  const auto tree = build_propagation_tree(chain_thread({5, 5}), {.min_weight = 1.0});
  EXPECT_EQ(tree.edges[0].weight, 1.0);
  EXPECT_EQ(tree.clamped_edges, 1u);
}

TEST(BuildPropagationTree, ThreeChainDegrees) {
  // hand evaluation: edges 10 and 30 give degrees 10, 10+30, 30
  const auto tree = build_propagation_tree(chain_thread({0, 10, 40}));
  EXPECT_EQ(tree.degree, (std::vector<double>{10, 40, 30}));
  EXPECT_EQ(tree.total_volume, 80.0);
}

TEST(BuildPropagationTree, UnweightedAblation) {
  const auto tree = build_propagation_tree(chain_thread({0, 10, 40}), {.weighted = false});
  EXPECT_EQ(tree.degree, (std::vector<double>{1, 2, 1}));
}

TEST(BuildPropagationTree, Errors) {
  auto t = chain_thread({0, 1});
  t.posts[1].time = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(build_propagation_tree(t), Error);
  EXPECT_THROW(build_propagation_tree(chain_thread({0, 1}), {.min_weight = 0.0}), Error);
}

TEST(BuildPropagationTree, SinglePostIsDegenerate) {
  const auto tree = build_propagation_tree(chain_thread({3}));
  EXPECT_TRUE(tree.degenerate());
  EXPECT_EQ(tree.total_volume, 0.0);
}

TEST(BuildPropagationTree, RandomInvariants) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    ThreadRecord t;
    t.thread_id = "r";
    t.label = Label::UR;
    double now = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Post p;
      p.id = "p" + std::to_string(i);
      now += std::exponential_distribution<double>(0.5)(rng);
      p.time = now;
      if (i > 0) p.reply_to = "p" + std::to_string(rng() % i);
      t.posts.push_back(p);
    }
    const auto tree = build_propagation_tree(t);
    ASSERT_EQ(tree.edges.size(), n - 1);
    double weights = 0.0;
    for (const Edge& e : tree.edges) {
      ASSERT_GT(e.weight, 0.0);
      weights += e.weight;
    }
    EXPECT_NEAR(tree.total_volume, 2.0 * weights, 1e-12 * std::max(1.0, tree.total_volume));
    // deterministic, byte-identical export
    EXPECT_EQ(tree_to_json(tree).dump(), tree_to_json(build_propagation_tree(t)).dump());
    const auto round = tree_from_json(tree_to_json(tree));
    EXPECT_EQ(round.degree, tree.degree);
  }
}

TEST(TreeFromJson, RejectsNonTrees) {
  using nlohmann::json;
  EXPECT_THROW(tree_from_json(json::parse(R"({"nodes":["a","b"],"edges":[]})")), Error);
  EXPECT_THROW(tree_from_json(json::parse(R"({"nodes":["a","b","c"],"edges":[[0,1,1],[0,1,2]]})")), Error);
  EXPECT_THROW(tree_from_json(json::parse(R"({"nodes":["a","b","c"],"edges":[[1,2,1],[2,1,1]]})")), Error);
  EXPECT_THROW(tree_from_json(json::parse(R"({"nodes":["a","b"],"edges":[[0,1,0]]})")), Error);
}

TEST(TimeCutoff, InfinityIsIdentityZeroKeepsClaim) {
  const auto t = chain_thread({0, 1, 2, 3});
  EXPECT_EQ(apply_time_cutoff(t, std::numeric_limits<double>::infinity()).posts.size(), 4u);
  const auto claim_only = apply_time_cutoff(t, 0.0);
  ASSERT_EQ(claim_only.posts.size(), 1u);
  EXPECT_EQ(claim_only.posts[0].id, "p0");
}

TEST(TimeCutoff, OrphanedDescendantsAreDropped) {
  // claim -> A(t=5) -> B(t=3): A misses the deadline, so B goes with it
  ThreadRecord t;
  t.thread_id = "skew";
  t.posts = {{"c", "", 0.0, std::nullopt}, {"B", "", 3.0, "A"}, {"A", "", 5.0, "c"}};
  const auto cut = apply_time_cutoff(t, 4.0);
  ASSERT_EQ(cut.posts.size(), 1u);
  EXPECT_EQ(cut.posts[0].id, "c");
  EXPECT_EQ(apply_time_cutoff(t, 5.0).posts.size(), 3u);
}

TEST(TreeDepth, Chain) {
  EXPECT_EQ(tree_depth(build_propagation_tree(chain_thread({0, 1, 2, 3}))), 3u);
  EXPECT_EQ(tree_depth(build_propagation_tree(chain_thread({0}))), 0u);
}

}  // namespace
}  // namespace etrees
