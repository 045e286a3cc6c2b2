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

#include "entropic_trees/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "test_support.hpp"

namespace etrees {
namespace {

TEST(Parallel, MapKeepsOrder) {
  std::vector<int> in(100);
  for (int i = 0; i < 100; ++i) in[i] = i;
  const auto out = parallel_map(in, [](int x) { return x * x; }, 4);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(out[i], i * i);
}

TEST(Parallel, RethrowsLowestIndexFailure) {
  try {
    parallel_for(50, [](std::size_t i) {
      if (i % 7 == 3) throw std::runtime_error(std::to_string(i));
    }, 4);
    FAIL() << "no exception";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "3");
  }
}

TEST(Synth, PairsShareShapeAndText) {
  SynthConfig sc;
  sc.threads = 20;
  sc.min_posts = 5;
  sc.max_posts = 9;
  const auto ts = generate_synth(sc);
  ASSERT_EQ(ts.size(), 20u);
  for (std::size_t i = 0; i < ts.size(); i += 2) {
    const auto& a = ts[i];
    const auto& b = ts[i + 1];
    EXPECT_EQ(a.label, Label::TR);
    EXPECT_EQ(b.label, Label::FR);
    EXPECT_EQ(a.event, b.event);
    EXPECT_FALSE(validate_thread(a).has_value());
    const auto ga = build_propagation_tree(a, {});
    const auto gb = build_propagation_tree(b, {});
    ASSERT_EQ(ga.size(), gb.size());
    std::multiset<std::string> ta, tb;
    for (const auto& p : a.posts) ta.insert(p.text);
    for (const auto& p : b.posts) tb.insert(p.text);
    EXPECT_EQ(ta, tb);
    EXPECT_EQ(tree_depth(ga), tree_depth(gb));
  }
}

TEST(Synth, DelayRates) {
  SynthConfig sc;
  sc.threads = 200;
  const auto ts = generate_synth(sc);
  double sum[2] = {0, 0};
  double count[2] = {0, 0};
  for (const auto& t : ts) {
    const int cls = t.label == Label::TR ? 0 : 1;
    const auto g = build_propagation_tree(t, {1e-12, true});
    for (const Edge& e : g.edges) {
      sum[cls] += e.weight;
      ++count[cls];
    }
  }
  EXPECT_NEAR(sum[0] / count[0], 1.0, 0.05);
  EXPECT_NEAR(sum[1] / count[1], 1.0 / 3.0, 0.02);
  EXPECT_EQ(generate_synth(sc)[17].posts[3].time, ts[17].posts[3].time);
}

TEST(Encode, RandomModeIsSeeded) {
  std::mt19937_64 rng(1);
  const auto g = testing::random_tree(30, rng);
  const auto a = encode_tree(g, 4, CodingMode::Random, 9);
  const auto b = encode_tree(g, 4, CodingMode::Random, 9);
  EXPECT_EQ(a.entropy, b.entropy);
  EXPECT_TRUE(a.tree.leaves_at_depth(4));
}

TEST(Encode, EveryModeAlignsToK) {
  std::mt19937_64 rng(2);
  for (int k : {5, 7})
    for (CodingMode m : {CodingMode::EntropyGreedy, CodingMode::Random, CodingMode::Identity})
      for (int i = 0; i < 5; ++i) {
        const auto g = testing::random_tree(2 + rng() % 40, rng);
        const auto e = encode_tree(g, k, m, i);
        EXPECT_TRUE(e.tree.leaves_at_depth(k)) << to_string(m) << " K=" << k;
        EXPECT_NEAR(e.entropy, structural_entropy(g, e.tree), 1e-9);
      }
}

TEST(Prepare, ZeroDeadlineKeepsOnlyTheClaim) {
  SynthConfig sc;
  sc.threads = 2;
  const auto ts = generate_synth(sc);
  PipelineConfig c;
  c.k = 3;
  const auto p = prepare_thread(ts[0], c, 0.0);
  EXPECT_EQ(p.texts.size(), 1u);
  EXPECT_EQ(p.tree.layer_size(0), 1u);
  EXPECT_EQ(prepare_thread(ts[0], c).texts.size(), ts[0].posts.size());
}

TEST(Aggregate, MeanOfFolds) {
  FoldResult a, b;
  a.metrics = compute_metrics({Label::TR, Label::FR}, {Label::TR, Label::TR});
  b.metrics = compute_metrics({Label::UR, Label::UR, Label::UR}, {Label::UR, Label::UR, Label::FR});
  const auto cv = aggregate_folds({a, b});
  // fold a: acc 1/2, F1 TR 2/3, FR 0; fold b: acc 2/3, F1 UR 0.8
  EXPECT_DOUBLE_EQ(cv.accuracy, (0.5 + 2.0 / 3.0) / 2.0);
  EXPECT_NEAR(cv.macro_f1, ((2.0 / 3.0) / 3.0 + 0.8 / 3.0) / 2.0, 1e-15);
}

TEST(Pipeline, LeaveOneEventOutRunsEveryEvent) {
  SynthConfig sc;
  sc.threads = 24;
  sc.events = 3;
  const auto ts = generate_synth(sc);
  PipelineConfig c;
  c.k = 3;
  c.d = 4;
  c.max_dims = 32;
  c.train.epochs = 2;
  const auto prepared = prepare_threads(ts, c);
  const auto cv = leave_one_event_out(prepared, c);
  ASSERT_EQ(cv.folds.size(), 3u);
  EXPECT_EQ(cv.folds[0].name, "synth-0");
  EXPECT_EQ(cv.folds[0].train_size, 16u);
  EXPECT_EQ(cv.folds[2].predictions.size(), 8u);
}

TEST(Config, JsonAndValidation) {
  PipelineConfig c;
  EXPECT_TRUE(config_to_json(c)["deadline"].is_null());
  c.deadline = 60;
  EXPECT_EQ(config_to_json(c)["deadline"], 60.0);
  EXPECT_EQ(config_to_json(c)["coding_mode"], "entropy_greedy");
  c.k = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_coding_mode("huffman"), Error);
  EXPECT_EQ(parse_split("fixed_files"), SplitMode::FixedFiles);
}

TEST(ThreadSeed, DependsOnIdNotOrder) {
  EXPECT_EQ(thread_seed(1, "abc"), thread_seed(1, "abc"));
  EXPECT_NE(thread_seed(1, "abc"), thread_seed(1, "abd"));
  EXPECT_NE(thread_seed(1, "abc"), thread_seed(2, "abc"));
}

TEST(Audit, CountsPostsAndLabels) {
  SynthConfig sc;
  sc.threads = 10;
  const auto ts = generate_synth(sc);
  const auto a = audit_threads(ts);
  std::size_t posts = 0;
  for (const auto& t : ts) posts += t.posts.size();
  EXPECT_EQ(a.claims, 10u);
  EXPECT_EQ(a.posts, posts);
  EXPECT_EQ(a.labels[0], 5u);
  EXPECT_EQ(a.labels[1], 5u);
  EXPECT_DOUBLE_EQ(a.avg_posts, static_cast<double>(posts) / 10.0);
  EXPECT_EQ(audit_threads({}).claims, 0u);
}

}  // namespace
}  // namespace etrees
