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

#include "entropic_trees/coding_tree.hpp"

#include <gtest/gtest.h>

#include <random>

#include "entropic_trees/entropy.hpp"
#include "test_support.hpp"

namespace etrees {
namespace {

using testing::path_graph;
using testing::random_tree;

std::vector<NodeId> sorted(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

TEST(CodingTree, StarShape) {
  const auto g = path_graph(4);
  const auto t = CodingTree::star(g);
  EXPECT_EQ(t.height(), 1);
  EXPECT_EQ(t.children(t.root()), (std::vector<NodeId>{0, 1, 2, 3}));
  EXPECT_FALSE(t.check_invariants().has_value());
  EXPECT_TRUE(t.leaves_at_depth(1));
}

TEST(Join, ThreeChildren) {
  const auto g = path_graph(3);
  auto t = CodingTree::star(g);
  const NodeId beta = t.join(0, 1, 1.0);
  EXPECT_EQ(t.children(t.root()), (std::vector<NodeId>{beta, 2}));
  EXPECT_EQ(t.children(beta), (std::vector<NodeId>{0, 1}));
  EXPECT_EQ(t.node(beta).vol, t.node(0).vol + t.node(1).vol);
  EXPECT_EQ(t.height(), 2);
  EXPECT_FALSE(t.check_invariants().has_value());
}

TEST(Join, Errors) {
  const auto g = path_graph(4);
  auto t = CodingTree::star(g);
  EXPECT_THROW(t.join(1, 1, 0.0), Error);
  const NodeId beta = t.join(0, 1, 1.0);
  EXPECT_THROW(t.join(0, 2, 0.0), Error);
  EXPECT_THROW(t.join(beta, t.root(), 0.0), Error);
}

TEST(Join, ThenTrimRestoresChildSet) {
  const auto g = path_graph(5);
  auto t = CodingTree::star(g);
  const auto before = sorted(t.children(t.root()));
  const NodeId beta = t.join(1, 3, 0.0);
  t.trim(beta);
  EXPECT_EQ(sorted(t.children(t.root())), before);
  EXPECT_FALSE(t.alive(beta));
  EXPECT_EQ(t.height(), 1);
}

TEST(Trim, ParentGainsGrandchildrenInOrder) {
  // root(0) -> {x(1), beta(2), y(6)}, beta -> {a(3), b(4), c(5)}
  const auto g = path_graph(5);
  std::vector<NodeSpec> ordered = {{kNoNode, std::nullopt}, {0, 0}, {0, std::nullopt}, {2, 1},
                                   {2, 2}, {2, 3}, {0, 4}};
  auto t = CodingTree::from_structure(g, ordered);
  ASSERT_EQ(t.children(0), (std::vector<NodeId>{1, 2, 6}));
  t.trim(2);
  EXPECT_EQ(t.children(0), (std::vector<NodeId>{1, 3, 4, 5, 6}));
  EXPECT_EQ(t.height(), 1);
  EXPECT_FALSE(t.check_invariants().has_value());
}

TEST(Trim, SingleChildIsPromoted) {
  const auto g = path_graph(3);
  auto t = CodingTree::star(g);
  const NodeId beta = t.pad(1);
  EXPECT_EQ(t.height(), 2);
  t.trim(beta);
  EXPECT_EQ(t.node(1).parent, t.root());
  EXPECT_EQ(t.height(), 1);
}

TEST(Trim, Errors) {
  const auto g = path_graph(3);
  auto t = CodingTree::star(g);
  EXPECT_THROW(t.trim(t.root()), Error);
  EXPECT_THROW(t.trim(0), Error);
}

TEST(Pad, DeepensByOne) {
  const auto g = path_graph(4);
  auto t = CodingTree::star(g);
  const NodeId b1 = t.join(0, 1, 1.0);
  const NodeId b2 = t.join(b1, 2, 1.0);
  (void)b2;
  // leaf 3 sits at depth 1 = K - 2 for K = 3
  auto depth = t.depths();
  ASSERT_EQ(depth[3], 1);
  const NodeId p = t.pad(3);
  depth = t.depths();
  EXPECT_EQ(depth[3], 2);
  EXPECT_EQ(t.node(p).vol, t.node(3).vol);
  EXPECT_EQ(t.node(p).cut, t.node(3).cut);
  EXPECT_FALSE(t.check_invariants().has_value());
}

TEST(Pad, ThenTrimIsIdentity) {
  std::mt19937_64 rng(2);
  const auto g = random_tree(10, rng);
  auto t = CodingTree::star(g);
  t.join(0, 3, cross_weight(g, t, 0, 3));
  const auto before = coding_tree_to_json(t, g, 2).dump();
  const NodeId beta = t.pad(3);
  t.trim(beta);
  EXPECT_EQ(coding_tree_to_json(t, g, 2).dump(), before);
}

TEST(Pad, RejectsRoot) {
  const auto g = path_graph(3);
  auto t = CodingTree::star(g);
  EXPECT_THROW(t.pad(t.root()), Error);
}

TEST(CodingTree, RandomOperationSequencesKeepInvariants) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_tree(2 + rng() % 25, rng);
    auto t = CodingTree::star(g);
    for (int step = 0; step < 50; ++step) {
      const auto kids = t.children(t.root());
      const int op = static_cast<int>(rng() % 3);
      std::vector<NodeId> nonroot;
      for (NodeId v : t.preorder())
        if (v != t.root()) nonroot.push_back(v);
      if (op == 0 && kids.size() >= 2) {
        const NodeId a = kids[rng() % kids.size()];
        NodeId b = kids[rng() % kids.size()];
        if (a == b) continue;
        t.join(a, b, cross_weight(g, t, a, b));
      } else if (op == 1) {
        const NodeId v = nonroot[rng() % nonroot.size()];
        if (t.is_internal(v)) t.trim(v);
      } else {
        t.pad(nonroot[rng() % nonroot.size()]);
      }
      const auto problem = t.check_invariants();
      ASSERT_FALSE(problem.has_value()) << *problem;
    }
  }
}

TEST(CodingTreeJson, RoundTripPreservesStructureAndLedger) {
  std::mt19937_64 rng(4);
  const auto g = random_tree(15, rng);
  auto t = CodingTree::star(g);
  t.join(1, 2, cross_weight(g, t, 1, 2));
  t.join(3, 4, cross_weight(g, t, 3, 4));
  t.pad(5);
  const auto j = coding_tree_to_json(t, g, 3);
  const auto loaded = coding_tree_from_json(j, g);
  EXPECT_EQ(loaded.k, 3);
  EXPECT_EQ(coding_tree_to_json(loaded.tree, g, 3).dump(), j.dump());
  EXPECT_NEAR(ledger_entropy(loaded.tree), ledger_entropy(t), 1e-12);
}

TEST(CodingTreeJson, RejectsBrokenTrees) {
  const auto g = path_graph(2);
  using nlohmann::json;
  // leaf missing for n1
  EXPECT_THROW(coding_tree_from_json(json::parse(R"({"K":1,"nodes":[{"id":0,"parent":null,"height":1,"leaf_post":null},{"id":1,"parent":0,"height":0,"leaf_post":"n0"}]})"), g), Error);
  // unknown post
  EXPECT_THROW(coding_tree_from_json(json::parse(R"({"K":1,"nodes":[{"id":0,"parent":null,"height":1,"leaf_post":null},{"id":1,"parent":0,"height":0,"leaf_post":"zz"}]})"), g), Error);
  // internal node without children
  EXPECT_THROW(coding_tree_from_json(json::parse(R"({"K":1,"nodes":[{"id":0,"parent":null,"leaf_post":null},{"id":1,"parent":0,"leaf_post":"n0"},{"id":2,"parent":0,"leaf_post":"n1"},{"id":3,"parent":0,"leaf_post":null}]})"), g), Error);
}

}  // namespace
}  // namespace etrees
