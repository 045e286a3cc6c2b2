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

// Structural entropy of a weighted graph under a coding tree, in bits:
//
//   H = - sum over non-root a of  (g_a / vol(G)) * log2(vol(a) / vol(parent(a)))
//
// where g_a is the weight of edges leaving the leaf set of a. Two routes are
// provided: a full recomputation that rebuilds vol and g from the graph
// alone, and O(1) deltas for join/trim that read the tree's ledger.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "entropic_trees/coding_tree.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/propagation.hpp"

namespace etrees {

// Pairwise (cascade) summation; error grows with log n instead of n.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

// One summand of the entropy. Zero whenever the cut is zero, even for a
// degenerate volume ratio.
inline double entropy_term(double cut, double vol, double parent_vol, double graph_vol) {
  if (cut == 0.0) return 0.0;
  return -(cut / graph_vol) * std::log2(vol / parent_vol);
}

struct NodeTerm {
  NodeId node = kNoNode;
  double vol = 0.0;
  double cut = 0.0;
  double term = 0.0;
};

struct EntropyReport {
  double entropy = 0.0;
  double graph_volume = 0.0;
  std::vector<NodeTerm> terms;  // non-root nodes in pre-order
};

// Full recomputation from the graph. Ignores the tree's ledger entirely:
// volumes are summed from leaf degrees and every edge adds its weight to each
// tree node on the two paths from its endpoints up to (excluding) their
// lowest common ancestor.
inline EntropyReport entropy_report(const PropagationTree& graph, const CodingTree& tree) {
  require(tree.num_leaves() == graph.size(), "coding tree has ", tree.num_leaves(),
          " leaves but graph has ", graph.size(), " nodes");
  const auto order = tree.preorder();
  std::vector<NodeId> leaf_of(graph.size(), kNoNode);
  for (NodeId v : order) {
    const TreeNode& n = tree.node(v);
    if (!n.is_leaf()) continue;
    require(*n.leaf < graph.size() && leaf_of[*n.leaf] == kNoNode, "leaf set does not match graph");
    leaf_of[*n.leaf] = v;
  }
  for (NodeId v : leaf_of) require(v != kNoNode, "leaf set does not match graph");

  double graph_vol = 0.0;
  for (double d : graph.degree) graph_vol += d;
  require(graph_vol > 0.0, "structural entropy is undefined for a graph without edges");

  std::vector<double> vol(tree.arena_size(), 0.0), cut(tree.arena_size(), 0.0);
  std::vector<int> depth(tree.arena_size(), 0);
  for (NodeId v : order)
    if (v != tree.root()) depth[v] = depth[tree.node(v).parent] + 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const TreeNode& n = tree.node(*it);
    if (n.is_leaf()) vol[*it] = graph.degree[*n.leaf];
    if (n.parent != kNoNode) vol[n.parent] += vol[*it];
  }
  for (const Edge& e : graph.edges) {
    NodeId a = leaf_of[e.parent], b = leaf_of[e.child];
    while (a != b) {
      if (depth[a] >= depth[b]) {
        cut[a] += e.weight;
        a = tree.node(a).parent;
      } else {
        cut[b] += e.weight;
        b = tree.node(b).parent;
      }
    }
  }

  EntropyReport report;
  report.graph_volume = graph_vol;
  std::vector<double> summands;
  for (NodeId v : order) {
    if (v == tree.root()) continue;
    const double t = entropy_term(cut[v], vol[v], vol[tree.node(v).parent], graph_vol);
    report.terms.push_back({v, vol[v], cut[v], t});
    summands.push_back(t);
  }
  report.entropy = pairwise_sum(summands);
  return report;
}

inline double structural_entropy(const PropagationTree& graph, const CodingTree& tree) {
  return entropy_report(graph, tree).entropy;
}

// Entropy from the tree's incrementally maintained ledger.
inline double ledger_entropy(const CodingTree& tree) {
  require(tree.graph_volume() > 0.0, "structural entropy is undefined for a graph without edges");
  std::vector<double> summands;
  for (NodeId v : tree.preorder()) {
    if (v == tree.root()) continue;
    const TreeNode& n = tree.node(v);
    summands.push_back(entropy_term(n.cut, n.vol, tree.node(n.parent).vol, tree.graph_volume()));
  }
  return pairwise_sum(summands);
}

// Total edge weight between the leaf sets of two disjoint tree nodes.
inline double cross_weight(const PropagationTree& graph, const CodingTree& tree, NodeId a, NodeId b) {
  std::vector<int> side(graph.size(), 0);
  auto mark = [&](NodeId top, int tag) {
    std::vector<NodeId> stack{top};
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      const TreeNode& n = tree.node(v);
      if (n.is_leaf()) side[*n.leaf] = tag;
      for (NodeId c = n.first_child; c != kNoNode; c = tree.node(c).next_sibling) stack.push_back(c);
    }
  };
  mark(a, 1);
  mark(b, 2);
  double w = 0.0;
  for (const Edge& e : graph.edges)
    if (side[e.parent] + side[e.child] == 3) w += e.weight;
  return w;
}

// H(T) - H(T.join(a, b)) for two root children whose leaf sets share
// `cross` weight. Only the terms of a, b and the new node change; the
// difference collapses to  -(2 cross / vol(G)) log2((vol a + vol b) / vol(G)),
// which is never negative.
inline double delta_join(const CodingTree& tree, NodeId a, NodeId b, double cross) {
  require(a != b && tree.alive(a) && tree.alive(b) && tree.node(a).parent == tree.root() &&
              tree.node(b).parent == tree.root(),
          "delta_join needs two distinct children of the root");
  const double vg = tree.graph_volume();
  const double vroot = tree.node(tree.root()).vol;
  const TreeNode& na = tree.node(a);
  const TreeNode& nb = tree.node(b);
  const double vbeta = na.vol + nb.vol;
  if (cross == 0.0) return 0.0;
  return -(2.0 * cross / vg) * std::log2(vbeta / vroot);
}

inline double delta_join(const CodingTree& tree, const PropagationTree& graph, NodeId a, NodeId b) {
  return delta_join(tree, a, b, cross_weight(graph, tree, a, b));
}

// H(T.trim(beta)) - H(T). Removing beta drops its own term and re-parents
// its children to beta's parent; summing those changes leaves
//   (sum g_children - g_beta) / vol(G) * log2(vol(parent) / vol(beta)),
// and sum g_children - g_beta is twice beta's internal edge weight.
inline double delta_trim(const CodingTree& tree, NodeId beta) {
  require(tree.is_internal(beta), "delta_trim needs an internal node (neither root nor leaf)");
  const TreeNode& n = tree.node(beta);
  if (n.internal == 0.0) return 0.0;
  const double vparent = tree.node(n.parent).vol;
  return (2.0 * n.internal / tree.graph_volume()) * std::log2(vparent / n.vol);
}

}  // namespace etrees
