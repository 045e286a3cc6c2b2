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

// Exhaustive minimum of the structural entropy over all coding trees of
// height K. Exponential; intended as a test oracle for small graphs.
//
// Unary nodes never change the entropy, so a height-K tree is equivalent to
// a nested sequence of partitions at most K deep. The search memoizes
// best(S, d): the cheapest subtree below a node with leaf set S given d
// remaining levels, over all partitions of S into two or more blocks.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "entropic_trees/coding_tree.hpp"
#include "entropic_trees/construction.hpp"
#include "entropic_trees/entropy.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/propagation.hpp"

namespace etrees {

inline constexpr std::size_t kBruteForceMaxNodes = 8;

struct BruteForceResult {
  CodingTree tree;
  double entropy = 0.0;
};

namespace detail {

class PartitionSearch {
 public:
  PartitionSearch(const PropagationTree& graph, int k) : graph_(graph), k_(k), n_(graph.size()) {
    const std::uint32_t full = (1u << n_);
    vol_.assign(full, 0.0);
    cut_.assign(full, 0.0);
    for (std::uint32_t s = 1; s < full; ++s) {
      for (std::size_t i = 0; i < n_; ++i)
        if (s & (1u << i)) vol_[s] += graph.degree[i];
      for (const Edge& e : graph.edges) {
        const bool in_p = s & (1u << e.parent), in_c = s & (1u << e.child);
        if (in_p != in_c) cut_[s] += e.weight;
      }
    }
    best_.assign(static_cast<std::size_t>(full) * (k + 1), std::numeric_limits<double>::quiet_NaN());
    choice_.assign(best_.size(), {});
  }

  double solve() { return best((1u << n_) - 1, k_); }

  // Rebuilds the optimal tree as a list of node specs (root first).
  std::vector<NodeSpec> structure() {
    std::vector<NodeSpec> specs;
    specs.push_back({});
    emit((1u << n_) - 1, k_, 0, specs);
    return specs;
  }

 private:
  double term(std::uint32_t block, std::uint32_t parent) const {
    return entropy_term(cut_[block], vol_[block], vol_[parent], graph_.total_volume);
  }

  double best(std::uint32_t s, int d) {
    if (std::popcount(s) == 1) return 0.0;
    if (d == 0) return std::numeric_limits<double>::infinity();
    double& memo = best_[idx(s, d)];
    if (!std::isnan(memo)) return memo;
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> best_blocks;
    std::vector<std::uint32_t> blocks;
    // Enumerate set partitions of s: the lowest remaining element opens a
    // block, which is completed by any subset of the remaining elements.
    enumerate(s, s, blocks, [&](const std::vector<std::uint32_t>& part) {
      if (part.size() < 2) return;
      double total = 0.0;
      for (std::uint32_t b : part) total += term(b, s) + best(b, d - 1);
      if (total < best_value) {
        best_value = total;
        best_blocks = part;
      }
    });
    best_[idx(s, d)] = best_value;
    choice_[idx(s, d)] = std::move(best_blocks);
    return best_value;
  }

  template <typename F>
  void enumerate(std::uint32_t whole, std::uint32_t rest, std::vector<std::uint32_t>& blocks, F&& visit) {
    if (rest == 0) {
      visit(blocks);
      return;
    }
    const std::uint32_t low = rest & (~rest + 1);
    const std::uint32_t others = rest & ~low;
    // iterate all subsets of `others`
    std::uint32_t sub = others;
    while (true) {
      blocks.push_back(low | sub);
      enumerate(whole, others & ~sub, blocks, visit);
      blocks.pop_back();
      if (sub == 0) break;
      sub = (sub - 1) & others;
    }
  }

  void emit(std::uint32_t s, int d, NodeId self, std::vector<NodeSpec>& specs) {
    if (std::popcount(s) == 1) {
      specs[self].leaf = static_cast<std::size_t>(std::countr_zero(s));
      return;
    }
    best(s, d);
    for (std::uint32_t b : choice_[idx(s, d)]) {
      const auto child = static_cast<NodeId>(specs.size());
      specs.push_back({self, std::nullopt});
      emit(b, d - 1, child, specs);
    }
  }

  std::size_t idx(std::uint32_t s, int d) const { return static_cast<std::size_t>(s) * (k_ + 1) + d; }

  const PropagationTree& graph_;
  int k_;
  std::size_t n_;
  std::vector<double> vol_, cut_;
  std::vector<double> best_;
  std::vector<std::vector<std::uint32_t>> choice_;
};

}  // namespace detail

inline BruteForceResult brute_force_optimal(const PropagationTree& graph, int k) {
  require(k >= 1, "coding tree height K must be >= 1, got ", k);
  require(graph.size() <= kBruteForceMaxNodes, "brute force refuses graphs with more than ",
          kBruteForceMaxNodes, " nodes (got ", graph.size(), ")");
  require(!graph.degenerate(), "brute force needs a graph with at least one edge");
  detail::PartitionSearch search(graph, k);
  const double h = search.solve();
  CodingTree tree = CodingTree::from_structure(graph, search.structure());
  align_leaf_depths(tree, k);
  return {std::move(tree), h};
}

}  // namespace etrees
