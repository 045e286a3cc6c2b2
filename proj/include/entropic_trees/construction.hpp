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

// Greedy coding-tree construction to a fixed height K, in three phases:
//
//   expansion    join the pair of root children with the largest entropy
//                decrease until the root has two children;
//   compression  trim the internal node with the smallest entropy increase
//                until the height is at most K;
//   alignment    pad nodes until every leaf sits at depth exactly K.
//
// Ties are broken by the smallest node id (pairs lexicographically).

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "entropic_trees/coding_tree.hpp"
#include "entropic_trees/entropy.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/propagation.hpp"

namespace etrees {

enum class StepKind { Join, Trim, Pad };

struct BuildStep {
  StepKind kind = StepKind::Join;
  NodeId node = kNoNode;   // new node for join/pad, removed node for trim
  NodeId first = kNoNode;  // join: first argument; pad: padded node
  NodeId second = kNoNode; // join: second argument
  double entropy_change = 0.0;  // H(after) - H(before), from the ledger
};

struct BuildOptions {
  // Called after every edit with the updated tree. Node heights are not
  // kept current during compression; they are recomputed once it ends.
  std::function<void(const CodingTree&, const BuildStep&)> on_step;
  // Recompute the entropy from scratch after every step and throw if the
  // ledger's running value drifts by more than `verify_tolerance`.
  bool verify_full = false;
  double verify_tolerance = 1e-9;
};

struct BuildStats {
  std::size_t joins = 0;
  std::size_t trims = 0;
  std::size_t pads = 0;
  int height_after_expansion = 0;
  double entropy_after_expansion = 0.0;
  double entropy_after_compression = 0.0;
  double entropy = 0.0;
};

struct BuildResult {
  CodingTree tree;
  BuildStats stats;
};

namespace detail {

class StepRecorder {
 public:
  StepRecorder(const PropagationTree& graph, const BuildOptions& opts, double start)
      : graph_(graph), opts_(opts), running_(start) {}

  void record(const CodingTree& tree, const BuildStep& step) {
    running_ += step.entropy_change;
    if (opts_.verify_full && !graph_.degenerate()) {
      const double full = structural_entropy(graph_, tree);
      require(std::abs(full - running_) <= opts_.verify_tolerance * std::max(1.0, std::abs(full)),
              "ledger entropy ", running_, " diverged from full recomputation ", full);
    }
    if (opts_.on_step) opts_.on_step(tree, step);
  }

  double running() const { return running_; }

 private:
  const PropagationTree& graph_;
  const BuildOptions& opts_;
  double running_;
};

// Deepest leaf under range decrements, for tracking the height while
// trimming. Leaves are indexed by their pre-order position, which trims
// preserve.
class LeafDepthMax {
 public:
  explicit LeafDepthMax(const std::vector<int>& depth) : size_(1) {
    while (size_ < depth.size()) size_ *= 2;
    max_.assign(2 * size_, std::numeric_limits<int>::min() / 2);
    add_.assign(2 * size_, 0);
    for (std::size_t i = 0; i < depth.size(); ++i) max_[size_ + i] = depth[i];
    for (std::size_t i = size_ - 1; i >= 1; --i) max_[i] = std::max(max_[2 * i], max_[2 * i + 1]);
  }

  void add(std::size_t lo, std::size_t hi, int delta) { add(1, 0, size_, lo, hi, delta); }
  int max() const { return max_[1]; }

 private:
  void add(std::size_t v, std::size_t l, std::size_t r, std::size_t lo, std::size_t hi, int delta) {
    if (hi <= l || r <= lo) return;
    if (lo <= l && r <= hi) {
      max_[v] += delta;
      add_[v] += delta;
      return;
    }
    const std::size_t m = (l + r) / 2;
    add(2 * v, l, m, lo, hi, delta);
    add(2 * v + 1, m, r, lo, hi, delta);
    max_[v] = std::max(max_[2 * v], max_[2 * v + 1]) + add_[v];
  }

  std::size_t size_;
  std::vector<int> max_, add_;
};

// Pads nodes until every leaf is at depth k. The root is treated as having
// height k even when the tree is shorter.
template <typename OnPad>
void align_depths(CodingTree& tree, int k, OnPad&& on_pad) {
  std::vector<std::pair<NodeId, int>> stack{{tree.root(), k}};
  while (!stack.empty()) {
    auto [v, slot] = stack.back();
    stack.pop_back();
    for (NodeId c : tree.children(v)) {
      NodeId top = c;
      while (tree.node(top).height < slot - 1) {
        const NodeId beta = tree.pad(top);
        on_pad(beta, top);
        top = beta;
      }
      if (!tree.node(c).is_leaf()) stack.emplace_back(c, tree.node(c).height);
    }
  }
}

// Min-heap of node keys with in-place updates, so each node has at most one
// entry. Ties break on the smaller node id.
class NodeHeap {
 public:
  explicit NodeHeap(std::size_t capacity) : pos_(capacity, kAbsent) {}

  bool empty() const { return items_.empty(); }
  NodeId top() const { return items_.front().node; }
  double top_key() const { return items_.front().key; }

  void set(NodeId v, double key) {
    if (pos_[v] == kAbsent) {
      pos_[v] = items_.size();
      items_.push_back({key, v});
      sift_up(pos_[v]);
      return;
    }
    const std::size_t i = pos_[v];
    const Item old = items_[i];
    items_[i].key = key;
    if (before(items_[i], old))
      sift_up(i);
    else
      sift_down(i);
  }

  void erase(NodeId v) {
    const std::size_t i = pos_[v];
    if (i == kAbsent) return;
    pos_[v] = kAbsent;
    const Item last = items_.back();
    items_.pop_back();
    if (i == items_.size()) return;
    place(i, last);
    if (i > 0 && before(last, items_[(i - 1) / 2]))
      sift_up(i);
    else
      sift_down(i);
  }

 private:
  struct Item {
    double key;
    NodeId node;
  };
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  static bool before(const Item& x, const Item& y) {
    if (x.key != y.key) return x.key < y.key;
    return x.node < y.node;
  }
  void place(std::size_t i, const Item& x) {
    items_[i] = x;
    pos_[x.node] = i;
  }
  void sift_up(std::size_t i) {
    const Item x = items_[i];
    while (i > 0) {
      const std::size_t p = (i - 1) / 2;
      if (!before(x, items_[p])) break;
      place(i, items_[p]);
      i = p;
    }
    place(i, x);
  }
  void sift_down(std::size_t i) {
    const Item x = items_[i];
    const std::size_t n = items_.size();
    for (;;) {
      std::size_t c = 2 * i + 1;
      if (c >= n) break;
      if (c + 1 < n && before(items_[c + 1], items_[c])) ++c;
      if (!before(items_[c], x)) break;
      place(i, items_[c]);
      i = c;
    }
    place(i, x);
  }

  std::vector<Item> items_;
  std::vector<std::size_t> pos_;
};

}  // namespace detail

// Pads every node whose parent sits more than one level above it so that all
// leaves end at depth k. Requires height() <= k.
inline std::size_t align_leaf_depths(CodingTree& tree, int k) {
  require(tree.height() <= k, "tree of height ", tree.height(), " cannot be aligned to ", k);
  std::size_t pads = 0;
  detail::align_depths(tree, k, [&](NodeId, NodeId) { ++pads; });
  return pads;
}

inline BuildResult build_coding_tree(const PropagationTree& graph, int k, const BuildOptions& opts = {}) {
  require(k >= 1, "coding tree height K must be >= 1, got ", k);
  BuildResult result{CodingTree::star(graph), {}};
  CodingTree& tree = result.tree;
  BuildStats& stats = result.stats;

  // A reply-less claim has no edges: skip the search, pad, entropy 0.
  if (graph.degenerate()) {
    stats.height_after_expansion = tree.height();
    stats.pads = align_leaf_depths(tree, k);
    return result;
  }

  detail::StepRecorder recorder(graph, opts, ledger_entropy(tree));
  const std::size_t n = graph.size();

  // ---- expansion -------------------------------------------------------
  // Clusters are tracked by stable handles (the surviving leaf id of a
  // small-to-large merge). The graph is a tree and clusters stay connected,
  // so two clusters share at most one edge and its weight is their cross
  // weight. Each cluster lists the far ends of its boundary edges, resolved
  // through the handles when read. A heap entry's delta only goes stale
  // downward (volumes grow); stale entries are re-evaluated when they
  // surface.
  struct JoinCandidate {
    double delta;
    double cross;
    NodeId a, b;    // tree nodes at push time, a < b
    NodeId ha, hb;  // cluster handles
  };
  auto join_less = [](const JoinCandidate& x, const JoinCandidate& y) {
    if (x.delta != y.delta) return x.delta < y.delta;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  };
  std::priority_queue<JoinCandidate, std::vector<JoinCandidate>, decltype(join_less)> joins(join_less);
  std::vector<std::vector<std::pair<NodeId, double>>> adj(n);  // far endpoint, weight
  std::vector<NodeId> forward(n), node_of(n);
  for (NodeId h = 0; h < n; ++h) forward[h] = node_of[h] = h;
  auto find = [&](NodeId h) {
    NodeId r = h;
    while (forward[r] != r) r = forward[r];
    while (forward[h] != r) h = std::exchange(forward[h], r);
    return r;
  };
  for (const Edge& e : graph.edges) {
    adj[e.parent].emplace_back(static_cast<NodeId>(e.child), e.weight);
    adj[e.child].emplace_back(static_cast<NodeId>(e.parent), e.weight);
  }
  auto push_pair = [&](NodeId ha, NodeId hb, double cross) {
    NodeId a = node_of[ha], b = node_of[hb];
    if (a > b) {
      std::swap(a, b);
      std::swap(ha, hb);
    }
    joins.push({delta_join(tree, a, b, cross), cross, a, b, ha, hb});
  };
  for (const Edge& e : graph.edges)
    push_pair(static_cast<NodeId>(e.parent), static_cast<NodeId>(e.child), e.weight);

  while (tree.node(tree.root()).num_children > 2) {
    NodeId ha = kNoNode, hb = kNoNode;
    double cross = 0.0, delta = 0.0;
    while (!joins.empty()) {
      const JoinCandidate top = joins.top();
      joins.pop();
      const NodeId ca = find(top.ha), cb = find(top.hb);
      if (ca == cb) continue;
      const double w = top.cross;
      if (ca == top.ha && cb == top.hb && node_of[ca] == top.a && node_of[cb] == top.b &&
          delta_join(tree, top.a, top.b, w) == top.delta) {
        ha = ca;
        hb = cb;
        delta = top.delta;
        cross = w;
        break;
      }
      push_pair(ca, cb, w);
    }
    if (ha == kNoNode) {
      // No connected pair left (disconnected input): every delta is 0, so
      // the smallest pair of ids wins.
      auto kids = tree.children(tree.root());
      std::sort(kids.begin(), kids.end());
      for (NodeId h = 0; h < n && (ha == kNoNode || hb == kNoNode); ++h) {
        if (find(h) != h) continue;
        if (node_of[h] == kids[0]) ha = h;
        if (node_of[h] == kids[1]) hb = h;
      }
      cross = 0.0;
      delta = 0.0;
    }
    const NodeId a = node_of[ha], b = node_of[hb];
    const NodeId beta = tree.join(a, b, cross);
    ++stats.joins;
    // append the shorter edge list to the longer; edges that became
    // internal resolve to `keep` and are skipped from then on
    NodeId keep = ha, gone = hb;
    if (adj[keep].size() < adj[gone].size()) std::swap(keep, gone);
    forward[gone] = keep;
    node_of[keep] = beta;
    // pairs that changed handle need a fresh entry
    for (const auto& [far, w] : adj[gone]) {
      const NodeId nb = find(far);
      if (nb == keep) continue;
      push_pair(keep, nb, w);
      adj[keep].emplace_back(far, w);
    }
    std::vector<std::pair<NodeId, double>>().swap(adj[gone]);
    recorder.record(tree, {StepKind::Join, beta, std::min(a, b), std::max(a, b), -delta});
  }
  adj.clear();
  adj.shrink_to_fit();
  stats.height_after_expansion = tree.height();
  stats.entropy_after_expansion = recorder.running();

  // ---- compression -----------------------------------------------------
  if (tree.height() > k) {
    detail::NodeHeap trims(tree.arena_size());
    auto push_node = [&](NodeId v) {
      if (tree.is_internal(v)) trims.set(v, delta_trim(tree, v));
    };

    // leaf range of every node in pre-order, plus leaf depths
    std::vector<std::size_t> lo(tree.arena_size()), hi(tree.arena_size());
    std::vector<int> leaf_depth;
    {
      const auto depth = tree.depths();
      const auto order = tree.preorder();
      for (NodeId v : order) {
        lo[v] = leaf_depth.size();
        if (tree.node(v).is_leaf()) leaf_depth.push_back(depth[v]);
      }
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const TreeNode& node = tree.node(*it);
        hi[*it] = node.is_leaf() ? lo[*it] + 1 : hi[node.last_child];
      }
      for (NodeId v : order) push_node(v);
    }
    detail::LeafDepthMax deepest(leaf_depth);

    const std::size_t budget = 2 * n;
    while (deepest.max() > k) {
      require(!trims.empty(), "compression ran out of internal nodes");
      const NodeId beta = trims.top();
      const double delta = trims.top_key();
      trims.erase(beta);
      const NodeId parent = tree.node(beta).parent;
      const auto kids = tree.children(beta);
      tree.trim(beta, false);
      deepest.add(lo[beta], hi[beta], -1);
      ++stats.trims;
      require(stats.trims <= budget, "compression exceeded its step budget");
      for (NodeId c : kids) push_node(c);
      push_node(parent);
      recorder.record(tree, {StepKind::Trim, beta, kNoNode, kNoNode, delta});
    }
    tree.recompute_heights();
  }
  stats.entropy_after_compression = recorder.running();

  // ---- alignment -------------------------------------------------------
  detail::align_depths(tree, k, [&](NodeId beta, NodeId padded) {
    ++stats.pads;
    recorder.record(tree, {StepKind::Pad, beta, padded, kNoNode, 0.0});
  });
  stats.entropy = recorder.running();
  return result;
}

// Random height-k tree over the same leaves: uniformly random joins among
// root children, then uniformly random trims until the height fits, then
// alignment.
inline CodingTree build_random_coding_tree(const PropagationTree& graph, int k, std::uint64_t seed) {
  require(k >= 1, "coding tree height K must be >= 1, got ", k);
  std::mt19937_64 rng(seed);
  CodingTree tree = CodingTree::star(graph);
  while (tree.node(tree.root()).num_children > 2) {
    auto kids = tree.children(tree.root());
    std::uniform_int_distribution<std::size_t> pick(0, kids.size() - 1);
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    while (j == i) j = pick(rng);
    tree.join(kids[i], kids[j], cross_weight(graph, tree, kids[i], kids[j]));
  }
  while (tree.height() > k) {
    std::vector<NodeId> internal;
    for (NodeId v : tree.preorder())
      if (tree.is_internal(v)) internal.push_back(v);
    std::uniform_int_distribution<std::size_t> pick(0, internal.size() - 1);
    tree.trim(internal[pick(rng)]);
  }
  align_leaf_depths(tree, k);
  return tree;
}

// The propagation structure itself as a coding tree: every post with
// replies becomes an internal node holding its own leaf and its replies'
// subtrees. The result has height equal to the propagation depth; deeper
// trees than k are compressed greedily, shallower ones padded.
inline CodingTree build_identity_coding_tree(const PropagationTree& graph, int k) {
  require(k >= 1, "coding tree height K must be >= 1, got ", k);
  const std::size_t n = graph.size();
  std::vector<std::vector<std::size_t>> replies(n);
  for (const Edge& e : graph.edges) replies[e.parent].push_back(e.child);

  // leaves 0..n-1, then one group node per post that has replies
  std::vector<NodeSpec> specs(n);
  for (std::size_t i = 0; i < n; ++i) specs[i].leaf = i;
  std::vector<NodeId> group(n, kNoNode);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != 0 && replies[i].empty()) continue;
    group[i] = static_cast<NodeId>(specs.size());
    specs.push_back({});
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (group[i] == kNoNode) continue;
    specs[i].parent = group[i];
    for (std::size_t c : replies[i]) {
      const NodeId child_top = group[c] != kNoNode ? group[c] : static_cast<NodeId>(c);
      specs[child_top].parent = group[i];
    }
  }
  CodingTree tree = CodingTree::from_structure(graph, specs);

  if (tree.height() > k) {
    while (tree.height() > k) {
      NodeId best = kNoNode;
      double best_delta = 0.0;
      for (NodeId v : tree.preorder()) {
        if (!tree.is_internal(v)) continue;
        const double d = graph.degenerate() ? 0.0 : delta_trim(tree, v);
        if (best == kNoNode || d < best_delta || (d == best_delta && v < best)) {
          best = v;
          best_delta = d;
        }
      }
      tree.trim(best);
    }
  }
  align_leaf_depths(tree, k);
  return tree;
}

}  // namespace etrees
