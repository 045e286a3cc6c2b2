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

// Coding trees: rooted hierarchies whose leaves biject with the nodes of a
// propagation tree. Nodes live in an arena; removed nodes stay in the arena
// marked dead so that NodeIds remain stable across edits.
//
// Every node carries the bookkeeping needed for incremental structural
// entropy:
//   vol       total weighted degree of the leaves below the node
//   cut       weight of graph edges leaving that leaf set
//   internal  weight of graph edges joining two *different* children
// The three satisfy cut(v) = sum cut(children) - 2 * internal(v).

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "entropic_trees/error.hpp"
#include "entropic_trees/propagation.hpp"
#include "json.hpp"

namespace etrees {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct TreeNode {
  NodeId parent = kNoNode;
  NodeId first_child = kNoNode;
  NodeId last_child = kNoNode;
  NodeId prev_sibling = kNoNode;
  NodeId next_sibling = kNoNode;
  std::uint32_t num_children = 0;
  int height = 0;
  bool alive = true;
  std::optional<std::uint32_t> leaf;  // graph node index, leaves only
  double vol = 0.0;
  double cut = 0.0;
  double internal = 0.0;

  bool is_leaf() const { return leaf.has_value(); }
};

// Structural description used to rebuild a tree (JSON import, brute force).
struct NodeSpec {
  NodeId parent = kNoNode;  // kNoNode for the root
  std::optional<std::size_t> leaf;
};

class CodingTree {
 public:
  CodingTree() = default;

  // Height-1 tree: a root whose children are one leaf per graph node. Leaf
  // ids equal graph node indices; the root is node `graph.size()`.
  static CodingTree star(const PropagationTree& graph) {
    require(graph.size() >= 1, "coding tree needs at least one graph node");
    CodingTree t;
    const std::size_t n = graph.size();
    t.graph_volume_ = graph.total_volume;
    t.num_leaves_ = n;
    t.nodes_.resize(n + 1);
    t.root_ = static_cast<NodeId>(n);
    double internal = 0.0;
    for (const Edge& e : graph.edges) internal += e.weight;
    TreeNode& root = t.nodes_[t.root_];
    root.vol = graph.total_volume;
    root.internal = internal;
    for (std::size_t i = 0; i < n; ++i) {
      TreeNode& leaf = t.nodes_[i];
      leaf.leaf = static_cast<std::uint32_t>(i);
      leaf.vol = graph.degree[i];
      leaf.cut = graph.degree[i];
      t.attach_before(t.root_, static_cast<NodeId>(i), kNoNode);
    }
    t.root_heights_[0] = static_cast<int>(n);
    t.refresh_root_height();
    return t;
  }

  // Rebuilds a tree from explicit parent links. Ledger values are derived
  // from the graph through lowest common ancestors of each edge.
  static CodingTree from_structure(const PropagationTree& graph, const std::vector<NodeSpec>& specs) {
    CodingTree t;
    t.graph_volume_ = graph.total_volume;
    t.num_leaves_ = graph.size();
    t.nodes_.resize(specs.size());
    std::size_t roots = 0;
    std::vector<bool> seen_leaf(graph.size(), false);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const NodeSpec& s = specs[i];
      if (s.parent == kNoNode) {
        ++roots;
        t.root_ = static_cast<NodeId>(i);
      } else {
        require(s.parent < specs.size() && s.parent != i, "coding tree node ", i, " has invalid parent");
      }
      if (s.leaf) {
        require(*s.leaf < graph.size(), "leaf payload ", *s.leaf, " out of range");
        require(!seen_leaf[*s.leaf], "graph node ", *s.leaf, " has two leaves");
        seen_leaf[*s.leaf] = true;
        t.nodes_[i].leaf = static_cast<std::uint32_t>(*s.leaf);
      }
    }
    require(roots == 1, "coding tree must have exactly one root");
    require(std::all_of(seen_leaf.begin(), seen_leaf.end(), [](bool b) { return b; }),
            "coding tree leaves do not cover the graph");
    for (std::size_t i = 0; i < specs.size(); ++i)
      if (specs[i].parent != kNoNode) t.attach_before(specs[i].parent, static_cast<NodeId>(i), kNoNode);

    // Post-order from the root; also detects cycles and unreachable nodes.
    const auto order = t.postorder();
    require(order.size() == specs.size(), "coding tree is not connected");
    std::vector<NodeId> leaf_of(graph.size(), kNoNode);
    for (NodeId v : order) {
      TreeNode& node = t.nodes_[v];
      require(node.is_leaf() == (node.num_children == 0),
              "node ", v, " must be a leaf exactly when it has no children");
      if (node.is_leaf()) {
        node.vol = graph.degree[*node.leaf];
        leaf_of[*node.leaf] = v;
        node.height = 0;
      } else {
        node.vol = 0.0;
        for (NodeId c = node.first_child; c != kNoNode; c = t.nodes_[c].next_sibling) node.vol += t.nodes_[c].vol;
        node.height = t.scan_height(v);
      }
    }
    t.rebuild_root_height_counts();
    const auto depth = t.depths();
    for (const Edge& e : graph.edges) {
      NodeId a = leaf_of[e.parent], b = leaf_of[e.child];
      while (depth[a] > depth[b]) a = t.nodes_[a].parent;
      while (depth[b] > depth[a]) b = t.nodes_[b].parent;
      while (t.nodes_[a].parent != t.nodes_[b].parent) {
        a = t.nodes_[a].parent;
        b = t.nodes_[b].parent;
      }
      t.nodes_[t.nodes_[a].parent].internal += e.weight;
    }
    // cut = vol - 2 * (weight of edges entirely inside the leaf set)
    std::vector<double> inside(t.nodes_.size(), 0.0);
    for (NodeId v : order) {
      const TreeNode& node = t.nodes_[v];
      inside[v] += node.internal;
      if (node.parent != kNoNode) inside[node.parent] += inside[v];
    }
    for (NodeId v : order) t.nodes_[v].cut = t.nodes_[v].vol - 2.0 * inside[v];
    t.nodes_[t.root_].cut = 0.0;
    return t;
  }

  NodeId root() const { return root_; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  std::size_t arena_size() const { return nodes_.size(); }
  std::size_t num_leaves() const { return num_leaves_; }
  double graph_volume() const { return graph_volume_; }
  int height() const { return nodes_[root_].height; }

  bool alive(NodeId id) const { return id < nodes_.size() && nodes_[id].alive; }

  std::vector<NodeId> children(NodeId id) const {
    std::vector<NodeId> out;
    out.reserve(nodes_.at(id).num_children);
    for (NodeId c = nodes_[id].first_child; c != kNoNode; c = nodes_[c].next_sibling) out.push_back(c);
    return out;
  }

  bool is_internal(NodeId id) const {
    return alive(id) && id != root_ && !nodes_[id].is_leaf();
  }

  // Inserts a new node under the root holding `a` and `b`; `cross` is the
  // total edge weight between their leaf sets.
  NodeId join(NodeId a, NodeId b, double cross) {
    require(a != b, "join needs two distinct nodes");
    require(alive(a) && alive(b) && nodes_[a].parent == root_ && nodes_[b].parent == root_,
            "join arguments must be children of the root");
    const NodeId beta = new_node();
    TreeNode& nb = nodes_[beta];
    nb.vol = nodes_[a].vol + nodes_[b].vol;
    nb.cut = nodes_[a].cut + nodes_[b].cut - 2.0 * cross;
    nb.internal = cross;
    nodes_[root_].internal -= cross;

    // the new node takes the slot of the first argument
    attach_before(root_, beta, a);
    detach(a);
    detach(b);
    attach_before(beta, a, kNoNode);
    attach_before(beta, b, kNoNode);
    nodes_[beta].height = std::max(nodes_[a].height, nodes_[b].height) + 1;
    remove_root_height(nodes_[a].height);
    remove_root_height(nodes_[b].height);
    ++root_heights_[nodes_[beta].height];
    refresh_root_height();
    return beta;
  }

  // Removes an internal node; its children take its place under its parent.
  void trim(NodeId beta) { trim(beta, true); }

  // With `track_heights` false the height bookkeeping is skipped, leaving
  // heights stale until recompute_heights(). Used for long trim runs on
  // deep trees, where walking the ancestors on every trim gets quadratic.
  void trim(NodeId beta, bool track_heights) {
    require(is_internal(beta), "trim needs an internal node (neither root nor leaf)");
    const NodeId p = nodes_[beta].parent;
    const int h = nodes_[beta].height;
    const bool under_root = track_heights && p == root_;
    if (under_root) remove_root_height(h);
    while (nodes_[beta].first_child != kNoNode) {
      const NodeId c = nodes_[beta].first_child;
      detach(c);
      attach_before(p, c, beta);
      if (under_root) ++root_heights_[nodes_[c].height];
    }
    nodes_[p].internal += nodes_[beta].internal;
    detach(beta);
    nodes_[beta].alive = false;
    if (under_root)
      refresh_root_height();
    else if (track_heights)
      child_height_changed(p, h, h - 1);
  }

  void recompute_heights() {
    for (NodeId v : postorder()) nodes_[v].height = scan_height(v);
    rebuild_root_height_counts();
  }

  // Inserts a unary node between `alpha` and its parent.
  NodeId pad(NodeId alpha) {
    require(alive(alpha) && alpha != root_, "pad needs a non-root node");
    const NodeId beta = new_node();
    const NodeId p = nodes_[alpha].parent;
    TreeNode& nb = nodes_[beta];
    nb.vol = nodes_[alpha].vol;
    nb.cut = nodes_[alpha].cut;
    nb.internal = 0.0;
    attach_before(p, beta, alpha);
    detach(alpha);
    attach_before(beta, alpha, kNoNode);
    nodes_[beta].height = nodes_[alpha].height + 1;
    child_height_changed(p, nodes_[alpha].height, nodes_[beta].height);
    return beta;
  }

  // Alive nodes in pre-order (parents before children, children in order).
  std::vector<NodeId> preorder() const {
    std::vector<NodeId> out;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      out.push_back(v);
      for (NodeId c = nodes_[v].last_child; c != kNoNode; c = nodes_[c].prev_sibling) stack.push_back(c);
    }
    return out;
  }

  std::vector<NodeId> postorder() const {
    auto order = preorder();
    // reversed pre-order visits every child before its parent
    std::reverse(order.begin(), order.end());
    return order;
  }

  // Depth below the root, indexed by NodeId (dead nodes get 0).
  std::vector<int> depths() const {
    std::vector<int> d(nodes_.size(), 0);
    for (NodeId v : preorder())
      if (v != root_) d[v] = d[nodes_[v].parent] + 1;
    return d;
  }

  // Maps graph node index -> leaf NodeId.
  std::vector<NodeId> leaf_index() const {
    std::vector<NodeId> out(num_leaves_, kNoNode);
    for (NodeId v : preorder())
      if (nodes_[v].is_leaf()) out[*nodes_[v].leaf] = v;
    return out;
  }

  // Checks the structural invariants; returns the first violation found.
  std::optional<std::string> check_invariants() const {
    if (root_ >= nodes_.size() || !nodes_[root_].alive) return "root missing";
    if (nodes_[root_].parent != kNoNode) return "root has a parent";
    std::vector<bool> seen(num_leaves_, false);
    std::size_t visited = 0;
    for (NodeId v : preorder()) {
      ++visited;
      if (visited > nodes_.size()) return "cycle detected";
      const TreeNode& n = nodes_[v];
      if (!n.alive) return "dead node " + std::to_string(v) + " reachable";
      if (n.is_leaf() != (n.num_children == 0))
        return "node " + std::to_string(v) + ": leaf payload and children disagree";
      if (n.is_leaf()) {
        if (*n.leaf >= num_leaves_ || seen[*n.leaf]) return "leaf payload repeated or out of range";
        seen[*n.leaf] = true;
        if (n.height != 0) return "leaf with nonzero height";
        continue;
      }
      std::uint32_t count = 0;
      int max_child = -1;
      for (NodeId c = n.first_child; c != kNoNode; c = nodes_[c].next_sibling) {
        ++count;
        if (nodes_[c].parent != v) return "child " + std::to_string(c) + " has wrong parent link";
        max_child = std::max(max_child, nodes_[c].height);
      }
      if (count != n.num_children) return "child count mismatch at " + std::to_string(v);
      if (n.height != max_child + 1) return "stale height at node " + std::to_string(v);
    }
    for (bool b : seen)
      if (!b) return "leaf set does not cover the graph";
    return std::nullopt;
  }

  // True when every leaf sits at depth exactly `k` and the tree has height k.
  bool leaves_at_depth(int k) const {
    if (height() != k) return false;
    const auto d = depths();
    for (NodeId v : preorder())
      if (nodes_[v].is_leaf() && d[v] != k) return false;
    return true;
  }

 private:
  NodeId new_node() {
    nodes_.emplace_back();
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  // Links `child` under `parent`, before `before` (or at the end).
  void attach_before(NodeId parent, NodeId child, NodeId before) {
    TreeNode& p = nodes_[parent];
    TreeNode& c = nodes_[child];
    c.parent = parent;
    if (before == kNoNode) {
      c.prev_sibling = p.last_child;
      c.next_sibling = kNoNode;
      if (p.last_child != kNoNode)
        nodes_[p.last_child].next_sibling = child;
      else
        p.first_child = child;
      p.last_child = child;
    } else {
      c.next_sibling = before;
      c.prev_sibling = nodes_[before].prev_sibling;
      if (c.prev_sibling != kNoNode)
        nodes_[c.prev_sibling].next_sibling = child;
      else
        p.first_child = child;
      nodes_[before].prev_sibling = child;
    }
    ++p.num_children;
  }

  void detach(NodeId child) {
    TreeNode& c = nodes_[child];
    TreeNode& p = nodes_[c.parent];
    if (c.prev_sibling != kNoNode)
      nodes_[c.prev_sibling].next_sibling = c.next_sibling;
    else
      p.first_child = c.next_sibling;
    if (c.next_sibling != kNoNode)
      nodes_[c.next_sibling].prev_sibling = c.prev_sibling;
    else
      p.last_child = c.prev_sibling;
    --p.num_children;
    c.parent = c.prev_sibling = c.next_sibling = kNoNode;
  }

  int scan_height(NodeId v) const {
    int h = -1;
    for (NodeId c = nodes_[v].first_child; c != kNoNode; c = nodes_[c].next_sibling) h = std::max(h, nodes_[c].height);
    return h + 1;
  }

  void remove_root_height(int h) {
    auto it = root_heights_.find(h);
    if (--it->second == 0) root_heights_.erase(it);
  }

  void refresh_root_height() {
    nodes_[root_].height = root_heights_.empty() ? 0 : root_heights_.rbegin()->first + 1;
  }

  void rebuild_root_height_counts() {
    root_heights_.clear();
    for (NodeId c = nodes_[root_].first_child; c != kNoNode; c = nodes_[c].next_sibling) ++root_heights_[nodes_[c].height];
    refresh_root_height();
  }

  // A child of `v` went from height `from` to `to` (a removed child counts
  // as dropping to `to` below every remaining one). Pushes the change
  // towards the root, rescanning a node only when its height may fall.
  void child_height_changed(NodeId v, int from, int to) {
    while (v != root_) {
      TreeNode& n = nodes_[v];
      int h = n.height;
      if (to + 1 > h)
        h = to + 1;
      else if (to < from && from + 1 == h)
        h = scan_height(v);
      if (h == n.height) return;
      from = n.height;
      to = h;
      n.height = h;
      v = n.parent;
    }
    remove_root_height(from);
    ++root_heights_[to];
    refresh_root_height();
  }

  std::vector<TreeNode> nodes_;
  NodeId root_ = kNoNode;
  std::size_t num_leaves_ = 0;
  double graph_volume_ = 0.0;
  // Height -> number of root children with it. Other nodes rescan their
  // children instead; only the root has many children to scan.
  std::map<int, int> root_heights_;
};

// Exports alive nodes renumbered in pre-order (root = 0).
inline nlohmann::json coding_tree_to_json(const CodingTree& tree, const PropagationTree& graph, int k) {
  const auto order = tree.preorder();
  std::vector<std::int64_t> renum(tree.arena_size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) renum[order[i]] = static_cast<std::int64_t>(i);
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TreeNode& n = tree.node(order[i]);
    nodes.push_back({{"id", i},
                     {"parent", n.parent == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(renum[n.parent])},
                     {"height", n.height},
                     {"leaf_post", n.leaf ? nlohmann::json(graph.node_ids.at(*n.leaf)) : nlohmann::json(nullptr)}});
  }
  return {{"K", k}, {"nodes", std::move(nodes)}};
}

struct LoadedCodingTree {
  CodingTree tree;
  int k = 0;
};

inline LoadedCodingTree coding_tree_from_json(const nlohmann::json& j, const PropagationTree& graph) {
  require(j.is_object() && j.contains("K") && j.contains("nodes"), "coding tree JSON needs 'K' and 'nodes'");
  std::unordered_map<std::string_view, std::size_t> post_index;
  for (std::size_t i = 0; i < graph.size(); ++i) post_index.emplace(graph.node_ids[i], i);
  const auto& nodes = j.at("nodes");
  std::vector<NodeSpec> specs(nodes.size());
  std::unordered_map<std::int64_t, std::size_t> slot;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto id = nodes[i].at("id").get<std::int64_t>();
    require(slot.emplace(id, i).second, "duplicate coding tree node id ", id);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!n.at("parent").is_null()) {
      auto it = slot.find(n.at("parent").get<std::int64_t>());
      require(it != slot.end(), "unknown parent id in coding tree");
      specs[i].parent = static_cast<NodeId>(it->second);
    }
    if (n.contains("leaf_post") && !n.at("leaf_post").is_null()) {
      auto it = post_index.find(n.at("leaf_post").get<std::string>());
      require(it != post_index.end(), "leaf_post '", n.at("leaf_post").get<std::string>(),
              "' is not a node of the propagation tree");
      specs[i].leaf = it->second;
    }
  }
  return {CodingTree::from_structure(graph, specs), j.at("K").get<int>()};
}

}  // namespace etrees
