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

// Conversation threads and the time-weighted propagation trees built from
// them. A thread is a claim plus the replies it attracted; every reply
// becomes an edge parent -> child weighted by its reply latency in seconds.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "entropic_trees/error.hpp"
#include "json.hpp"

namespace etrees {

enum class Label : std::uint8_t { TR = 0, FR = 1, UR = 2 };
inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {Label::TR, Label::FR, Label::UR};

inline std::string_view to_string(Label label) {
  switch (label) {
    case Label::TR: return "TR";
    case Label::FR: return "FR";
    case Label::UR: return "UR";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "TR") return Label::TR;
  if (s == "FR") return Label::FR;
  if (s == "UR") return Label::UR;
  return std::nullopt;
}

struct Post {
  std::string id;
  std::string text;
  double time = 0.0;  // seconds since epoch
  std::optional<std::string> reply_to;
};

struct ThreadRecord {
  std::string thread_id;
  std::string event;
  Label label = Label::UR;
  std::vector<Post> posts;  // claim first, then replies by time

  const Post& claim() const { return posts.front(); }
};

// Parses "YYYY-MM-DDTHH:MM:SS[.fff][Z|+hh:mm|-hh:mm]" into seconds since the
// Unix epoch. A missing offset is read as UTC.
inline std::optional<double> parse_iso8601(std::string_view s) {
  auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
    if (pos + n > s.size()) return std::nullopt;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2);
  auto h = digits(11, 2), mi = digits(14, 2), se = digits(17, 2);
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)},
                           day{static_cast<unsigned>(*d)}};
  if (!ymd.ok() || *h > 23 || *mi > 59 || *se > 60) return std::nullopt;

  double seconds = static_cast<double>(sys_days{ymd}.time_since_epoch().count()) * 86400.0 +
                   *h * 3600.0 + *mi * 60.0 + *se;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    double scale = 0.1;
    ++pos;
    std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      seconds += (s[pos] - '0') * scale;
      scale /= 10.0;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  if (pos == s.size()) return seconds;
  if (s[pos] == 'Z' && pos + 1 == s.size()) return seconds;
  if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() && s[pos + 3] == ':') {
    auto oh = digits(pos + 1, 2), om = digits(pos + 4, 2);
    if (!oh || !om) return std::nullopt;
    const double offset = *oh * 3600.0 + *om * 60.0;
    return s[pos] == '+' ? seconds - offset : seconds + offset;
  }
  return std::nullopt;
}

// Returns a description of the first invariant the thread violates.
inline std::optional<std::string> validate_thread(const ThreadRecord& thread) {
  if (thread.posts.empty()) return "thread has no posts";
  std::unordered_set<std::string_view> ids;
  std::size_t claims = 0;
  for (const Post& p : thread.posts) {
    if (!ids.insert(p.id).second) return "duplicate post id '" + p.id + "'";
    if (!p.reply_to) ++claims;
    if (!std::isfinite(p.time)) return "non-finite timestamp on post '" + p.id + "'";
    if (p.time < 0.0) return "negative timestamp on post '" + p.id + "'";
  }
  if (claims != 1) return "expected exactly one claim, found " + std::to_string(claims);
  if (thread.posts.front().reply_to) return "claim is not the first post";
  for (const Post& p : thread.posts) {
    if (p.reply_to && !ids.contains(*p.reply_to))
      return "post '" + p.id + "' replies to unknown id '" + *p.reply_to + "'";
    if (p.reply_to && *p.reply_to == p.id) return "post '" + p.id + "' replies to itself";
  }
  // Reply links must reach the claim (no cycles among replies).
  std::unordered_map<std::string_view, std::string_view> parent;
  for (const Post& p : thread.posts)
    if (p.reply_to) parent.emplace(p.id, *p.reply_to);
  std::unordered_map<std::string_view, bool> reaches;
  reaches.emplace(thread.posts.front().id, true);
  for (const Post& p : thread.posts) {
    std::vector<std::string_view> path;
    std::string_view cur = p.id;
    std::unordered_set<std::string_view> on_path;
    while (!reaches.contains(cur)) {
      if (!on_path.insert(cur).second) return "reply cycle through post '" + std::string(cur) + "'";
      path.push_back(cur);
      cur = parent.at(cur);
    }
    for (auto v : path) reaches.emplace(v, true);
  }
  return std::nullopt;
}

// Orders posts as claim first, then replies by non-decreasing time (stable).
inline void normalize_thread(ThreadRecord& thread) {
  auto claim = std::find_if(thread.posts.begin(), thread.posts.end(),
                            [](const Post& p) { return !p.reply_to; });
  if (claim != thread.posts.end() && claim != thread.posts.begin())
    std::rotate(thread.posts.begin(), claim, claim + 1);
  if (thread.posts.size() > 1)
    std::stable_sort(thread.posts.begin() + 1, thread.posts.end(),
                     [](const Post& a, const Post& b) { return a.time < b.time; });
}

inline nlohmann::json thread_to_json(const ThreadRecord& thread) {
  nlohmann::json posts = nlohmann::json::array();
  for (const Post& p : thread.posts) {
    posts.push_back({{"id", p.id},
                     {"text", p.text},
                     {"time", p.time},
                     {"reply_to", p.reply_to ? nlohmann::json(*p.reply_to) : nlohmann::json(nullptr)}});
  }
  return {{"thread_id", thread.thread_id},
          {"event", thread.event},
          {"label", std::string(to_string(thread.label))},
          {"posts", std::move(posts)}};
}

// Parses one thread object. Throws Error on schema violations.
inline ThreadRecord thread_from_json(const nlohmann::json& j) {
  require(j.is_object(), "thread must be a JSON object");
  auto str_field = [&](const nlohmann::json& obj, const char* key) -> std::string {
    auto it = obj.find(key);
    require(it != obj.end(), "missing field '", key, "'");
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
    fail("field '", key, "' must be a string");
  };
  ThreadRecord t;
  t.thread_id = str_field(j, "thread_id");
  t.event = j.contains("event") ? str_field(j, "event") : std::string();
  const auto label = parse_label(str_field(j, "label"));
  require(label.has_value(), "label must be one of TR, FR, UR");
  t.label = *label;
  auto posts = j.find("posts");
  require(posts != j.end() && posts->is_array(), "missing 'posts' array");
  for (const auto& pj : *posts) {
    require(pj.is_object(), "post must be a JSON object");
    Post p;
    p.id = str_field(pj, "id");
    auto text = pj.find("text");
    p.text = (text != pj.end() && text->is_string()) ? text->get<std::string>() : std::string();
    auto time = pj.find("time");
    require(time != pj.end(), "post '", p.id, "' has no time");
    if (time->is_number()) {
      p.time = time->get<double>();
    } else if (time->is_string()) {
      auto parsed = parse_iso8601(time->get<std::string>());
      require(parsed.has_value(), "post '", p.id, "' has unparseable time '",
              time->get<std::string>(), "'");
      p.time = *parsed;
    } else {
      fail("post '", p.id, "' time must be a number or ISO-8601 string");
    }
    auto reply = pj.find("reply_to");
    if (reply != pj.end() && !reply->is_null()) {
      if (reply->is_string())
        p.reply_to = reply->get<std::string>();
      else if (reply->is_number_integer())
        p.reply_to = std::to_string(reply->get<std::int64_t>());
      else
        fail("post '", p.id, "' reply_to must be a string or null");
    }
    t.posts.push_back(std::move(p));
  }
  return t;
}

struct ParseDiagnostic {
  std::size_t line = 0;  // 1-based
  std::string thread_id;
  std::string message;
};

struct ParseResult {
  std::vector<ThreadRecord> threads;
  std::vector<ParseDiagnostic> diagnostics;
};

enum class ThreadFormat { Jsonl };

// Reads one thread per line. Malformed lines and invariant-violating threads
// are skipped and reported; blank lines are ignored.
inline ParseResult parse_threads(std::istream& in, ThreadFormat format = ThreadFormat::Jsonl) {
  require(format == ThreadFormat::Jsonl, "unsupported thread format");
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      result.diagnostics.push_back({lineno, {}, std::string("malformed JSON: ") + e.what()});
      continue;
    }
    ThreadRecord t;
    try {
      t = thread_from_json(j);
    } catch (const Error& e) {
      std::string id = (j.is_object() && j.contains("thread_id") && j["thread_id"].is_string())
                           ? j["thread_id"].get<std::string>()
                           : std::string();
      result.diagnostics.push_back({lineno, id, e.what()});
      continue;
    }
    normalize_thread(t);
    if (auto problem = validate_thread(t)) {
      result.diagnostics.push_back({lineno, t.thread_id, "thread rejected: " + *problem});
      continue;
    }
    result.threads.push_back(std::move(t));
  }
  return result;
}

struct Edge {
  std::size_t parent = 0;
  std::size_t child = 0;
  double weight = 0.0;
};

// Weighted propagation tree. Node 0 is always the claim; node order follows
// the thread's post order.
struct PropagationTree {
  std::vector<std::string> node_ids;
  std::vector<std::optional<std::size_t>> parent;
  std::vector<Edge> edges;      // one per non-claim node
  std::vector<double> degree;   // weighted degree
  double total_volume = 0.0;    // sum of degrees
  std::size_t clamped_edges = 0;

  std::size_t size() const { return node_ids.size(); }
  bool degenerate() const { return edges.empty(); }
};

struct TreeOptions {
  double min_weight = 1.0;  // lower clamp for reply latency, seconds
  bool weighted = true;     // false: every edge gets weight 1 (ablation)
};

namespace detail {

inline void finish_tree(PropagationTree& tree) {
  tree.degree.assign(tree.size(), 0.0);
  for (const Edge& e : tree.edges) {
    tree.degree[e.parent] += e.weight;
    tree.degree[e.child] += e.weight;
  }
  tree.total_volume = 0.0;
  for (double d : tree.degree) tree.total_volume += d;
}

}  // namespace detail

inline PropagationTree build_propagation_tree(const ThreadRecord& thread,
                                              const TreeOptions& options = {}) {
  require(options.min_weight > 0.0 && std::isfinite(options.min_weight),
          "min_weight must be positive and finite");
  if (auto problem = validate_thread(thread)) fail("invalid thread '", thread.thread_id, "': ", *problem);

  PropagationTree tree;
  const std::size_t n = thread.posts.size();
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    tree.node_ids.push_back(thread.posts[i].id);
    index.emplace(thread.posts[i].id, i);
  }
  tree.parent.assign(n, std::nullopt);
  for (std::size_t i = 1; i < n; ++i) {
    const Post& post = thread.posts[i];
    const std::size_t p = index.at(*post.reply_to);
    tree.parent[i] = p;
    double w = 1.0;
    if (options.weighted) {
      w = post.time - thread.posts[p].time;
      if (!(w >= options.min_weight)) {
        w = options.min_weight;
        ++tree.clamped_edges;
      }
    }
    tree.edges.push_back({p, i, w});
  }
  detail::finish_tree(tree);
  return tree;
}

// Keeps the claim and every reply posted within `deadline` seconds of it whose
// whole reply chain back to the claim is also kept.
inline ThreadRecord apply_time_cutoff(const ThreadRecord& thread, double deadline) {
  require(deadline >= 0.0, "deadline must be non-negative");
  ThreadRecord out = thread;
  out.posts.clear();
  if (thread.posts.empty()) return out;
  const double t0 = thread.claim().time;

  std::unordered_map<std::string_view, std::vector<std::size_t>> replies;
  for (std::size_t i = 1; i < thread.posts.size(); ++i)
    replies[*thread.posts[i].reply_to].push_back(i);

  std::vector<bool> keep(thread.posts.size(), false);
  keep[0] = true;
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    auto it = replies.find(thread.posts[cur].id);
    if (it == replies.end()) continue;
    for (std::size_t child : it->second) {
      if (thread.posts[child].time - t0 <= deadline) {
        keep[child] = true;
        stack.push_back(child);
      }
    }
  }
  for (std::size_t i = 0; i < thread.posts.size(); ++i)
    if (keep[i]) out.posts.push_back(thread.posts[i]);
  return out;
}

// Depth (in edges) of each node below the claim.
inline std::vector<std::size_t> node_depths(const PropagationTree& tree) {
  std::vector<std::size_t> depth(tree.size(), 0);
  std::vector<std::vector<std::size_t>> children(tree.size());
  for (const Edge& e : tree.edges) children[e.parent].push_back(e.child);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t c : children[v]) {
      depth[c] = depth[v] + 1;
      stack.push_back(c);
    }
  }
  return depth;
}

inline std::size_t tree_depth(const PropagationTree& tree) {
  if (tree.size() == 0) return 0;
  const auto d = node_depths(tree);
  return *std::max_element(d.begin(), d.end());
}

inline nlohmann::json tree_to_json(const PropagationTree& tree) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : tree.edges) edges.push_back({e.parent, e.child, e.weight});
  return {{"nodes", tree.node_ids}, {"edges", std::move(edges)}};
}

// Inverse of tree_to_json. Checks that the edges form a tree rooted at node 0.
inline PropagationTree tree_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("nodes") && j.contains("edges"),
          "propagation tree JSON needs 'nodes' and 'edges'");
  PropagationTree tree;
  for (const auto& id : j.at("nodes")) {
    require(id.is_string(), "node ids must be strings");
    tree.node_ids.push_back(id.get<std::string>());
  }
  const std::size_t n = tree.size();
  require(n >= 1, "propagation tree has no nodes");
  tree.parent.assign(n, std::nullopt);
  for (const auto& e : j.at("edges")) {
    require(e.is_array() && e.size() == 3, "edge must be [parent, child, weight]");
    const auto p = e[0].get<std::size_t>();
    const auto c = e[1].get<std::size_t>();
    const double w = e[2].get<double>();
    require(p < n && c < n && p != c, "edge endpoint out of range");
    require(c != 0, "the claim (node 0) cannot have a parent");
    require(!tree.parent[c], "node ", c, " has two parents");
    require(std::isfinite(w) && w > 0.0, "edge weight must be positive and finite");
    tree.parent[c] = p;
    tree.edges.push_back({p, c, w});
  }
  require(tree.edges.size() == n - 1, "tree on ", n, " nodes needs ", n - 1, " edges");
  // every node must reach the claim
  std::vector<int> state(n, 0);  // 0 unknown, 1 visiting, 2 reaches root
  state[0] = 2;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<std::size_t> path;
    std::size_t cur = v;
    while (state[cur] != 2) {
      require(state[cur] == 0, "cycle in propagation tree");
      require(tree.parent[cur].has_value(), "node ", cur, " is disconnected");
      state[cur] = 1;
      path.push_back(cur);
      cur = *tree.parent[cur];
    }
    for (auto p : path) state[p] = 2;
  }
  detail::finish_tree(tree);
  return tree;
}

}  // namespace etrees
