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

// End-to-end plumbing: configuration, per-thread preparation (propagation
// tree, coding tree, features), folds, dataset audit and the synthetic
// thread generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "entropic_trees/coding_tree.hpp"
#include "entropic_trees/construction.hpp"
#include "entropic_trees/entropy.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/features.hpp"
#include "entropic_trees/parallel.hpp"
#include "entropic_trees/propagation.hpp"
#include "entropic_trees/rvnn.hpp"
#include "entropic_trees/trainer.hpp"

namespace etrees {

enum class CodingMode { EntropyGreedy, Random, Identity };

inline std::string_view to_string(CodingMode m) {
  switch (m) {
    case CodingMode::EntropyGreedy: return "entropy_greedy";
    case CodingMode::Random: return "random";
    case CodingMode::Identity: return "identity";
  }
  return "?";
}

inline CodingMode parse_coding_mode(std::string_view s) {
  if (s == "entropy_greedy") return CodingMode::EntropyGreedy;
  if (s == "random") return CodingMode::Random;
  if (s == "identity") return CodingMode::Identity;
  fail("unknown coding mode '", s, "' (expected entropy_greedy, random or identity)");
}

enum class SplitMode { LeaveOneEventOut, FixedFiles };

inline std::string_view to_string(SplitMode m) {
  return m == SplitMode::LeaveOneEventOut ? "leave_one_event_out" : "fixed_files";
}

inline SplitMode parse_split(std::string_view s) {
  if (s == "leave_one_event_out") return SplitMode::LeaveOneEventOut;
  if (s == "fixed_files") return SplitMode::FixedFiles;
  fail("unknown split '", s, "' (expected leave_one_event_out or fixed_files)");
}

struct PipelineConfig {
  int k = 7;
  double min_weight = 1.0;
  std::size_t max_dims = 5000;
  int d = 64;
  TrainingConfig train;
  bool weighted = true;
  CodingMode coding_mode = CodingMode::EntropyGreedy;
  Pool pool = Pool::Sum;
  std::uint64_t seed = 0;
  SplitMode split = SplitMode::LeaveOneEventOut;
  double deadline = std::numeric_limits<double>::infinity();  // evaluation cutoff, seconds after the claim

  void validate() const {
    require(k >= 1, "K must be >= 1");
    require(min_weight > 0 && std::isfinite(min_weight), "min_weight must be positive");
    require(max_dims >= 1, "max_dims must be >= 1");
    require(d >= 1, "hidden size must be >= 1");
    require(deadline >= 0, "deadline must be >= 0");
    train.validate();
  }

  TreeOptions tree_options() const { return {min_weight, weighted}; }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j = {{"K", c.k},
                      {"min_weight", c.min_weight},
                      {"max_dims", c.max_dims},
                      {"hidden", c.d},
                      {"weighted", c.weighted},
                      {"coding_mode", to_string(c.coding_mode)},
                      {"pool", to_string(c.pool)},
                      {"seed", c.seed},
                      {"split", to_string(c.split)},
                      {"learning_rate", c.train.learning_rate},
                      {"warmup", c.train.warmup},
                      {"weight_decay", c.train.weight_decay},
                      {"epochs", c.train.epochs},
                      {"batch_size", c.train.batch_size}};
  // JSON has no infinity
  j["deadline"] = std::isfinite(c.deadline) ? nlohmann::json(c.deadline) : nlohmann::json(nullptr);
  return j;
}

// Per-thread seed for random coding trees, independent of thread order.
inline std::uint64_t thread_seed(std::uint64_t seed, std::string_view thread_id) {
  std::uint64_t h = 1469598103934665603ull ^ seed;  // FNV-1a
  for (unsigned char c : thread_id) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct EncodedTree {
  CodingTree tree;
  double entropy_star = 0.0;  // height-1 tree, i.e. before construction
  double entropy = 0.0;
};

inline EncodedTree encode_tree(const PropagationTree& graph, int k, CodingMode mode, std::uint64_t seed) {
  EncodedTree out{CodingTree::star(graph), 0.0, 0.0};
  if (!graph.degenerate()) out.entropy_star = ledger_entropy(out.tree);
  switch (mode) {
    case CodingMode::EntropyGreedy: {
      auto built = build_coding_tree(graph, k);
      out.tree = std::move(built.tree);
      out.entropy = built.stats.entropy;
      return out;
    }
    case CodingMode::Random: out.tree = build_random_coding_tree(graph, k, seed); break;
    case CodingMode::Identity: out.tree = build_identity_coding_tree(graph, k); break;
  }
  out.entropy = graph.degenerate() ? 0.0 : ledger_entropy(out.tree);
  return out;
}

struct PreparedThread {
  std::string thread_id;
  std::string event;
  Label label = Label::UR;
  std::vector<std::string> texts;  // post order
  LayeredTree tree;
  double entropy = 0.0;
};

// Tree and texts of one thread, keeping only posts within `deadline` seconds
// of the claim.
inline PreparedThread prepare_thread(const ThreadRecord& raw, const PipelineConfig& c,
                                     double deadline = std::numeric_limits<double>::infinity()) {
  const ThreadRecord thread = std::isfinite(deadline) ? apply_time_cutoff(raw, deadline) : raw;
  const PropagationTree graph = build_propagation_tree(thread, c.tree_options());
  EncodedTree enc = encode_tree(graph, c.k, c.coding_mode, thread_seed(c.seed, thread.thread_id));
  PreparedThread out;
  out.thread_id = thread.thread_id;
  out.event = thread.event;
  out.label = thread.label;
  for (const Post& p : thread.posts) out.texts.push_back(p.text);
  out.tree = layer_tree(enc.tree, c.k);
  out.entropy = enc.entropy;
  return out;
}

inline std::vector<PreparedThread> prepare_threads(const std::vector<ThreadRecord>& threads, const PipelineConfig& c,
                                                   double deadline = std::numeric_limits<double>::infinity()) {
  return parallel_map(threads, [&](const ThreadRecord& t) { return prepare_thread(t, c, deadline); });
}

// Vocabulary over every post of the given threads.
inline Vocabulary fit_thread_vocabulary(const std::vector<const PreparedThread*>& threads, std::size_t max_dims) {
  std::vector<std::string> corpus;
  for (const auto* t : threads) corpus.insert(corpus.end(), t->texts.begin(), t->texts.end());
  return fit_vocabulary(corpus, max_dims);
}

inline std::vector<Example> make_examples(const std::vector<const PreparedThread*>& threads, const Vocabulary& vocab) {
  return parallel_map(threads, [&](const PreparedThread* t) {
    Example ex;
    ex.thread_id = t->thread_id;
    ex.event = t->event;
    ex.tree = t->tree;
    ex.feats = encode_all(vocab, t->texts);
    ex.label = t->label;
    return ex;
  });
}

struct FoldResult {
  std::string name;  // held-out event, or "test"
  std::size_t train_size = 0;
  Metrics metrics;
  std::vector<EpochStats> history;
  std::vector<Prediction> predictions;
  std::vector<std::string> thread_ids;
};

// Fits the vocabulary and the model on `train`, scores `test`.
inline FoldResult run_fold(const std::vector<const PreparedThread*>& train_set,
                           const std::vector<const PreparedThread*>& test_set, const PipelineConfig& c,
                           const EpochCallback& on_epoch = {}, RvnnParams* model_out = nullptr,
                           Vocabulary* vocab_out = nullptr) {
  require(!train_set.empty(), "training split is empty");
  require(!test_set.empty(), "test split is empty");
  const Vocabulary vocab = fit_thread_vocabulary(train_set, c.max_dims);
  const auto train_ex = make_examples(train_set, vocab);
  const auto test_ex = make_examples(test_set, vocab);
  const RvnnConfig model{c.d, static_cast<int>(std::max<std::size_t>(1, vocab.size())), c.k, c.pool};
  TrainResult trained = train(train_ex, model, c.train, on_epoch);
  FoldResult out;
  out.train_size = train_ex.size();
  out.metrics = evaluate(trained.params, test_ex);
  out.history = std::move(trained.history);
  out.predictions = predict_all(trained.params, test_ex);
  for (const auto& ex : test_ex) out.thread_ids.push_back(ex.thread_id);
  if (model_out) *model_out = std::move(trained.params);
  if (vocab_out) *vocab_out = vocab;
  return out;
}

struct CrossValidation {
  std::vector<FoldResult> folds;
  double macro_f1 = 0.0;  // mean over folds
  double accuracy = 0.0;  // mean over folds
};

inline CrossValidation aggregate_folds(std::vector<FoldResult> folds) {
  CrossValidation cv;
  cv.folds = std::move(folds);
  for (const auto& f : cv.folds) {
    cv.macro_f1 += f.metrics.macro_f1 / static_cast<double>(cv.folds.size());
    cv.accuracy += f.metrics.accuracy / static_cast<double>(cv.folds.size());
  }
  return cv;
}

using FoldEpochCallback = std::function<void(const std::string&, const EpochStats&)>;
using FoldSink = std::function<void(const FoldResult&, const RvnnParams&, const Vocabulary&)>;

// One fold per event, in event-name order. Training draws from `train_pool`
// and scoring from `test_pool`, which must list the same threads in the same
// order (e.g. full threads and their early-cutoff versions).
inline CrossValidation leave_one_event_out(const std::vector<PreparedThread>& train_pool,
                                           const std::vector<PreparedThread>& test_pool, const PipelineConfig& c,
                                           const FoldEpochCallback& on_epoch = {}, const FoldSink& on_fold = {}) {
  require(train_pool.size() == test_pool.size(), "train and test pools differ in size");
  std::set<std::string> events;
  for (std::size_t i = 0; i < train_pool.size(); ++i) {
    require(train_pool[i].thread_id == test_pool[i].thread_id, "train and test pools differ at thread '",
            train_pool[i].thread_id, "'");
    events.insert(train_pool[i].event);
  }
  require(events.size() >= 2, "leave-one-event-out needs at least two events, found ", events.size());
  std::vector<FoldResult> folds;
  for (const std::string& ev : events) {
    std::vector<const PreparedThread*> train_set, test_set;
    for (std::size_t i = 0; i < train_pool.size(); ++i) {
      if (train_pool[i].event == ev)
        test_set.push_back(&test_pool[i]);
      else
        train_set.push_back(&train_pool[i]);
    }
    EpochCallback cb;
    if (on_epoch) cb = [&](const EpochStats& s) { on_epoch(ev, s); };
    RvnnParams model;
    Vocabulary vocab;
    FoldResult f = run_fold(train_set, test_set, c, cb, &model, &vocab);
    f.name = ev;
    if (on_fold) on_fold(f, model, vocab);
    folds.push_back(std::move(f));
  }
  return aggregate_folds(std::move(folds));
}

inline CrossValidation leave_one_event_out(const std::vector<PreparedThread>& threads, const PipelineConfig& c,
                                           const FoldEpochCallback& on_epoch = {}) {
  return leave_one_event_out(threads, threads, c, on_epoch);
}

// ---- audit ---------------------------------------------------------------

struct DatasetAudit {
  std::size_t claims = 0;
  std::size_t posts = 0;
  std::array<std::size_t, kNumLabels> labels{};
  std::map<std::string, std::size_t> events;
  double avg_posts = 0.0;
  double avg_depth = 0.0;
  std::size_t clamped_edges = 0;
};

inline DatasetAudit audit_threads(const std::vector<ThreadRecord>& threads, const TreeOptions& opts = {}) {
  DatasetAudit a;
  double depth = 0.0;
  for (const auto& t : threads) {
    ++a.claims;
    a.posts += t.posts.size();
    ++a.labels[static_cast<std::size_t>(t.label)];
    ++a.events[t.event];
    const PropagationTree g = build_propagation_tree(t, opts);
    depth += static_cast<double>(tree_depth(g));
    a.clamped_edges += g.clamped_edges;
  }
  if (a.claims) {
    a.avg_posts = static_cast<double>(a.posts) / static_cast<double>(a.claims);
    a.avg_depth = depth / static_cast<double>(a.claims);
  }
  return a;
}

inline nlohmann::json audit_to_json(const DatasetAudit& a) {
  nlohmann::json labels = nlohmann::json::object();
  for (Label l : kAllLabels) labels[std::string(to_string(l))] = a.labels[static_cast<std::size_t>(l)];
  return {{"claims", a.claims},       {"posts", a.posts},           {"labels", labels},
          {"events", a.events},       {"avg_posts_per_thread", a.avg_posts},
          {"avg_depth", a.avg_depth}, {"clamped_edges", a.clamped_edges}};
}

// ---- synthetic threads ---------------------------------------------------

struct SynthConfig {
  std::size_t threads = 300;  // split evenly between the two classes
  std::size_t min_posts = 80;  // delays sit near the 1 s clamp, so the signal
  std::size_t max_posts = 160;  // needs many replies per thread
  double rate_a = 1.0;  // reply delays ~ Exp(rate), per second
  double rate_b = 3.0;
  Label label_a = Label::TR;
  Label label_b = Label::FR;
  std::size_t events = 5;
  std::size_t vocabulary = 1;  // words in the text; text never depends on the class
  std::uint64_t seed = 0;
};

// Threads come in pairs, one per class, sharing the reply topology and the
// post texts; only the reply delays differ. Pairs are spread over events
// round-robin.
inline std::vector<ThreadRecord> generate_synth(const SynthConfig& c) {
  require(c.threads >= 2 && c.threads % 2 == 0, "synthetic thread count must be even and >= 2");
  require(c.min_posts >= 1 && c.min_posts <= c.max_posts, "bad post count range");
  require(c.rate_a > 0 && c.rate_b > 0, "delay rates must be positive");
  require(c.events >= 1 && c.vocabulary >= 1, "need at least one event and one word");
  std::mt19937_64 rng(c.seed);
  std::uniform_int_distribution<std::size_t> size(c.min_posts, c.max_posts);
  std::uniform_int_distribution<std::size_t> length(3, 10);
  // Zipf-like word choice
  std::vector<double> weights(c.vocabulary);
  for (std::size_t i = 0; i < c.vocabulary; ++i) weights[i] = 1.0 / static_cast<double>(i + 1);
  std::discrete_distribution<std::size_t> word(weights.begin(), weights.end());
  const double t0 = 1.4e9;

  std::vector<ThreadRecord> out;
  for (std::size_t pair = 0; pair < c.threads / 2; ++pair) {
    const std::size_t n = size(rng);
    std::vector<std::size_t> parent(n, 0);
    for (std::size_t i = 1; i < n; ++i)
      parent[i] = std::bernoulli_distribution(0.5)(rng) ? 0 : std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::vector<std::string> text(n);
    for (auto& s : text) {
      for (std::size_t w = 0, m = length(rng); w < m; ++w) s += (w ? " w" : "w") + std::to_string(word(rng));
    }
    const std::string event = "synth-" + std::to_string(pair % c.events);
    for (int cls = 0; cls < 2; ++cls) {
      std::exponential_distribution<double> delay(cls == 0 ? c.rate_a : c.rate_b);
      ThreadRecord t;
      t.thread_id = "s" + std::to_string(pair) + (cls == 0 ? "a" : "b");
      t.event = event;
      t.label = cls == 0 ? c.label_a : c.label_b;
      std::vector<double> time(n, t0 + static_cast<double>(pair) * 1e4);
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) time[i] = time[parent[i]] + delay(rng);
        Post p;
        p.id = t.thread_id + "-" + std::to_string(i);
        p.text = text[i];
        p.time = time[i];
        if (i > 0) p.reply_to = t.thread_id + "-" + std::to_string(parent[i]);
        t.posts.push_back(std::move(p));
      }
      normalize_thread(t);
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace etrees
