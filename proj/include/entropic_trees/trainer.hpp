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

// AdamW training with a linear warmup/decay schedule, and evaluation
// metrics.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "entropic_trees/error.hpp"
#include "entropic_trees/features.hpp"
#include "entropic_trees/parallel.hpp"
#include "entropic_trees/propagation.hpp"
#include "entropic_trees/rvnn.hpp"

namespace etrees {

struct Example {
  std::string thread_id;
  std::string event;
  LayeredTree tree;
  FeatureMatrix feats;
  Label label = Label::UR;
};

struct TrainingConfig {
  double learning_rate = 0.001;  // peak
  double warmup = 0.06;          // fraction of all steps
  double weight_decay = 0.0005;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    require(learning_rate > 0, "learning rate must be > 0");
    require(warmup >= 0 && warmup < 1, "warmup fraction must be in [0, 1)");
    require(weight_decay >= 0, "weight decay must be >= 0");
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch size must be >= 1");
  }
};

// Linear ramp to the peak over the first ceil(warmup * total) steps, then
// linear decay to 0 at `total`. Steps count from 1.
class LinearSchedule {
 public:
  LinearSchedule(double peak, double warmup, std::size_t total)
      : peak_(peak),
        total_(total),
        warm_(static_cast<std::size_t>(std::ceil(warmup * static_cast<double>(total)))) {}

  double at(std::size_t step) const {
    if (step <= warm_) return warm_ == 0 ? peak_ : peak_ * static_cast<double>(step) / static_cast<double>(warm_);
    if (step >= total_) return 0.0;
    return peak_ * static_cast<double>(total_ - step) / static_cast<double>(total_ - warm_);
  }

  std::size_t warmup_steps() const { return warm_; }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warm_;
};

// Adam moments with decoupled weight decay (decay scaled by the step's
// learning rate, applied before the moment update).
class AdamW {
 public:
  AdamW(const RvnnParams& like, const TrainingConfig& c)
      : c_(c), m_(RvnnParams::zeros(like.config)), v_(RvnnParams::zeros(like.config)) {}

  void step(RvnnParams& p, const RvnnParams& grad, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(c_.beta2, static_cast<double>(t_));
    std::vector<MatrixXd*> ps, gs, ms, vs;
    p.for_each([&](const char*, MatrixXd& x) { ps.push_back(&x); });
    const_cast<RvnnParams&>(grad).for_each([&](const char*, MatrixXd& x) { gs.push_back(&x); });
    m_.for_each([&](const char*, MatrixXd& x) { ms.push_back(&x); });
    v_.for_each([&](const char*, MatrixXd& x) { vs.push_back(&x); });
    for (std::size_t i = 0; i < ps.size(); ++i) {
      MatrixXd& x = *ps[i];
      const MatrixXd& g = *gs[i];
      x *= 1.0 - lr * c_.weight_decay;
      *ms[i] = c_.beta1 * *ms[i] + (1.0 - c_.beta1) * g;
      *vs[i] = c_.beta2 * *vs[i] + (1.0 - c_.beta2) * g.cwiseProduct(g);
      x.array() -= lr * (ms[i]->array() / bc1) / ((vs[i]->array() / bc2).sqrt() + c_.epsilon);
    }
  }

 private:
  TrainingConfig c_;
  RvnnParams m_, v_;
  std::size_t t_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;      // mean over examples, measured during the epoch
  double accuracy = 0.0;  // same
  double learning_rate = 0.0;  // at the epoch's last step
};

struct TrainResult {
  RvnnParams params;
  std::vector<EpochStats> history;
};

// Mean loss over a batch and its gradient. Per-example work runs in
// parallel; the reduction runs in example order, so results do not depend
// on the worker count.
struct BatchGradient {
  RvnnParams grad;
  double loss = 0.0;
  std::size_t correct = 0;
};

inline BatchGradient batch_gradient(const RvnnParams& p, const std::vector<Example>& data,
                                    const std::vector<std::size_t>& batch) {
  struct One {
    ExampleGradient g;
    double loss = 0.0;
    bool correct = false;
  };
  std::vector<One> parts(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    const Example& ex = data[batch[i]];
    const ForwardTrace tr = forward(p, ex.tree, ex.feats);
    parts[i].loss = loss(tr, ex.label);
    if (!std::isfinite(parts[i].loss))
      fail("non-finite loss on thread '", ex.thread_id, "'");
    parts[i].correct = predict(tr) == ex.label;
    parts[i].g = backward(p, ex.tree, tr, ex.label);
  });
  BatchGradient out{RvnnParams::zeros(p.config), 0.0, 0};
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = data[batch[i]];
    accumulate(out.grad, parts[i].g, ex.tree, ex.feats, scale);
    out.loss += parts[i].loss;
    out.correct += parts[i].correct;
  }
  return out;
}

using EpochCallback = std::function<void(const EpochStats&)>;

inline TrainResult train(const std::vector<Example>& data, const RvnnConfig& model, const TrainingConfig& config,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  require(!data.empty(), "cannot train on an empty dataset");
  TrainResult result{RvnnParams::init(model, config.seed), {}};
  RvnnParams& p = result.params;
  AdamW opt(p, config);
  const std::size_t n = data.size();
  const std::size_t per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const LinearSchedule schedule(config.learning_rate, config.warmup, per_epoch * config.epochs);

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + start,
                                           order.begin() + std::min(n, start + config.batch_size));
      const BatchGradient bg = batch_gradient(p, data, batch);
      stats.loss += bg.loss;
      correct += bg.correct;
      stats.learning_rate = schedule.at(++step);
      opt.step(p, bg.grad, stats.learning_rate);
    }
    stats.loss /= static_cast<double>(n);
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<ClassScores, kNumLabels> per_class{};
  std::array<std::array<std::size_t, kNumLabels>, kNumLabels> confusion{};  // [truth][predicted]
};

// Macro-F1 averages over all three labels; a label that is never predicted
// and never true scores 0.
inline Metrics compute_metrics(const std::vector<Label>& truth, const std::vector<Label>& predicted) {
  require(truth.size() == predicted.size(), "truth and predictions differ in length");
  require(!truth.empty(), "no examples to score");
  Metrics m;
  m.n = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    correct += truth[i] == predicted[i];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    std::size_t tp = m.confusion[c][c], pred = 0, real = 0;
    for (std::size_t o = 0; o < kNumLabels; ++o) {
      pred += m.confusion[o][c];
      real += m.confusion[c][o];
    }
    ClassScores& s = m.per_class[c];
    s.support = real;
    s.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    s.recall = real ? static_cast<double>(tp) / static_cast<double>(real) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    m.macro_f1 += s.f1 / static_cast<double>(kNumLabels);
  }
  return m;
}

struct Prediction {
  Label label = Label::UR;
  std::array<double, kNumLabels> probs{};
};

inline std::vector<Prediction> predict_all(const RvnnParams& p, const std::vector<Example>& data) {
  return parallel_map(data, [&](const Example& ex) {
    const ForwardTrace tr = forward(p, ex.tree, ex.feats);
    Prediction out;
    out.label = predict(tr);
    for (std::size_t c = 0; c < kNumLabels; ++c) out.probs[c] = tr.probs(static_cast<Eigen::Index>(c));
    return out;
  });
}

inline Metrics evaluate(const RvnnParams& p, const std::vector<Example>& data) {
  require(!data.empty(), "cannot evaluate on an empty dataset");
  const auto preds = predict_all(p, data);
  std::vector<Label> truth, guess;
  for (std::size_t i = 0; i < data.size(); ++i) {
    truth.push_back(data[i].label);
    guess.push_back(preds[i].label);
  }
  return compute_metrics(truth, guess);
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json per = nlohmann::json::object();
  for (Label l : kAllLabels) {
    const ClassScores& s = m.per_class[static_cast<std::size_t>(l)];
    per[std::string(to_string(l))] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : m.confusion) confusion.push_back(row);
  return {{"n", m.n}, {"accuracy", m.accuracy}, {"macro_f1", m.macro_f1}, {"per_class", per}, {"confusion", confusion}};
}

}  // namespace etrees
