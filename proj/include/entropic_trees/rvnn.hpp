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

// Bottom-up recursive network over a coding tree of height K.
//
// Leaves:   h = P g                      (g: TF-IDF row of the post)
// Height l: hbar = sum of children
//           r    = sigmoid(W_r s_l + U_r hbar)
//           z    = sigmoid(W_z s_l + U_z hbar)
//           htil = tanh(W_h s_l + U_h (r * hbar))
//           h    = (1 - z) * hbar + z * htil
// Readout:  h_T = [pool(layer 0); ...; pool(layer K)],  y = softmax(W h_T + b)
//
// There are no gate biases. Backward is hand-derived.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "entropic_trees/coding_tree.hpp"
#include "entropic_trees/error.hpp"
#include "entropic_trees/features.hpp"
#include "entropic_trees/propagation.hpp"
#include "entropic_trees/tensor_io.hpp"

namespace etrees {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Pool { Sum, Mean, Max };

inline std::string_view to_string(Pool p) {
  switch (p) {
    case Pool::Sum: return "sum";
    case Pool::Mean: return "mean";
    case Pool::Max: return "max";
  }
  return "?";
}

inline Pool parse_pool(std::string_view s) {
  if (s == "sum") return Pool::Sum;
  if (s == "mean") return Pool::Mean;
  if (s == "max") return Pool::Max;
  fail("unknown pooling '", s, "' (expected sum, mean or max)");
}

// Coding tree regrouped by height. Layer 0 holds the leaves; node i of
// layer l >= 1 has children child[l][offset[l][i] .. offset[l][i+1]) in
// layer l - 1. The root is the single node of layer k.
struct LayeredTree {
  int k = 0;
  std::vector<std::size_t> leaf_post;               // layer-0 node -> feature row
  std::vector<std::vector<std::size_t>> offset;     // per layer, size n_l + 1
  std::vector<std::vector<std::size_t>> child;

  std::size_t layer_size(int l) const { return l == 0 ? leaf_post.size() : offset[l].size() - 1; }
};

// Requires every leaf at depth k.
inline LayeredTree layer_tree(const CodingTree& tree, int k) {
  require(k >= 1, "K must be >= 1");
  require(tree.leaves_at_depth(k), "coding tree leaves are not all at depth ", k);
  LayeredTree out;
  out.k = k;
  out.offset.assign(k + 1, {0});
  out.child.assign(k + 1, {});
  const auto depth = tree.depths();
  std::vector<std::size_t> slot(tree.arena_size(), 0);
  // post-order gives children before parents, each layer in a stable order
  for (NodeId v : tree.postorder()) {
    const int l = k - depth[v];
    const TreeNode& n = tree.node(v);
    if (n.is_leaf()) {
      slot[v] = out.leaf_post.size();
      out.leaf_post.push_back(*n.leaf);
      continue;
    }
    for (NodeId c = n.first_child; c != kNoNode; c = tree.node(c).next_sibling) {
      require(k - depth[c] == l - 1, "coding tree is not layered");
      out.child[l].push_back(slot[c]);
    }
    slot[v] = out.offset[l].size() - 1;
    out.offset[l].push_back(out.child[l].size());
  }
  require(out.layer_size(k) == 1, "coding tree must have a single root at height ", k);
  return out;
}

struct RvnnConfig {
  int d = 64;
  int d_in = 0;
  int k = 7;
  Pool pool = Pool::Sum;
};

constexpr int kNumClasses = static_cast<int>(kNumLabels);

struct RvnnParams {
  RvnnConfig config;
  MatrixXd W_r, U_r, W_z, U_z, W_h, U_h;  // d x d
  MatrixXd s;                             // d x (K + 1), column l is s^(l)
  MatrixXd P;                             // d x d_in
  MatrixXd W;                             // classes x (K + 1) d
  MatrixXd b;                             // classes x 1

  static RvnnParams zeros(const RvnnConfig& c) {
    require(c.d >= 1 && c.d_in >= 1 && c.k >= 1, "bad model shape d=", c.d, " d_in=", c.d_in, " K=", c.k);
    RvnnParams p;
    p.config = c;
    for (MatrixXd* m : {&p.W_r, &p.U_r, &p.W_z, &p.U_z, &p.W_h, &p.U_h}) *m = MatrixXd::Zero(c.d, c.d);
    p.s = MatrixXd::Zero(c.d, c.k + 1);
    p.P = MatrixXd::Zero(c.d, c.d_in);
    p.W = MatrixXd::Zero(kNumClasses, (c.k + 1) * c.d);
    p.b = MatrixXd::Zero(kNumClasses, 1);
    return p;
  }

  // Glorot-uniform weights, U(-0.1, 0.1) positional embeddings, zero bias.
  static RvnnParams init(const RvnnConfig& c, std::uint64_t seed) {
    RvnnParams p = zeros(c);
    std::mt19937_64 rng(seed);
    auto glorot = [&](MatrixXd& m) {
      const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      std::uniform_real_distribution<double> u(-a, a);
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    };
    for (MatrixXd* m : {&p.W_r, &p.U_r, &p.W_z, &p.U_z, &p.W_h, &p.U_h}) glorot(*m);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (Eigen::Index j = 0; j < p.s.cols(); ++j)
      for (Eigen::Index i = 0; i < p.s.rows(); ++i) p.s(i, j) = u(rng);
    glorot(p.P);
    glorot(p.W);
    return p;
  }

  template <typename F>
  void for_each(F&& f) {
    f("W_r", W_r); f("U_r", U_r); f("W_z", W_z); f("U_z", U_z); f("W_h", W_h); f("U_h", U_h);
    f("s", s); f("P", P); f("W", W); f("b", b);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<RvnnParams*>(this)->for_each([&](const char* name, MatrixXd& m) { f(name, static_cast<const MatrixXd&>(m)); });
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const char*, const MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

// 6 d^2 + (K+1) d + d d_in + |Y| (K+1) d + |Y|
inline std::size_t expected_parameter_count(const RvnnConfig& c) {
  const std::size_t d = c.d, k1 = c.k + 1, y = kNumClasses;
  return 6 * d * d + k1 * d + d * static_cast<std::size_t>(c.d_in) + y * k1 * d + y;
}

struct ForwardTrace {
  std::vector<MatrixXd> h;                     // per layer, d x n_l
  std::vector<MatrixXd> hbar, r, z, htil;      // per layer >= 1
  std::vector<std::vector<Eigen::Index>> argmax;  // max pooling only, per layer
  VectorXd h_t;
  VectorXd logits;
  VectorXd probs;
  double log_norm = 0.0;  // log-sum-exp of the logits
};

namespace detail {

inline MatrixXd sigmoid(const MatrixXd& a) {
  return a.unaryExpr([](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
}

inline void check_inputs(const RvnnParams& p, const LayeredTree& t, const FeatureMatrix& g) {
  require(t.k == p.config.k, "tree height ", t.k, " does not match model K=", p.config.k);
  require(static_cast<int>(g.dim) == p.config.d_in, "feature dim ", g.dim, " does not match model d_in=", p.config.d_in);
  for (std::size_t post : t.leaf_post) require(post < g.size(), "leaf refers to feature row ", post, " of ", g.size());
}

}  // namespace detail

inline ForwardTrace forward(const RvnnParams& p, const LayeredTree& t, const FeatureMatrix& feats) {
  detail::check_inputs(p, t, feats);
  const int k = t.k, d = p.config.d;
  ForwardTrace tr;
  tr.h.resize(k + 1);
  tr.hbar.resize(k + 1);
  tr.r.resize(k + 1);
  tr.z.resize(k + 1);
  tr.htil.resize(k + 1);

  MatrixXd& h0 = tr.h[0];
  h0 = MatrixXd::Zero(d, static_cast<Eigen::Index>(t.leaf_post.size()));
  for (std::size_t j = 0; j < t.leaf_post.size(); ++j) {
    const SparseVector& g = feats.rows[t.leaf_post[j]];
    for (std::size_t q = 0; q < g.index.size(); ++q) h0.col(j) += g.value[q] * p.P.col(g.index[q]);
  }

  for (int l = 1; l <= k; ++l) {
    const auto n = static_cast<Eigen::Index>(t.layer_size(l));
    MatrixXd& hbar = tr.hbar[l];
    hbar = MatrixXd::Zero(d, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t q = t.offset[l][i]; q < t.offset[l][i + 1]; ++q) hbar.col(i) += tr.h[l - 1].col(t.child[l][q]);
    const VectorXd sl = p.s.col(l);
    tr.r[l] = detail::sigmoid((p.U_r * hbar).colwise() + p.W_r * sl);
    tr.z[l] = detail::sigmoid((p.U_z * hbar).colwise() + p.W_z * sl);
    tr.htil[l] = ((p.U_h * tr.r[l].cwiseProduct(hbar)).colwise() + p.W_h * sl).array().tanh().matrix();
    tr.h[l] = (1.0 - tr.z[l].array()).matrix().cwiseProduct(hbar) + tr.z[l].cwiseProduct(tr.htil[l]);
  }

  tr.h_t = VectorXd::Zero((k + 1) * d);
  if (p.config.pool == Pool::Max) tr.argmax.resize(k + 1);
  for (int l = 0; l <= k; ++l) {
    const MatrixXd& hl = tr.h[l];
    auto seg = tr.h_t.segment(l * d, d);
    switch (p.config.pool) {
      case Pool::Sum: seg = hl.rowwise().sum(); break;
      case Pool::Mean: seg = hl.rowwise().mean(); break;
      case Pool::Max:
        tr.argmax[l].resize(d);
        for (int i = 0; i < d; ++i) seg(i) = hl.row(i).maxCoeff(&tr.argmax[l][i]);
        break;
    }
  }

  tr.logits = p.W * tr.h_t + p.b.col(0);
  const double m = tr.logits.maxCoeff();
  tr.log_norm = m + std::log((tr.logits.array() - m).exp().sum());
  tr.probs = (tr.logits.array() - tr.log_norm).exp().matrix();
  return tr;
}

// -log y_label, via log-sum-exp.
inline double loss(const ForwardTrace& tr, Label label) {
  return tr.log_norm - tr.logits(static_cast<Eigen::Index>(label));
}

inline Label predict(const ForwardTrace& tr) {
  Eigen::Index best = 0;
  tr.probs.maxCoeff(&best);
  return static_cast<Label>(best);
}

// Gradient of one example. P's gradient is kept implicit as the leaf
// adjoints; apply it with accumulate().
struct ExampleGradient {
  RvnnParams dense;  // P left empty
  MatrixXd leaf_dh;  // d x n_leaves
};

inline ExampleGradient backward(const RvnnParams& p, const LayeredTree& t, const ForwardTrace& tr, Label label) {
  const int k = t.k, d = p.config.d;
  ExampleGradient out;
  RvnnParams& g = out.dense;
  g.config = p.config;
  for (MatrixXd* m : {&g.W_r, &g.U_r, &g.W_z, &g.U_z, &g.W_h, &g.U_h}) *m = MatrixXd::Zero(d, d);
  g.s = MatrixXd::Zero(d, k + 1);

  VectorXd dlogits = tr.probs;
  dlogits(static_cast<Eigen::Index>(label)) -= 1.0;
  g.W = dlogits * tr.h_t.transpose();
  g.b = dlogits;
  const VectorXd dh_t = p.W.transpose() * dlogits;

  std::vector<MatrixXd> dh(k + 1);
  for (int l = 0; l <= k; ++l) {
    const auto n = tr.h[l].cols();
    const VectorXd seg = dh_t.segment(l * d, d);
    switch (p.config.pool) {
      case Pool::Sum: dh[l] = seg.replicate(1, n); break;
      case Pool::Mean: dh[l] = (seg / static_cast<double>(n)).replicate(1, n); break;
      case Pool::Max:
        dh[l] = MatrixXd::Zero(d, n);
        for (int i = 0; i < d; ++i) dh[l](i, tr.argmax[l][i]) = seg(i);
        break;
    }
  }

  for (int l = k; l >= 1; --l) {
    const MatrixXd& hbar = tr.hbar[l];
    const MatrixXd& r = tr.r[l];
    const MatrixXd& z = tr.z[l];
    const MatrixXd& htil = tr.htil[l];
    const VectorXd sl = p.s.col(l);

    MatrixXd dhbar = dh[l].cwiseProduct((1.0 - z.array()).matrix());
    const MatrixXd dz = dh[l].cwiseProduct(htil - hbar);
    const MatrixXd da_h = dh[l].cwiseProduct(z).cwiseProduct((1.0 - htil.array().square()).matrix());
    const MatrixXd rh = r.cwiseProduct(hbar);
    const MatrixXd drh = p.U_h.transpose() * da_h;
    const MatrixXd dr = drh.cwiseProduct(hbar);
    dhbar += drh.cwiseProduct(r);
    const MatrixXd da_z = dz.cwiseProduct(z.cwiseProduct((1.0 - z.array()).matrix()));
    const MatrixXd da_r = dr.cwiseProduct(r.cwiseProduct((1.0 - r.array()).matrix()));

    const VectorXd sum_h = da_h.rowwise().sum(), sum_z = da_z.rowwise().sum(), sum_r = da_r.rowwise().sum();
    g.W_h += sum_h * sl.transpose();
    g.W_z += sum_z * sl.transpose();
    g.W_r += sum_r * sl.transpose();
    g.U_h += da_h * rh.transpose();
    g.U_z += da_z * hbar.transpose();
    g.U_r += da_r * hbar.transpose();
    g.s.col(l) += p.W_h.transpose() * sum_h + p.W_z.transpose() * sum_z + p.W_r.transpose() * sum_r;
    dhbar += p.U_z.transpose() * da_z + p.U_r.transpose() * da_r;

    for (Eigen::Index i = 0; i < hbar.cols(); ++i)
      for (std::size_t q = t.offset[l][i]; q < t.offset[l][i + 1]; ++q) dh[l - 1].col(t.child[l][q]) += dhbar.col(i);
  }
  out.leaf_dh = std::move(dh[0]);
  return out;
}

// acc += scale * gradient; acc must be shaped like the model (dense P).
inline void accumulate(RvnnParams& acc, const ExampleGradient& eg, const LayeredTree& t, const FeatureMatrix& feats,
                       double scale = 1.0) {
  auto add = [&](MatrixXd& a, const MatrixXd& b) { a += scale * b; };
  add(acc.W_r, eg.dense.W_r); add(acc.U_r, eg.dense.U_r);
  add(acc.W_z, eg.dense.W_z); add(acc.U_z, eg.dense.U_z);
  add(acc.W_h, eg.dense.W_h); add(acc.U_h, eg.dense.U_h);
  add(acc.s, eg.dense.s); add(acc.W, eg.dense.W); add(acc.b, eg.dense.b);
  for (std::size_t j = 0; j < t.leaf_post.size(); ++j) {
    const SparseVector& g = feats.rows[t.leaf_post[j]];
    for (std::size_t q = 0; q < g.index.size(); ++q) acc.P.col(g.index[q]) += (scale * g.value[q]) * eg.leaf_dh.col(j);
  }
}

// Dense gradient of the loss of one example.
inline RvnnParams gradient(const RvnnParams& p, const LayeredTree& t, const FeatureMatrix& feats, Label label) {
  const ForwardTrace tr = forward(p, t, feats);
  RvnnParams acc = RvnnParams::zeros(p.config);
  accumulate(acc, backward(p, t, tr, label), t, feats);
  return acc;
}

inline TensorFile params_to_tensors(const RvnnParams& p) {
  TensorFile f;
  f.meta = {{"d", p.config.d}, {"d_in", p.config.d_in}, {"K", p.config.k}, {"pool", to_string(p.config.pool)}};
  p.for_each([&](const char* name, const MatrixXd& m) {
    Tensor t;
    t.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    t.data.reserve(m.size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) t.data.push_back(m(i, j));  // row-major
    f.tensors[name] = std::move(t);
  });
  return f;
}

inline RvnnParams params_from_tensors(const TensorFile& f) {
  RvnnConfig c;
  try {
    c.d = f.meta.at("d").get<int>();
    c.d_in = f.meta.at("d_in").get<int>();
    c.k = f.meta.at("K").get<int>();
    c.pool = parse_pool(f.meta.at("pool").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(detail::concat("checkpoint header: ", e.what()));
  }
  RvnnParams p = RvnnParams::zeros(c);
  p.for_each([&](const char* name, MatrixXd& m) {
    const Tensor& t = f.at(name);
    if (t.shape.size() != 2 || t.shape[0] != static_cast<std::size_t>(m.rows()) ||
        t.shape[1] != static_cast<std::size_t>(m.cols()))
      throw IoError(detail::concat("checkpoint tensor ", name, " has the wrong shape"));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[static_cast<std::size_t>(i * m.cols() + j)];
  });
  return p;
}

}  // namespace etrees
