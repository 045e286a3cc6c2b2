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

// Reply-delay distributions: empirical CDFs and the k-sample
// Anderson-Darling test of Scholz and Stephens (1987), midrank form, which
// stays exact under ties.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "entropic_trees/error.hpp"
#include "entropic_trees/propagation.hpp"

namespace etrees {

struct EcdfPoint {
  double x = 0.0;
  double f = 0.0;  // fraction of the sample <= x
};

// One point per distinct value, ascending; right-continuous.
inline std::vector<EcdfPoint> ecdf(std::vector<double> sample) {
  require(!sample.empty(), "ECDF of an empty sample");
  for (double x : sample) require(std::isfinite(x), "ECDF sample has a non-finite value");
  std::sort(sample.begin(), sample.end());
  std::vector<EcdfPoint> out;
  const double n = static_cast<double>(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (i + 1 == sample.size() || sample[i + 1] != sample[i]) out.push_back({sample[i], static_cast<double>(i + 1) / n});
  return out;
}

// Significance levels of the critical-value table, and the brackets they
// define for a p-value.
inline constexpr std::array<double, 7> kAdLevels = {0.25, 0.10, 0.05, 0.025, 0.01, 0.005, 0.001};

enum class PRange {
  Above25,     // p > 0.25
  From10To25,  // 0.10 < p <= 0.25
  From5To10,
  From2_5To5,
  From1To2_5,
  From0_5To1,
  From0_1To0_5,
  Below0_1,    // p <= 0.001
};

inline std::string to_string(PRange r) {
  const auto i = static_cast<std::size_t>(r);
  if (i == 0) return "p>0.25";
  if (i == kAdLevels.size()) return "p<=0.001";
  const auto fmt = [](double x) {
    std::string s = std::to_string(x);
    s.erase(s.find_last_not_of('0') + 1);
    return s;
  };
  return fmt(kAdLevels[i]) + "<p<=" + fmt(kAdLevels[i - 1]);
}

// Largest level the p-value is known to be at or below (1 for Above25).
inline double p_upper(PRange r) {
  const auto i = static_cast<std::size_t>(r);
  return i == 0 ? 1.0 : kAdLevels[i - 1];
}

struct AdResult {
  double statistic = 0.0;     // A2akN
  double standardized = 0.0;  // (A2akN - (k - 1)) / sigma
  std::array<double, kAdLevels.size()> critical{};  // standardized scale
  PRange p_range = PRange::Above25;
  double p_approx = 0.0;  // log-quadratic interpolation, clamped to [0.001, 0.25]
  std::size_t k = 0;
  std::size_t n = 0;

  bool rejects(double alpha) const { return p_upper(p_range) <= alpha; }
};

namespace detail {

// Scholz & Stephens (1987) interpolation coefficients:
// critical value = b0 + b1 / sqrt(m) + b2 / m with m = k - 1.
inline constexpr std::array<double, 7> kAdB0 = {0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085};
inline constexpr std::array<double, 7> kAdB1 = {-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615};
inline constexpr std::array<double, 7> kAdB2 = {-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154};

// Least-squares quadratic through (x_i, y_i), evaluated at t.
inline double quadratic_fit_at(const std::array<double, 7>& x, const std::array<double, 7>& y, double t) {
  double s[5] = {0, 0, 0, 0, 0}, r[3] = {0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (double& si : s) {
      si += p;
      p *= x[i];
    }
    r[0] += y[i];
    r[1] += y[i] * x[i];
    r[2] += y[i] * x[i] * x[i];
  }
  double a[3][4] = {{s[0], s[1], s[2], r[0]}, {s[1], s[2], s[3], r[1]}, {s[2], s[3], s[4], r[2]}};
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int i = c + 1; i < 3; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    std::swap(a[c], a[piv]);
    for (int i = 0; i < 3; ++i) {
      if (i == c) continue;
      const double f = a[i][c] / a[c][c];
      for (int j = c; j < 4; ++j) a[i][j] -= f * a[c][j];
    }
  }
  const double c0 = a[0][3] / a[0][0], c1 = a[1][3] / a[1][1], c2 = a[2][3] / a[2][2];
  return c0 + c1 * t + c2 * t * t;
}

}  // namespace detail

inline AdResult anderson_darling_k(const std::vector<std::vector<double>>& samples) {
  const std::size_t k = samples.size();
  require(k >= 2, "k-sample Anderson-Darling needs at least 2 samples, got ", k);
  std::vector<std::vector<double>> sorted(samples);
  std::vector<double> pooled;
  for (auto& s : sorted) {
    require(!s.empty(), "Anderson-Darling sample is empty");
    for (double x : s) require(std::isfinite(x), "Anderson-Darling sample has a non-finite value");
    std::sort(s.begin(), s.end());
    pooled.insert(pooled.end(), s.begin(), s.end());
  }
  std::sort(pooled.begin(), pooled.end());
  const double N = static_cast<double>(pooled.size());
  require(pooled.size() >= 4, "Anderson-Darling needs at least 4 observations in total");
  require(pooled.front() != pooled.back(), "Anderson-Darling needs at least two distinct values");

  std::vector<double> distinct;
  std::vector<double> lj, bj;  // multiplicity, midrank count below
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    distinct.push_back(pooled[i]);
    lj.push_back(static_cast<double>(j - i));
    bj.push_back(static_cast<double>(i) + static_cast<double>(j - i) / 2.0);
    i = j;
  }

  double a2 = 0.0;
  for (const auto& s : sorted) {
    const double ni = static_cast<double>(s.size());
    double inner = 0.0;
    std::size_t below = 0;  // elements of s < current value
    for (std::size_t j = 0; j < distinct.size(); ++j) {
      while (below < s.size() && s[below] < distinct[j]) ++below;
      std::size_t upto = below;
      while (upto < s.size() && s[upto] == distinct[j]) ++upto;
      const double fij = static_cast<double>(upto - below);
      const double mij = static_cast<double>(upto) - fij / 2.0;
      const double num = N * mij - bj[j] * ni;
      inner += lj[j] / N * num * num / (bj[j] * (N - bj[j]) - N * lj[j] / 4.0);
    }
    a2 += inner / ni;
  }
  a2 *= (N - 1.0) / N;

  // variance of A2akN under the null
  double H = 0.0;
  for (const auto& s : sorted) H += 1.0 / static_cast<double>(s.size());
  double h = 0.0;
  for (std::size_t i = 1; i < pooled.size(); ++i) h += 1.0 / static_cast<double>(i);
  double g = 0.0, tail = 0.0;  // tail = sum_{m=N-j+1}^{N-1} 1/m
  for (std::size_t j = 2; j < pooled.size(); ++j) {
    tail += 1.0 / (N - static_cast<double>(j) + 1.0);
    g += tail / static_cast<double>(j);
  }
  const double kk = static_cast<double>(k);
  const double a = (4 * g - 6) * (kk - 1) + (10 - 6 * g) * H;
  const double b = (2 * g - 4) * kk * kk + 8 * h * kk + (2 * g - 14 * h - 4) * H - 8 * h + 4 * g - 6;
  const double c = (6 * h + 2 * g - 2) * kk * kk + (4 * h - 4 * g + 6) * kk + (2 * h - 6) * H + 4 * h;
  const double d = (2 * h + 6) * kk * kk - 4 * h * kk;
  const double sigma2 = (a * N * N * N + b * N * N + c * N + d) / ((N - 1) * (N - 2) * (N - 3));
  const double m = kk - 1;

  AdResult r;
  r.k = k;
  r.n = pooled.size();
  r.statistic = a2;
  r.standardized = (a2 - m) / std::sqrt(sigma2);
  std::array<double, 7> log_levels{};
  for (std::size_t i = 0; i < kAdLevels.size(); ++i) {
    r.critical[i] = detail::kAdB0[i] + detail::kAdB1[i] / std::sqrt(m) + detail::kAdB2[i] / m;
    log_levels[i] = std::log(kAdLevels[i]);
  }
  std::size_t passed = 0;
  while (passed < r.critical.size() && r.standardized >= r.critical[passed]) ++passed;
  r.p_range = static_cast<PRange>(passed);
  const double p = std::exp(detail::quadratic_fit_at(r.critical, log_levels, r.standardized));
  r.p_approx = std::clamp(p, kAdLevels.back(), kAdLevels.front());
  return r;
}

inline nlohmann::json ad_to_json(const AdResult& r) {
  return {{"statistic", r.statistic}, {"standardized", r.standardized}, {"critical", r.critical},
          {"levels", kAdLevels},      {"p_range", to_string(r.p_range)}, {"p_approx", r.p_approx},
          {"k", r.k},                 {"n", r.n}};
}

// Seconds from the claim to each reply. Replies stamped before their claim
// count as delay 0.
inline std::vector<double> reply_delays(const ThreadRecord& t) {
  std::vector<double> out;
  for (std::size_t i = 1; i < t.posts.size(); ++i) out.push_back(std::max(0.0, t.posts[i].time - t.claim().time));
  return out;
}

using DelaysByLabel = std::array<std::vector<double>, kNumLabels>;

// Reply delays of the threads in `event` (every thread when empty), pooled
// per label.
inline DelaysByLabel delays_by_label(const std::vector<ThreadRecord>& threads, const std::string& event = {}) {
  DelaysByLabel out;
  bool present = false;
  for (const auto& t : threads) {
    if (!event.empty() && t.event != event) continue;
    present = true;
    const auto d = reply_delays(t);
    auto& dst = out[static_cast<std::size_t>(t.label)];
    dst.insert(dst.end(), d.begin(), d.end());
  }
  require(present || event.empty(), "event '", event, "' not found");
  return out;
}

struct EventAnalysis {
  std::string event;
  std::vector<Label> labels;  // labels with at least one reply, in label order
  std::vector<std::vector<EcdfPoint>> ecdfs;
  AdResult test;
};

// Per-label ECDFs and the k-sample test across `labels` (restrict to two
// labels for a pairwise test). Labels without replies are left out.
inline EventAnalysis analyze_event(const std::vector<ThreadRecord>& threads, const std::string& event,
                                   const std::vector<Label>& labels = {kAllLabels.begin(), kAllLabels.end()}) {
  DelaysByLabel by_label = delays_by_label(threads, event);
  EventAnalysis out;
  out.event = event;
  std::vector<std::vector<double>> samples;
  for (Label l : kAllLabels) {
    auto& s = by_label[static_cast<std::size_t>(l)];
    if (s.empty() || std::find(labels.begin(), labels.end(), l) == labels.end()) continue;
    out.labels.push_back(l);
    out.ecdfs.push_back(ecdf(s));
    samples.push_back(std::move(s));
  }
  require(samples.size() >= 2, "event '", event, "' has replies under ", samples.size(),
          " selected label(s); the test needs at least 2");
  out.test = anderson_darling_k(samples);
  return out;
}

}  // namespace etrees
