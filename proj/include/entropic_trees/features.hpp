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

// TF-IDF encoding of post text into sparse, L2-normalized leaf features.
//
//   w(t) = tf(t) * (ln((1 + N) / (1 + df(t))) + 1)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "entropic_trees/error.hpp"

namespace etrees {

// Lowercased word tokens. ASCII letters and digits form words; bytes of
// UTF-8 multibyte sequences are kept as word characters verbatim, so
// non-Latin scripts survive (without case folding). Everything else splits.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80) {
      cur.push_back(ch);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Vocabulary {
  std::map<std::string, std::pair<std::size_t, std::size_t>> terms;  // term -> (index, df)
  std::size_t corpus_size = 0;
  std::size_t max_dims = 0;

  std::size_t size() const { return terms.size(); }

  double idf(std::size_t df) const {
    return std::log((1.0 + static_cast<double>(corpus_size)) / (1.0 + static_cast<double>(df))) + 1.0;
  }
};

// Keeps the max_dims terms with the highest document frequency; ties go to
// the lexicographically smaller term. Indices follow that ranking.
inline Vocabulary fit_vocabulary(const std::vector<std::string>& corpus, std::size_t max_dims) {
  require(!corpus.empty(), "cannot fit a vocabulary on an empty corpus");
  require(max_dims >= 1, "max_dims must be >= 1");
  std::unordered_map<std::string, std::size_t> df;
  for (const std::string& doc : corpus) {
    auto toks = tokenize(doc);
    std::unordered_set<std::string> seen(toks.begin(), toks.end());
    for (const auto& t : seen) ++df[t];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_dims) ranked.resize(max_dims);
  Vocabulary v;
  v.corpus_size = corpus.size();
  v.max_dims = max_dims;
  for (std::size_t i = 0; i < ranked.size(); ++i) v.terms.emplace(ranked[i].first, std::make_pair(i, ranked[i].second));
  return v;
}

struct SparseVector {
  std::vector<std::uint32_t> index;  // ascending
  std::vector<double> value;

  double norm() const {
    double s = 0.0;
    for (double x : value) s += x * x;
    return std::sqrt(s);
  }
};

// Out-of-vocabulary terms are dropped; text with none left encodes to the
// zero vector.
inline SparseVector encode(const Vocabulary& vocab, std::string_view text) {
  std::map<std::uint32_t, double> tf;
  std::map<std::uint32_t, std::size_t> df_of;
  for (const auto& tok : tokenize(text)) {
    auto it = vocab.terms.find(tok);
    if (it == vocab.terms.end()) continue;
    const auto idx = static_cast<std::uint32_t>(it->second.first);
    tf[idx] += 1.0;
    df_of[idx] = it->second.second;
  }
  SparseVector out;
  double ss = 0.0;
  for (const auto& [idx, count] : tf) {
    const double w = count * vocab.idf(df_of[idx]);
    out.index.push_back(idx);
    out.value.push_back(w);
    ss += w * w;
  }
  if (ss > 0.0) {
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : out.value) x *= inv;
  }
  return out;
}

// One row per post, in post order.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<SparseVector> rows;

  std::size_t size() const { return rows.size(); }
};

inline FeatureMatrix encode_all(const Vocabulary& vocab, const std::vector<std::string>& texts) {
  FeatureMatrix m;
  m.dim = vocab.size();
  m.rows.reserve(texts.size());
  for (const auto& t : texts) m.rows.push_back(encode(vocab, t));
  return m;
}

// {"corpus_size": N, "max_dims": D, "terms": {term: [index, df]}}
inline nlohmann::json vocabulary_to_json(const Vocabulary& v) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [term, entry] : v.terms) terms[term] = {entry.first, entry.second};
  return {{"corpus_size", v.corpus_size}, {"max_dims", v.max_dims}, {"terms", terms}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  Vocabulary v;
  try {
    v.corpus_size = j.at("corpus_size").get<std::size_t>();
    v.max_dims = j.at("max_dims").get<std::size_t>();
    std::vector<bool> used;
    for (const auto& [term, entry] : j.at("terms").items()) {
      const auto idx = entry.at(0).get<std::size_t>();
      const auto df = entry.at(1).get<std::size_t>();
      require(df >= 1 && df <= v.corpus_size, "term '", term, "' has document frequency ", df);
      if (idx >= used.size()) used.resize(idx + 1, false);
      require(!used[idx], "index ", idx, " used twice");
      used[idx] = true;
      v.terms.emplace(term, std::make_pair(idx, df));
    }
    require(v.terms.size() == used.size(), "vocabulary indices are not dense");
    require(v.terms.size() <= v.max_dims, "vocabulary larger than max_dims");
  } catch (const nlohmann::json::exception& e) {
    fail("malformed vocabulary: ", e.what());
  }
  return v;
}

}  // namespace etrees
