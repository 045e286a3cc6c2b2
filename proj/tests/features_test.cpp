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

#include "entropic_trees/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "entropic_trees/tensor_io.hpp"

namespace etrees {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Hello, WORLD! it's 2015"), (std::vector<std::string>{"hello", "world", "it", "s", "2015"}));
  EXPECT_TRUE(tokenize("  ...  ").empty());
  // multibyte sequences stay inside words
  EXPECT_EQ(tokenize("caf\xc3\xa9 ok"), (std::vector<std::string>{"caf\xc3\xa9", "ok"}));
}

TEST(FitVocabulary, DocumentFrequencies) {
  const auto v = fit_vocabulary({"a b", "b c"}, 10);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v.terms.at("a").second, 1u);
  EXPECT_EQ(v.terms.at("b").second, 2u);
  EXPECT_EQ(v.terms.at("c").second, 1u);
  // highest df first, then lexicographic
  EXPECT_EQ(v.terms.at("b").first, 0u);
  EXPECT_EQ(v.terms.at("a").first, 1u);
  EXPECT_EQ(v.terms.at("c").first, 2u);
}

TEST(FitVocabulary, TruncatesToMostFrequent) {
  const auto v = fit_vocabulary({"a b", "b c"}, 1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v.terms.count("b"));
}

TEST(FitVocabulary, RepeatedTermCountsOncePerDocument) {
  const auto v = fit_vocabulary({"x x x", "y"}, 5);
  EXPECT_EQ(v.terms.at("x").second, 1u);
}

TEST(FitVocabulary, Errors) {
  EXPECT_THROW(fit_vocabulary({}, 5), Error);
  EXPECT_THROW(fit_vocabulary({"a"}, 0), Error);
}

TEST(Encode, UnknownOnlyTextIsZero) {
  const auto v = fit_vocabulary({"a b", "b c"}, 10);
  const auto e = encode(v, "zzz qqq");
  EXPECT_TRUE(e.index.empty());
  EXPECT_EQ(e.norm(), 0.0);
}

TEST(Encode, RepeatedTermIsUnitVector) {
  const auto v = fit_vocabulary({"a b", "b c"}, 10);
  const auto e = encode(v, "c c c");
  ASSERT_EQ(e.index.size(), 1u);
  EXPECT_EQ(e.index[0], v.terms.at("c").first);
  EXPECT_NEAR(e.value[0], 1.0, 1e-15);
}

TEST(Encode, HandComputedSmoothedIdf) {
  // N = 2; idf(a) = ln(3/2) + 1, idf(b) = ln(3/3) + 1 = 1
  const auto v = fit_vocabulary({"a b", "b c"}, 10);
  const auto e = encode(v, "a b b");
  const double wa = 1.0 * (std::log(1.5) + 1.0);
  const double wb = 2.0 * 1.0;
  const double norm = std::sqrt(wa * wa + wb * wb);
  ASSERT_EQ(e.index.size(), 2u);
  // index order: b (0) then a (1)
  EXPECT_NEAR(e.value[0], wb / norm, 1e-15);
  EXPECT_NEAR(e.value[1], wa / norm, 1e-15);
}

TEST(Encode, NormsAreZeroOrOne) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta"};
  auto doc = [&] {
    std::string s;
    for (int i = 0, n = static_cast<int>(rng() % 8); i < n; ++i) s += words[rng() % words.size()] + " ";
    return s;
  };
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) corpus.push_back(doc());
  const auto v = fit_vocabulary(corpus, 4);
  for (int i = 0; i < 200; ++i) {
    const double n = encode(v, doc()).norm();
    EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) < 1e-12) << n;
  }
}

TEST(Encode, NoLeakageFromTestText) {
  const auto v = fit_vocabulary({"a b"}, 10);
  const auto before = vocabulary_to_json(v).dump();
  encode(v, "brand new words");
  EXPECT_EQ(vocabulary_to_json(v).dump(), before);
}

TEST(VocabularyJson, RoundTrip) {
  const auto v = fit_vocabulary({"the cat", "the dog", "a cat"}, 3);
  const auto back = vocabulary_from_json(vocabulary_to_json(v));
  EXPECT_EQ(vocabulary_to_json(back).dump(), vocabulary_to_json(v).dump());
  EXPECT_THROW(vocabulary_from_json(nlohmann::json::parse(R"({"corpus_size":1,"max_dims":2,"terms":{"a":[1,1]}})")),
               Error);
}

TEST(TensorIo, RoundTripAndLayout) {
  TensorFile f;
  f.meta = {{"note", "x"}};
  f.tensors["m"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
  f.tensors["v"] = {{1}, {-0.5}};
  std::stringstream buf;
  write_tensors(buf, f);
  const std::string bytes = buf.str();
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[i]);
  const auto header = nlohmann::json::parse(bytes.substr(8, len));
  EXPECT_EQ(header["tensors"][0]["dtype"], "f64");
  EXPECT_EQ(header["tensors"][1]["offset"], 48);
  EXPECT_EQ(bytes.size(), 8 + len + 7 * 8);

  const auto back = read_tensors(buf);
  EXPECT_EQ(back.meta, f.meta);
  EXPECT_EQ(back.at("m").data, f.tensors["m"].data);
  EXPECT_EQ(back.at("v").shape, (std::vector<std::size_t>{1}));
}

TEST(TensorIo, RejectsTruncation) {
  TensorFile f;
  f.tensors["m"] = {{4}, {1, 2, 3, 4}};
  std::stringstream buf;
  write_tensors(buf, f);
  std::string s = buf.str();
  std::stringstream cut(s.substr(0, s.size() - 4));
  EXPECT_THROW(read_tensors(cut), IoError);
  std::stringstream tiny("abc");
  EXPECT_THROW(read_tensors(tiny), IoError);
}

TEST(TensorIo, FeatureMatrixAsCsr) {
  const auto v = fit_vocabulary({"a b", "b c", "c d"}, 10);
  const auto m = encode_all(v, {"a b", "", "d d c"});
  std::stringstream buf;
  write_tensors(buf, features_to_tensors(m));
  const auto back = features_from_tensors(read_tensors(buf));
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.dim, m.dim);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(back.rows[r].index, m.rows[r].index);
    EXPECT_EQ(back.rows[r].value, m.rows[r].value);
  }
}

}  // namespace
}  // namespace etrees
