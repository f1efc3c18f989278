/* Copyright 2026 The ANLI Toolkit Authors. All Rights Reserved.

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
#include "anli/encoder.hpp"

#include <cmath>

#include "doctest.h"
#include "support/test_support.hpp"

using namespace anli;
using anli::testing::TempDir;

TEST_SUITE_BEGIN("encoder");

TEST_CASE("encode is deterministic") {
  HashingEncoder enc(42, 16);
  Triad t{"some words to encode", 0};
  EmbeddingMatrix a = enc.encode(t);
  EmbeddingMatrix b = enc.encode(t);
  CHECK(a.rows == 4);
  CHECK(a.cols == 16);
  CHECK(a.data == b.data);
}

TEST_CASE("repeated tokens share rows") {
  HashingEncoder enc(1, 8);
  EmbeddingMatrix m = enc.encode(Triad{"a b a", 0});
  REQUIRE(m.rows == 3);
  for (std::size_t c = 0; c < m.cols; ++c) {
    CHECK(m.at(0, c) == m.at(2, c));
    CHECK(m.at(0, c) != m.at(1, c));
  }
}

TEST_CASE("tokenization lowercases and splits on punctuation") {
  CHECK(HashingEncoder::tokenize("Maple, maple!") ==
        std::vector<std::string>{"maple", "maple"});
  CHECK(HashingEncoder::tokenize("<s> One </s>") ==
        std::vector<std::string>{"s", "one", "s"});
  HashingEncoder enc(9, 4);
  CHECK(enc.token_vector("Maple") == enc.token_vector("maple"));
}

TEST_CASE("token vectors stay within the configured bound") {
  const std::size_t d = 25;
  HashingEncoder enc(3, d);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < 50; ++i) {
    FeatureVector v = enc.token_vector("tok" + std::to_string(i));
    for (double x : v) {
      CHECK(x >= -bound);
      CHECK(x <= bound);
    }
  }
}

TEST_CASE("different seeds give different token vectors") {
  HashingEncoder a(100, 32), b(101, 32);
  for (int i = 0; i < 100; ++i) {
    const std::string token = "tok" + std::to_string(i);
    CHECK(a.token_vector(token) != b.token_vector(token));
  }
}

TEST_CASE("encode rejects empty triads") {
  HashingEncoder enc(1, 4);
  CHECK_THROWS_AS(enc.encode(Triad{"", 0}), Error);
  CHECK_THROWS_AS(enc.encode(Triad{"... !!", 0}), Error);
}

TEST_CASE("pool sums over the token axis") {
  Matrix single(1, 3);
  single.at(0, 0) = 0.5;
  single.at(0, 1) = -1.0;
  single.at(0, 2) = 2.0;
  CHECK(pool(single) == FeatureVector{0.5, -1.0, 2.0});

  Matrix m(2, 2);
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(1, 0) = 3;
  m.at(1, 1) = 4;
  CHECK(pool(m) == FeatureVector{4.0, 6.0});
}

TEST_CASE("pool is linear") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.next_below(5);
    const std::size_t cols = 1 + rng.next_below(6);
    Matrix a(rows, cols), b(rows, cols), sum(rows, cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      a.data[i] = rng.next_uniform(-2, 2);
      b.data[i] = rng.next_uniform(-2, 2);
      sum.data[i] = a.data[i] + b.data[i];
    }
    FeatureVector lhs = pool(sum);
    FeatureVector pa = pool(a), pb = pool(b);
    for (std::size_t c = 0; c < cols; ++c) {
      CHECK(lhs[c] == doctest::Approx(pa[c] + pb[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("pooled features ignore token order") {
  HashingEncoder enc(7, 64);
  SplitMix64 rng(11);
  std::vector<std::string> words;
  for (int i = 0; i < 12; ++i) words.push_back("w" + std::to_string(i));
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> shuffled = words;
    deterministic_shuffle(shuffled, rng);
    std::string a_text, b_text;
    for (const auto& w : words) a_text += w + " ";
    for (const auto& w : shuffled) b_text += w + " ";
    FeatureVector a = pool(enc.encode(Triad{a_text, 0}));
    FeatureVector b = pool(enc.encode(Triad{b_text, 0}));
    REQUIRE(a.size() == b.size());
    for (std::size_t c = 0; c < a.size(); ++c) {
      CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("feature file round-trips exactly") {
  TempDir dir;
  SplitMix64 rng(21);
  std::vector<FeatureRow> rows;
  for (int i = 0; i < 5; ++i) {
    FeatureRow row;
    row.sample_id = "sample" + std::to_string(i / 2);
    row.hyp_index = i % 2;
    for (int c = 0; c < 4; ++c) row.values.push_back(rng.next_uniform(-3, 3));
    rows.push_back(row);
  }
  const std::string path = dir.file("features.tsv");
  write_feature_file(path, rows);
  FeatureFileEncoder enc = load_feature_file(path);
  CHECK(enc.dim() == 4);
  CHECK(enc.size() == 5);

  for (const FeatureRow& row : rows) {
    ReasoningSample s;
    s.sample_id = row.sample_id;
    s.hypotheses = {"a", "b", "c"};
    s.labels = {1, 0, 0};
    CHECK(enc.feature(s, row.hyp_index) == row.values);  // bitwise
  }
}

TEST_CASE("feature file errors") {
  TempDir dir;
  const std::string path = dir.file("features.tsv");

  SUBCASE("dimension mismatch across rows") {
    testing::write_text(path, "#dim=4\na\t0\t1\t2\t3\t4\nb\t0\t1\t2\t3\n");
    CHECK_THROWS_WITH_AS(load_feature_file(path),
                         doctest::Contains("dimension mismatch"), Error);
  }
  SUBCASE("duplicate key") {
    testing::write_text(path, "#dim=2\na\t0\t1\t2\na\t0\t3\t4\n");
    CHECK_THROWS_WITH_AS(load_feature_file(path),
                         doctest::Contains("duplicate key"), Error);
  }
  SUBCASE("missing header") {
    testing::write_text(path, "a\t0\t1\t2\n");
    CHECK_THROWS_AS(load_feature_file(path), Error);
  }
  SUBCASE("missing key lookup") {
    testing::write_text(path, "#dim=2\na\t0\t1\t2\n");
    FeatureFileEncoder enc = load_feature_file(path);
    ReasoningSample s;
    s.sample_id = "unknown";
    s.hypotheses = {"x", "y"};
    s.labels = {1, 0};
    CHECK_THROWS_WITH_AS(enc.feature(s, 0),
                         doctest::Contains("no stored feature"), Error);
  }
}

TEST_CASE("hashing encoder features flow through triads") {
  HashingEncoder enc(13, 32);
  ReasoningSample s{"id", "an observation", "another one", {"first", "second"},
                    {1, 0}};
  FeatureSequence f = enc.features(s);
  REQUIRE(f.size() == 2);
  CHECK(f[0].size() == 32);
  CHECK(f[0] != f[1]);
  CHECK(f[0] == enc.feature(s, 0));  // deterministic
}

TEST_SUITE_END();
