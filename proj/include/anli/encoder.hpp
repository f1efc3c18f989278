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
#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "anli/common.hpp"
#include "anli/corpus.hpp"
#include "anli/rng.hpp"

namespace anli {

// Token-by-feature embedding matrix produced for one triad.
using EmbeddingMatrix = Matrix;

using FeatureVector = std::vector<double>;
using FeatureSequence = std::vector<FeatureVector>;

// Column-wise sum over the token axis.
inline FeatureVector pool(const EmbeddingMatrix& m) {
  if (m.rows < 1) fail("pool requires at least one token row");
  FeatureVector out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += row[c];
  }
  return out;
}

// Context coding contract: anything that turns one hypothesis of one sample
// into a fixed-width feature vector. Implementations are immutable after
// construction, so concurrent calls are safe.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual std::size_t dim() const = 0;
  virtual FeatureVector feature(const ReasoningSample& sample,
                                std::size_t hyp_index) const = 0;

  FeatureSequence features(const ReasoningSample& sample) const {
    FeatureSequence out;
    out.reserve(sample.size());
    for (std::size_t j = 0; j < sample.size(); ++j) {
      out.push_back(feature(sample, j));
    }
    return out;
  }
};

// Stand-in for a pretrained encoder: every token gets a vector generated by a
// deterministic stream keyed on (vocab_seed, token bytes), entries uniform in
// [-1/sqrt(d), +1/sqrt(d)]. No out-of-vocabulary failures by construction.
class HashingEncoder final : public Encoder {
 public:
  HashingEncoder(std::uint64_t vocab_seed, std::size_t dim)
      : vocab_seed_(vocab_seed), dim_(dim) {
    if (dim_ < 1) fail("encoder width must be >= 1");
  }

  std::size_t dim() const override { return dim_; }

  // Lowercase, split on whitespace and punctuation. Bytes outside ASCII are
  // kept as token characters.
  static std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
      const bool token_char = std::isalnum(c) != 0 || c >= 0x80;
      if (token_char) {
        current.push_back(static_cast<char>(std::tolower(c)));
      } else if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
  }

  FeatureVector token_vector(std::string_view token) const {
    std::string folded(token);
    for (char& c : folded) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    SplitMix64 stream(combine_seeds(vocab_seed_, fnv1a64(folded)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim_));
    FeatureVector v(dim_);
    for (double& x : v) x = stream.next_uniform(-bound, bound);
    return v;
  }

  EmbeddingMatrix encode(const Triad& triad) const {
    if (triad.text.empty()) fail("cannot encode an empty triad");
    const std::vector<std::string> tokens = tokenize(triad.text);
    if (tokens.empty()) fail("triad text has no tokens: \"", triad.text, "\"");
    EmbeddingMatrix m(tokens.size(), dim_);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const FeatureVector v = token_vector(tokens[t]);
      for (std::size_t c = 0; c < dim_; ++c) m.at(t, c) = v[c];
    }
    return m;
  }

  FeatureVector feature(const ReasoningSample& sample,
                        std::size_t hyp_index) const override {
    return pool(encode(make_triad(sample, hyp_index)));
  }

 private:
  std::uint64_t vocab_seed_;
  std::size_t dim_;
};

struct FeatureRow {
  std::string sample_id;
  std::size_t hyp_index = 0;
  FeatureVector values;
};

namespace detail {

inline std::string feature_key(std::string_view sample_id,
                               std::size_t hyp_index) {
  return concat(sample_id, '\t', hyp_index);
}

}  // namespace detail

// Serves externally computed feature vectors keyed by (sample_id, hyp_index).
class FeatureFileEncoder final : public Encoder {
 public:
  FeatureFileEncoder(std::size_t dim,
                     std::unordered_map<std::string, FeatureVector> table)
      : dim_(dim), table_(std::move(table)) {}

  std::size_t dim() const override { return dim_; }

  FeatureVector feature(const ReasoningSample& sample,
                        std::size_t hyp_index) const override {
    auto it = table_.find(detail::feature_key(sample.sample_id, hyp_index));
    if (it == table_.end()) {
      fail("no stored feature for sample \"", sample.sample_id,
           "\" hypothesis ", hyp_index);
    }
    return it->second;
  }

  std::size_t size() const { return table_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, FeatureVector> table_;
};

// Feature TSV: header "#dim=<d>", then "sample_id<TAB>hyp_index<TAB>v1..vd"
// with doubles printed so they parse back exactly.
inline void write_feature_file(const std::string& path,
                               const std::vector<FeatureRow>& rows) {
  std::ofstream out(path);
  if (!out) fail("cannot open feature file for writing: ", path);
  std::size_t dim = rows.empty() ? 0 : rows.front().values.size();
  out << "#dim=" << dim << "\n";
  for (const FeatureRow& row : rows) {
    if (row.values.size() != dim) {
      fail("feature row for sample \"", row.sample_id, "\" has width ",
           row.values.size(), ", expected ", dim);
    }
    out << row.sample_id << '\t' << row.hyp_index;
    for (double v : row.values) out << '\t' << format_double(v);
    out << '\n';
  }
  if (!out) fail("write failed: ", path);
}

inline FeatureFileEncoder load_feature_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open feature file: ", path);

  std::string line;
  if (!std::getline(in, line)) fail("feature file is empty: ", path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("#dim=", 0) != 0) {
    fail("feature file ", path, ": first line must be \"#dim=<d>\"");
  }
  std::size_t dim = 0;
  try {
    dim = std::stoul(line.substr(5));
  } catch (const std::exception&) {
    fail("feature file ", path, ": bad dimension header \"", line, "\"");
  }
  if (dim < 1) fail("feature file ", path, ": dimension must be >= 1");

  std::unordered_map<std::string, FeatureVector> table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() != dim + 2) {
      fail("feature file ", path, " line ", line_no, ": dimension mismatch (",
           cells.size() >= 2 ? cells.size() - 2 : 0, " values, expected ", dim,
           ")");
    }
    std::size_t hyp_index = 0;
    try {
      hyp_index = std::stoul(cells[1]);
    } catch (const std::exception&) {
      fail("feature file ", path, " line ", line_no, ": bad hypothesis index");
    }
    FeatureVector values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string& cell = cells[i + 2];
      char* end = nullptr;
      values[i] = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size() || cell.empty()) {
        fail("feature file ", path, " line ", line_no, ": bad value \"", cell,
             "\"");
      }
    }
    const std::string key = detail::feature_key(cells[0], hyp_index);
    if (!table.emplace(key, std::move(values)).second) {
      fail("feature file ", path, " line ", line_no,
           ": duplicate key (sample \"", cells[0], "\", hypothesis ",
           hyp_index, ")");
    }
  }
  return FeatureFileEncoder(dim, std::move(table));
}

}  // namespace anli
