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

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "anli/common.hpp"

namespace anli {

struct ScoredSample {
  std::string sample_id;
  std::vector<int> labels;
  ScoreVector scores;
};

struct EvalReport {
  double acc = 0.0;
  double auc = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_hypotheses = 0;
};

// Fraction of samples whose top-scored hypothesis is a correct one. Ties go
// to the lowest index.
inline double accuracy(const std::vector<ScoredSample>& samples) {
  if (samples.empty()) fail("accuracy requires at least one sample");
  std::size_t hits = 0;
  for (const ScoredSample& s : samples) {
    if (s.scores.size() < 2 || s.scores.size() != s.labels.size()) {
      fail("sample \"", s.sample_id, "\" needs >= 2 aligned scores and labels");
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < s.scores.size(); ++j) {
      if (s.scores[j] > s.scores[best]) best = j;
    }
    if (s.labels[best] == 1) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

// Probability that a uniformly random positive outscores a uniformly random
// negative, ties counting 1/2. Computed as the Mann-Whitney rank statistic.
inline double auc(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    fail("scores/labels size mismatch: ", scores.size(), " vs ",
         labels.size());
  }
  std::size_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) fail("labels must be 0/1, got ", y);
    (y == 1 ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    fail("AUC is undefined: need both classes, got ", n_pos, " positive and ",
         n_neg, " negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) positive_rank_sum += mean_rank;
    }
    i = j;
  }

  const double np = static_cast<double>(n_pos);
  const double numerator = positive_rank_sum - np * (np + 1.0) / 2.0;
  return numerator / (np * static_cast<double>(n_neg));
}

// Pools every hypothesis of every sample into one binary-scored population.
inline double pooled_auc(const std::vector<ScoredSample>& samples) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoredSample& s : samples) {
    scores.insert(scores.end(), s.scores.begin(), s.scores.end());
    labels.insert(labels.end(), s.labels.begin(), s.labels.end());
  }
  return auc(scores, labels);
}

// Per-hypothesis score table, enough to regenerate score-distribution plots.
inline void export_scores(const std::vector<ScoredSample>& samples,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open score file for writing: ", path);
  out << "sample_id\thyp_index\tlabel\tscore\n";
  for (const ScoredSample& s : samples) {
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      out << s.sample_id << '\t' << j << '\t' << s.labels[j] << '\t'
          << format_double(s.scores[j]) << '\n';
    }
  }
  if (!out) fail("write failed: ", path);
}

inline std::vector<ScoredSample> read_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open score file: ", path);
  std::string line;
  if (!std::getline(in, line) ||
      line != "sample_id\thyp_index\tlabel\tscore") {
    fail("score file ", path, ": bad header");
  }
  std::vector<ScoredSample> samples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cells.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cells.size() != 4) {
      fail("score file ", path, " line ", line_no, ": expected 4 columns");
    }
    if (samples.empty() || samples.back().sample_id != cells[0]) {
      samples.push_back(ScoredSample{cells[0], {}, {}});
    }
    samples.back().labels.push_back(std::stoi(cells[2]));
    samples.back().scores.push_back(std::strtod(cells[3].c_str(), nullptr));
  }
  return samples;
}

struct SweepCell {
  double gamma = 0.0;
  double alpha = 0.0;
  double acc = 0.0;
};

// Rectangular accuracy grid as CSV: rows are gamma values, columns alpha
// values, both ascending. Every (gamma, alpha) combination must appear
// exactly once.
inline void sweep_report(const std::vector<SweepCell>& cells,
                         const std::string& path) {
  if (cells.empty()) fail("sweep grid is empty");
  std::set<double> gamma_set, alpha_set;
  for (const SweepCell& c : cells) {
    gamma_set.insert(c.gamma);
    alpha_set.insert(c.alpha);
  }
  const std::vector<double> gammas(gamma_set.begin(), gamma_set.end());
  const std::vector<double> alphas(alpha_set.begin(), alpha_set.end());

  Matrix grid(gammas.size(), alphas.size());
  Matrix filled(gammas.size(), alphas.size());
  for (const SweepCell& c : cells) {
    const std::size_t r =
        std::lower_bound(gammas.begin(), gammas.end(), c.gamma) -
        gammas.begin();
    const std::size_t col =
        std::lower_bound(alphas.begin(), alphas.end(), c.alpha) -
        alphas.begin();
    if (filled.at(r, col) != 0.0) {
      fail("duplicate sweep cell gamma=", format_double(c.gamma),
           " alpha=", format_double(c.alpha));
    }
    filled.at(r, col) = 1.0;
    grid.at(r, col) = c.acc;
  }
  for (std::size_t r = 0; r < gammas.size(); ++r) {
    for (std::size_t col = 0; col < alphas.size(); ++col) {
      if (filled.at(r, col) == 0.0) {
        fail("sweep grid is missing cell gamma=", format_double(gammas[r]),
             " alpha=", format_double(alphas[col]));
      }
    }
  }

  std::ofstream out(path);
  if (!out) fail("cannot open sweep file for writing: ", path);
  out << "gamma";
  for (double a : alphas) out << ',' << format_double(a);
  out << '\n';
  for (std::size_t r = 0; r < gammas.size(); ++r) {
    out << format_double(gammas[r]);
    for (std::size_t col = 0; col < alphas.size(); ++col) {
      out << ',' << format_double(grid.at(r, col));
    }
    out << '\n';
  }
  if (!out) fail("write failed: ", path);
}

}  // namespace anli
