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

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "anli/corpus.hpp"
#include "anli/rng.hpp"

namespace anli::testing {

// Fresh scratch directory per call, cleaned up on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("anli_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

inline void write_records_files(const std::string& records_path,
                                const std::string& labels_path,
                                const std::vector<NarrativeRecord>& records) {
  std::ofstream rec(records_path);
  std::ofstream lab(labels_path);
  for (const NarrativeRecord& r : records) {
    nlohmann::json obj;
    obj["story_id"] = r.story_id;
    obj["obs1"] = r.obs1;
    obj["obs2"] = r.obs2;
    obj["hyp1"] = r.hyp1;
    obj["hyp2"] = r.hyp2;
    rec << obj.dump() << "\n";
    lab << r.label << "\n";
  }
}

inline std::string random_words(SplitMix64& rng, std::size_t count) {
  std::string text;
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) text += ' ';
    text += "word" + std::to_string(rng.next_below(40));
  }
  return text;
}

// Samples whose correct hypotheses carry marker tokens that offset their
// pooled feature vector by a constant. The markers dominate the per-sample
// noise (one context token, one id token per hypothesis), so the corpus is
// separable across samples, not just within them. N in [3, 4], at least one
// of each label.
inline std::vector<ReasoningSample> make_separable_corpus(std::size_t n_samples,
                                                          std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<ReasoningSample> samples;
  samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    ReasoningSample s;
    s.sample_id = "syn" + std::to_string(i);
    s.obs1 = "something changed ctx" + std::to_string(i);
    s.obs2 = "it settled afterwards";
    const std::size_t n = 3 + rng.next_below(2);
    const std::size_t n_correct = 1 + rng.next_below(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      const bool correct = j < n_correct;
      std::string text = "h" + std::to_string(i) + "x" + std::to_string(j);
      for (int b = 0; b < 4; ++b) {
        text += correct ? " upbeacon" : " downbeacon";
      }
      s.hypotheses.push_back(text);
      s.labels.push_back(correct ? 1 : 0);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

// Two-choice records covering n distinct contexts; grouping them yields
// n samples with N=2 and one-hot labels.
inline std::vector<NarrativeRecord> make_fixture_records(std::size_t n,
                                                         std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<NarrativeRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    NarrativeRecord r;
    r.story_id = "story" + std::to_string(i);
    r.obs1 = random_words(rng, 4) + " ctx" + std::to_string(i);
    r.obs2 = random_words(rng, 4);
    r.hyp1 = random_words(rng, 3) + " h" + std::to_string(i) + "a";
    r.hyp2 = random_words(rng, 3) + " h" + std::to_string(i) + "b";
    r.label = 1 + static_cast<int>(rng.next_below(2));
    if (r.label == 1) r.hyp1 += " upbeacon upbeacon";
    else r.hyp2 += " upbeacon upbeacon";
    records.push_back(std::move(r));
  }
  return records;
}

// Expands a grouped sample back into two-choice records such that regrouping
// reproduces it: every correct hypothesis gets labeled correct somewhere and
// every wrong hypothesis appears but is never picked.
inline std::vector<NarrativeRecord> flatten_sample(const ReasoningSample& s) {
  std::vector<std::string> correct, wrong;
  for (std::size_t j = 0; j < s.size(); ++j) {
    (s.labels[j] == 1 ? correct : wrong).push_back(s.hypotheses[j]);
  }
  std::vector<NarrativeRecord> records;
  for (std::size_t c = 0; c < correct.size(); ++c) {
    records.push_back(NarrativeRecord{s.sample_id, s.obs1, s.obs2, correct[c],
                                      wrong[c % wrong.size()], 1});
  }
  for (std::size_t w = 0; w < wrong.size(); ++w) {
    records.push_back(NarrativeRecord{s.sample_id, s.obs1, s.obs2, wrong[w],
                                      correct[w % correct.size()], 2});
  }
  return records;
}

inline double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||got - want||_2 / max(||want||_2, floor)
inline double relative_error(const std::vector<double>& got,
                             const std::vector<double>& want,
                             double floor = 1e-12) {
  std::vector<double> diff(got.size());
  for (std::size_t i = 0; i < got.size(); ++i) diff[i] = got[i] - want[i];
  return l2_norm(diff) / std::max(l2_norm(want), floor);
}

}  // namespace anli::testing
