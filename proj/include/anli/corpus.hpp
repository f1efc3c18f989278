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
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "anli/common.hpp"
#include "anli/rng.hpp"

#include "json.hpp"

namespace anli {

// One two-choice record as distributed: a narrative context (obs1 -> obs2),
// two candidate hypotheses, and which of the two is the plausible one.
struct NarrativeRecord {
  std::string story_id;
  std::string obs1;
  std::string obs2;
  std::string hyp1;
  std::string hyp2;
  int label = 0;  // 1 or 2, selects hyp1 or hyp2
};

// A narrative context with all candidate hypotheses collected for it and a
// binary plausibility label per hypothesis.
struct ReasoningSample {
  std::string sample_id;
  std::string obs1;
  std::string obs2;
  std::vector<std::string> hypotheses;
  std::vector<int> labels;  // 0/1, aligned with hypotheses

  std::size_t size() const { return hypotheses.size(); }
};

// The scored text unit: both observations wrapped around one hypothesis.
struct Triad {
  std::string text;
  std::size_t hypothesis_index = 0;
};

struct LoadedRecords {
  std::vector<NarrativeRecord> records;
  std::vector<std::string> warnings;
};

// Records file: one JSON object per line with keys story_id/obs1/obs2/hyp1/hyp2.
// Labels file: one integer (1 or 2) per line, aligned with the records by line
// number. Duplicate hypothesis texts within a record only warn.
inline LoadedRecords load_records(const std::string& records_path,
                                  const std::string& labels_path) {
  std::ifstream rec_in(records_path);
  if (!rec_in) fail("cannot open records file: ", records_path);
  std::ifstream lab_in(labels_path);
  if (!lab_in) fail("cannot open labels file: ", labels_path);

  std::vector<int> labels;
  {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lab_in, line)) {
      ++line_no;
      std::size_t pos = 0;
      int value = 0;
      try {
        value = std::stoi(line, &pos);
      } catch (const std::exception&) {
        fail("labels file ", labels_path, " line ", line_no,
             ": expected an integer, got \"", line, "\"");
      }
      while (pos < line.size() &&
             (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) {
        ++pos;
      }
      if (pos != line.size()) {
        fail("labels file ", labels_path, " line ", line_no,
             ": trailing content after integer");
      }
      if (value != 1 && value != 2) {
        fail("labels file ", labels_path, " line ", line_no,
             ": label must be 1 or 2, got ", value);
      }
      labels.push_back(value);
    }
  }

  LoadedRecords out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(rec_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      fail("records file ", records_path, " line ", line_no,
           ": not a JSON object");
    }
    auto field = [&](const char* key) -> std::string {
      if (!obj.contains(key) || !obj[key].is_string()) {
        fail("records file ", records_path, " line ", line_no,
             ": missing string field \"", key, "\"");
      }
      return obj[key].get<std::string>();
    };
    NarrativeRecord rec;
    rec.story_id = field("story_id");
    rec.obs1 = field("obs1");
    rec.obs2 = field("obs2");
    rec.hyp1 = field("hyp1");
    rec.hyp2 = field("hyp2");
    if (rec.obs1.empty() || rec.obs2.empty()) {
      fail("records file ", records_path, " line ", line_no,
           ": observations must be nonempty");
    }
    if (rec.hyp1 == rec.hyp2) {
      out.warnings.push_back(concat("records file line ", line_no,
                                    ": hyp1 equals hyp2 (story_id ",
                                    rec.story_id, ")"));
    }
    out.records.push_back(std::move(rec));
  }

  if (out.records.size() != labels.size()) {
    fail("record/label count mismatch: ", out.records.size(), " records vs ",
         labels.size(), " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.records[i].label = labels[i];
  }
  return out;
}

// Merges records that share the same observation pair into one sample.
// Hypotheses keep first-appearance order; a hypothesis is labeled correct if
// any contributing record picked it.
inline std::vector<ReasoningSample> group_by_context(
    const std::vector<NarrativeRecord>& records) {
  std::vector<ReasoningSample> samples;
  std::unordered_map<std::string, std::size_t> by_context;
  std::vector<std::unordered_map<std::string, std::size_t>> hyp_index;

  for (const NarrativeRecord& rec : records) {
    const std::string context_key = rec.obs1 + '\x1f' + rec.obs2;
    auto [it, inserted] = by_context.emplace(context_key, samples.size());
    if (inserted) {
      ReasoningSample s;
      s.sample_id = rec.story_id;
      s.obs1 = rec.obs1;
      s.obs2 = rec.obs2;
      samples.push_back(std::move(s));
      hyp_index.emplace_back();
    }
    ReasoningSample& sample = samples[it->second];
    auto& index = hyp_index[it->second];
    auto add_hyp = [&](const std::string& text, bool correct) {
      auto [hit, fresh] = index.emplace(text, sample.hypotheses.size());
      if (fresh) {
        sample.hypotheses.push_back(text);
        sample.labels.push_back(correct ? 1 : 0);
      } else if (correct) {
        sample.labels[hit->second] = 1;
      }
    };
    add_hyp(rec.hyp1, rec.label == 1);
    add_hyp(rec.hyp2, rec.label == 2);
  }
  return samples;
}

inline constexpr std::string_view kTriadOpen = "<s>";
inline constexpr std::string_view kTriadSep = "</s>";

// Backslash-escapes boundary markers so triad text round-trips losslessly.
inline std::string escape_markers(std::string_view text) {
  std::string doubled;
  doubled.reserve(text.size());
  for (char c : text) {
    if (c == '\\') doubled += "\\\\";
    else doubled.push_back(c);
  }
  std::string out;
  out.reserve(doubled.size());
  for (std::size_t i = 0; i < doubled.size();) {
    if (doubled.compare(i, kTriadOpen.size(), kTriadOpen) == 0) {
      out.push_back('\\');
      out.append(kTriadOpen);
      i += kTriadOpen.size();
    } else if (doubled.compare(i, kTriadSep.size(), kTriadSep) == 0) {
      out.push_back('\\');
      out.append(kTriadSep);
      i += kTriadSep.size();
    } else {
      out.push_back(doubled[i]);
      ++i;
    }
  }
  return out;
}

inline std::string unescape_markers(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      out.push_back(text[i + 1]);
      ++i;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

namespace detail {

// Position of the first occurrence of `pattern` preceded by an even number of
// backslashes, or npos.
inline std::size_t find_unescaped(std::string_view text,
                                  std::string_view pattern, std::size_t from) {
  for (std::size_t pos = text.find(pattern, from);
       pos != std::string_view::npos; pos = text.find(pattern, pos + 1)) {
    std::size_t backslashes = 0;
    while (backslashes < pos && text[pos - 1 - backslashes] == '\\') {
      ++backslashes;
    }
    if (backslashes % 2 == 0) return pos;
  }
  return std::string_view::npos;
}

}  // namespace detail

inline std::string triad_text(std::string_view obs1, std::string_view hyp,
                              std::string_view obs2) {
  std::string out;
  out.append(kTriadOpen);
  out.push_back(' ');
  out += escape_markers(obs1);
  out.append(" ").append(kTriadSep).append(" ");
  out += escape_markers(hyp);
  out.append(" ").append(kTriadSep).append(" ");
  out += escape_markers(obs2);
  out.append(" ").append(kTriadSep);
  return out;
}

inline Triad make_triad(const ReasoningSample& sample, std::size_t hyp) {
  if (hyp >= sample.hypotheses.size()) {
    fail("hypothesis index ", hyp, " out of range for sample ",
         sample.sample_id);
  }
  return Triad{triad_text(sample.obs1, sample.hypotheses[hyp], sample.obs2),
               hyp};
}

inline std::vector<Triad> make_triads(const ReasoningSample& sample) {
  std::vector<Triad> triads;
  triads.reserve(sample.hypotheses.size());
  for (std::size_t j = 0; j < sample.hypotheses.size(); ++j) {
    triads.push_back(make_triad(sample, j));
  }
  return triads;
}

struct TriadParts {
  std::string obs1;
  std::string hypothesis;
  std::string obs2;
};

// Inverse of triad_text.
inline TriadParts split_triad(std::string_view text) {
  const std::string open_prefix = std::string(kTriadOpen) + ' ';
  if (text.substr(0, open_prefix.size()) != open_prefix) {
    fail("malformed triad: missing leading marker");
  }
  std::string_view body = text.substr(open_prefix.size());

  const std::string inner = std::string(" ") + std::string(kTriadSep) + ' ';
  const std::string trailer = std::string(" ") + std::string(kTriadSep);

  std::size_t first = detail::find_unescaped(body, inner, 0);
  if (first == std::string_view::npos) fail("malformed triad: one separator");
  std::size_t second = detail::find_unescaped(body, inner, first + inner.size());
  if (second == std::string_view::npos) fail("malformed triad: two separators");
  if (body.size() < second + inner.size() + trailer.size() ||
      body.substr(body.size() - trailer.size()) != trailer ||
      detail::find_unescaped(body, trailer, body.size() - trailer.size()) !=
          body.size() - trailer.size()) {
    fail("malformed triad: missing trailing marker");
  }

  TriadParts parts;
  parts.obs1 = unescape_markers(body.substr(0, first));
  parts.hypothesis = unescape_markers(
      body.substr(first + inner.size(), second - first - inner.size()));
  parts.obs2 = unescape_markers(body.substr(
      second + inner.size(), body.size() - trailer.size() - second - inner.size()));
  return parts;
}

// Unescaped boundary markers in a triad text; a well-formed triad has 4.
inline std::size_t count_markers(std::string_view text) {
  std::size_t count = 0;
  for (std::string_view marker : {kTriadOpen, kTriadSep}) {
    std::size_t pos = 0;
    while ((pos = detail::find_unescaped(text, marker, pos)) !=
           std::string_view::npos) {
      ++count;
      pos += marker.size();
    }
  }
  return count;
}

// Deterministic choice of ceil(fraction * n) samples without replacement,
// returned in their original order.
inline std::vector<ReasoningSample> subsample(
    const std::vector<ReasoningSample>& samples, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    fail("subsample fraction must be in (0, 1], got ", fraction);
  }
  if (samples.empty()) return {};

  const double scaled = fraction * static_cast<double>(samples.size());
  auto count = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
  if (count < 1) count = 1;
  if (count > samples.size()) count = samples.size();

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.next_below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());

  std::vector<ReasoningSample> out;
  out.reserve(count);
  for (std::size_t idx : order) out.push_back(samples[idx]);
  return out;
}

struct TrainablePartition {
  std::vector<ReasoningSample> trainable;
  std::vector<ReasoningSample> quarantined;
};

// The loss needs both a correct and a wrong hypothesis per sample; samples
// without both populations are set aside for diagnostics.
inline TrainablePartition partition_trainable(
    std::vector<ReasoningSample> samples) {
  TrainablePartition split;
  for (ReasoningSample& sample : samples) {
    std::size_t correct = 0;
    for (int y : sample.labels) correct += static_cast<std::size_t>(y);
    const bool usable = sample.size() >= 2 && correct >= 1 &&
                        correct < sample.size();
    (usable ? split.trainable : split.quarantined)
        .push_back(std::move(sample));
  }
  return split;
}

}  // namespace anli
