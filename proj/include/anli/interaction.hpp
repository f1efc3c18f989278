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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "anli/common.hpp"
#include "anli/encoder.hpp"
#include "anli/rng.hpp"

namespace anli {

// One LSTM gate: input map, recurrent map, bias.
struct GateParams {
  Matrix input_w;             // hidden_dim x input_dim
  Matrix recur_w;             // hidden_dim x hidden_dim
  std::vector<double> bias;   // hidden_dim

  GateParams() = default;
  GateParams(std::size_t input_dim, std::size_t hidden_dim)
      : input_w(hidden_dim, input_dim),
        recur_w(hidden_dim, hidden_dim),
        bias(hidden_dim, 0.0) {}
};

struct DirectionParams {
  GateParams in_gate, forget_gate, out_gate, candidate;

  DirectionParams() = default;
  DirectionParams(std::size_t input_dim, std::size_t hidden_dim)
      : in_gate(input_dim, hidden_dim),
        forget_gate(input_dim, hidden_dim),
        out_gate(input_dim, hidden_dim),
        candidate(input_dim, hidden_dim) {}
};

// One BiLSTM shared across all positions plus a linear head mapping the
// concatenated hidden state (width 2*hidden_dim) to a scalar score. Weights
// are shared across positions so samples may have any number of hypotheses.
struct BiLstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  DirectionParams fwd, bwd;
  std::vector<double> head_w;  // 2 * hidden_dim
  double head_b = 0.0;

  BiLstmParams() = default;
  BiLstmParams(std::size_t d, std::size_t d_h)
      : input_dim(d),
        hidden_dim(d_h),
        fwd(d, d_h),
        bwd(d, d_h),
        head_w(2 * d_h, 0.0) {
    if (d < 1 || d_h < 1) fail("BiLSTM dims must be >= 1");
  }
};

struct ParamBlockRef {
  std::string name;
  double* data;
  std::size_t size;
};

struct ConstParamBlockRef {
  std::string name;
  const double* data;
  std::size_t size;
};

namespace detail {

template <typename BlockRef, typename Params>
std::vector<BlockRef> enumerate_blocks(Params& p) {
  std::vector<BlockRef> blocks;
  auto dir = [&](auto& d, const char* prefix) {
    const std::pair<const char*, decltype(&d.in_gate)> gates[] = {
        {"i", &d.in_gate}, {"f", &d.forget_gate},
        {"o", &d.out_gate}, {"g", &d.candidate}};
    for (auto& [g, gate] : gates) {
      blocks.push_back({concat(prefix, ".", g, ".w"), gate->input_w.data.data(),
                        gate->input_w.data.size()});
      blocks.push_back({concat(prefix, ".", g, ".u"), gate->recur_w.data.data(),
                        gate->recur_w.data.size()});
      blocks.push_back(
          {concat(prefix, ".", g, ".b"), gate->bias.data(), gate->bias.size()});
    }
  };
  dir(p.fwd, "fwd");
  dir(p.bwd, "bwd");
  blocks.push_back({"head.w", p.head_w.data(), p.head_w.size()});
  blocks.push_back({"head.b", &p.head_b, 1});
  return blocks;
}

}  // namespace detail

inline std::vector<ParamBlockRef> param_blocks(BiLstmParams& p) {
  return detail::enumerate_blocks<ParamBlockRef>(p);
}

inline std::vector<ConstParamBlockRef> param_blocks(const BiLstmParams& p) {
  return detail::enumerate_blocks<ConstParamBlockRef>(p);
}

inline std::size_t param_count(const BiLstmParams& p) {
  std::size_t n = 0;
  for (const auto& b : param_blocks(p)) n += b.size;
  return n;
}

inline BiLstmParams zero_like(const BiLstmParams& p) {
  return BiLstmParams(p.input_dim, p.hidden_dim);
}

// Seeded uniform init in [-1/sqrt(d_h), +1/sqrt(d_h)]; forget-gate biases are
// then set to 1.0.
inline BiLstmParams init_params(std::uint64_t seed, std::size_t input_dim,
                                std::size_t hidden_dim) {
  BiLstmParams p(input_dim, hidden_dim);
  SplitMix64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& block : param_blocks(p)) {
    for (std::size_t i = 0; i < block.size; ++i) {
      block.data[i] = rng.next_uniform(-bound, bound);
    }
  }
  std::fill(p.fwd.forget_gate.bias.begin(), p.fwd.forget_gate.bias.end(), 1.0);
  std::fill(p.bwd.forget_gate.bias.begin(), p.bwd.forget_gate.bias.end(), 1.0);
  return p;
}

// Everything the backward pass needs, stored per sequence position.
struct DirectionTrace {
  std::vector<std::vector<double>> in_gate, forget_gate, out_gate, candidate;
  std::vector<std::vector<double>> cell, cell_tanh, hidden;

  void resize(std::size_t n) {
    for (auto* field : {&in_gate, &forget_gate, &out_gate, &candidate, &cell,
                        &cell_tanh, &hidden}) {
      field->assign(n, {});
    }
  }
};

struct InteractionTrace {
  DirectionTrace fwd, bwd;
  std::vector<std::vector<double>> concat_hidden;  // N x 2*hidden_dim
  ScoreVector scores;

  std::size_t length() const { return scores.size(); }
};

struct ForwardResult {
  ScoreVector scores;
  InteractionTrace trace;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void run_direction(const DirectionParams& dp,
                          const FeatureSequence& features, std::size_t hidden,
                          bool reverse, DirectionTrace& trace) {
  const std::size_t n = features.size();
  trace.resize(n);
  std::vector<double> h_prev(hidden, 0.0), c_prev(hidden, 0.0);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = reverse ? n - 1 - step : step;
    const FeatureVector& x = features[pos];

    auto preact = [&](const GateParams& gate) {
      std::vector<double> a = gate.bias;
      matvec_add(a, gate.input_w, x);
      matvec_add(a, gate.recur_w, h_prev);
      return a;
    };
    std::vector<double> ai = preact(dp.in_gate);
    std::vector<double> af = preact(dp.forget_gate);
    std::vector<double> ao = preact(dp.out_gate);
    std::vector<double> ag = preact(dp.candidate);

    std::vector<double> c(hidden), ct(hidden), h(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
      ai[k] = sigmoid(ai[k]);
      af[k] = sigmoid(af[k]);
      ao[k] = sigmoid(ao[k]);
      ag[k] = std::tanh(ag[k]);
      c[k] = af[k] * c_prev[k] + ai[k] * ag[k];
      ct[k] = std::tanh(c[k]);
      h[k] = ao[k] * ct[k];
    }
    trace.in_gate[pos] = std::move(ai);
    trace.forget_gate[pos] = std::move(af);
    trace.out_gate[pos] = std::move(ao);
    trace.candidate[pos] = std::move(ag);
    trace.cell[pos] = c;
    trace.cell_tanh[pos] = std::move(ct);
    trace.hidden[pos] = h;
    c_prev = std::move(c);
    h_prev = std::move(h);
  }
}

}  // namespace detail

// Runs both recurrences over the N per-hypothesis feature vectors and scores
// each concatenated hidden state with the linear head.
inline ForwardResult bilstm_forward(const BiLstmParams& p,
                                    const FeatureSequence& features) {
  if (features.empty()) fail("forward requires at least one feature vector");
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].size() != p.input_dim) {
      fail("feature ", j, " has width ", features[j].size(), ", expected ",
           p.input_dim);
    }
    if (!all_finite(features[j])) fail("feature ", j, " is not finite");
  }

  ForwardResult result;
  InteractionTrace& trace = result.trace;
  detail::run_direction(p.fwd, features, p.hidden_dim, /*reverse=*/false,
                        trace.fwd);
  detail::run_direction(p.bwd, features, p.hidden_dim, /*reverse=*/true,
                        trace.bwd);

  const std::size_t n = features.size();
  trace.concat_hidden.assign(n, std::vector<double>(2 * p.hidden_dim));
  trace.scores.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto& h = trace.concat_hidden[j];
    for (std::size_t k = 0; k < p.hidden_dim; ++k) {
      h[k] = trace.fwd.hidden[j][k];
      h[p.hidden_dim + k] = trace.bwd.hidden[j][k];
    }
    trace.scores[j] = dot(p.head_w, h) + p.head_b;
  }
  result.scores = trace.scores;
  return result;
}

struct BilstmGradients {
  BiLstmParams params;        // same shapes as the parameters
  FeatureSequence features;   // gradient w.r.t. every input vector
};

namespace detail {

inline void backprop_direction(const DirectionParams& dp,
                               const FeatureSequence& features,
                               const DirectionTrace& trace, std::size_t hidden,
                               bool reverse,
                               const std::vector<std::vector<double>>& dh_head,
                               DirectionParams& grads,
                               FeatureSequence& dfeatures) {
  const std::size_t n = features.size();
  std::vector<double> dh_carry(hidden, 0.0), dc_carry(hidden, 0.0);
  std::vector<double> da_i(hidden), da_f(hidden), da_o(hidden), da_g(hidden);

  // Walk positions in reverse processing order.
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t pos = reverse ? step : n - 1 - step;
    const bool first_step = (reverse ? pos == n - 1 : pos == 0);
    const std::size_t prev = reverse ? pos + 1 : pos - 1;

    const auto& i = trace.in_gate[pos];
    const auto& f = trace.forget_gate[pos];
    const auto& o = trace.out_gate[pos];
    const auto& g = trace.candidate[pos];
    const auto& ct = trace.cell_tanh[pos];

    for (std::size_t k = 0; k < hidden; ++k) {
      const double dh = dh_head[pos][k] + dh_carry[k];
      const double do_ = dh * ct[k];
      const double dc = dc_carry[k] + dh * o[k] * (1.0 - ct[k] * ct[k]);
      const double c_prev = first_step ? 0.0 : trace.cell[prev][k];
      const double df = dc * c_prev;
      const double di = dc * g[k];
      const double dg = dc * i[k];
      dc_carry[k] = dc * f[k];
      da_i[k] = di * i[k] * (1.0 - i[k]);
      da_f[k] = df * f[k] * (1.0 - f[k]);
      da_o[k] = do_ * o[k] * (1.0 - o[k]);
      da_g[k] = dg * (1.0 - g[k] * g[k]);
    }

    static const std::vector<double> kEmpty;
    const std::vector<double>& h_prev = first_step ? kEmpty : trace.hidden[prev];
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);

    auto accumulate = [&](const GateParams& gate, GateParams& ggate,
                          const std::vector<double>& da) {
      add_outer(ggate.input_w, da, features[pos]);
      if (!first_step) add_outer(ggate.recur_w, da, h_prev);
      for (std::size_t k = 0; k < hidden; ++k) ggate.bias[k] += da[k];
      matvec_transpose_add(dfeatures[pos], gate.input_w, da);
      matvec_transpose_add(dh_carry, gate.recur_w, da);
    };
    accumulate(dp.in_gate, grads.in_gate, da_i);
    accumulate(dp.forget_gate, grads.forget_gate, da_f);
    accumulate(dp.out_gate, grads.out_gate, da_o);
    accumulate(dp.candidate, grads.candidate, da_g);
  }
}

}  // namespace detail

// Exact reverse-mode gradients through the head, the concatenation, and both
// recurrences. `trace` must come from bilstm_forward on the same inputs.
inline BilstmGradients bilstm_backward(const BiLstmParams& p,
                                       const FeatureSequence& features,
                                       const InteractionTrace& trace,
                                       const ScoreVector& upstream) {
  const std::size_t n = features.size();
  if (trace.length() != n || upstream.size() != n) {
    fail("backward shape mismatch: ", n, " features, ", trace.length(),
         " trace positions, ", upstream.size(), " upstream values");
  }

  BilstmGradients out;
  out.params = zero_like(p);
  out.features.assign(n, std::vector<double>(p.input_dim, 0.0));

  std::vector<std::vector<double>> dh_fwd(n), dh_bwd(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double ds = upstream[j];
    out.params.head_b += ds;
    const auto& h = trace.concat_hidden[j];
    dh_fwd[j].resize(p.hidden_dim);
    dh_bwd[j].resize(p.hidden_dim);
    for (std::size_t k = 0; k < 2 * p.hidden_dim; ++k) {
      out.params.head_w[k] += ds * h[k];
    }
    for (std::size_t k = 0; k < p.hidden_dim; ++k) {
      dh_fwd[j][k] = ds * p.head_w[k];
      dh_bwd[j][k] = ds * p.head_w[p.hidden_dim + k];
    }
  }

  detail::backprop_direction(p.fwd, features, trace.fwd, p.hidden_dim,
                             /*reverse=*/false, dh_fwd, out.params.fwd,
                             out.features);
  detail::backprop_direction(p.bwd, features, trace.bwd, p.hidden_dim,
                             /*reverse=*/true, dh_bwd, out.params.bwd,
                             out.features);
  return out;
}

// --- checkpoint container ---------------------------------------------------
//
// Versioned text format, one block per line, doubles printed so the read
// path restores them exactly:
//
//   anli.checkpoint.v1
//   dims <input_dim> <hidden_dim>
//   meta <key> <value...>
//   block <name> <count> <v1> ... <vn>
//   end

using CheckpointMeta = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
  BiLstmParams params;
  CheckpointMeta meta;
};

inline void save_checkpoint(const std::string& path, const BiLstmParams& p,
                            const CheckpointMeta& meta = {}) {
  std::ofstream out(path);
  if (!out) fail("cannot open checkpoint for writing: ", path);
  out << "anli.checkpoint.v1\n";
  out << "dims " << p.input_dim << ' ' << p.hidden_dim << '\n';
  for (const auto& [key, value] : meta) {
    out << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& block : param_blocks(p)) {
    out << "block " << block.name << ' ' << block.size;
    for (std::size_t i = 0; i < block.size; ++i) {
      out << ' ' << format_double(block.data[i]);
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) fail("write failed: ", path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open checkpoint: ", path);

  auto parse_error = [&](const std::string& why) -> void {
    fail("checkpoint parse error in ", path, ": ", why);
  };

  std::string line;
  if (!std::getline(in, line) || line != "anli.checkpoint.v1") {
    parse_error("bad or missing version line");
  }
  if (!std::getline(in, line) || line.rfind("dims ", 0) != 0) {
    parse_error("missing dims line");
  }
  std::size_t input_dim = 0, hidden_dim = 0;
  if (std::sscanf(line.c_str(), "dims %zu %zu", &input_dim, &hidden_dim) != 2 ||
      input_dim < 1 || hidden_dim < 1) {
    parse_error("bad dims line");
  }

  Checkpoint ck;
  ck.params = BiLstmParams(input_dim, hidden_dim);
  auto blocks = param_blocks(ck.params);
  std::vector<bool> seen(blocks.size(), false);

  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (key.empty()) parse_error("meta line without key");
      ck.meta.emplace_back(key, value);
    } else if (tag == "block") {
      std::string name;
      std::size_t count = 0;
      if (!(ls >> name >> count)) parse_error("bad block line");
      std::size_t which = blocks.size();
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].name == name) which = b;
      }
      if (which == blocks.size()) parse_error(concat("unknown block ", name));
      if (seen[which]) parse_error(concat("duplicate block ", name));
      if (count != blocks[which].size) {
        parse_error(concat("block ", name, " has ", count, " values, expected ",
                           blocks[which].size));
      }
      for (std::size_t i = 0; i < count; ++i) {
        if (!(ls >> blocks[which].data[i])) {
          parse_error(concat("block ", name, " is short"));
        }
      }
      double spare;
      if (ls >> spare) parse_error(concat("block ", name, " has extra values"));
      seen[which] = true;
    } else {
      parse_error(concat("unexpected line tag \"", tag, "\""));
    }
  }
  if (!ended) parse_error("missing end line");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (!seen[b]) parse_error(concat("missing block ", blocks[b].name));
  }
  return ck;
}

inline std::string meta_value(const CheckpointMeta& meta,
                              const std::string& key,
                              const std::string& fallback = "") {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  return fallback;
}

}  // namespace anli
