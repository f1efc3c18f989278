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

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "anli/common.hpp"
#include "anli/corpus.hpp"
#include "anli/encoder.hpp"
#include "anli/interaction.hpp"
#include "anli/loss.hpp"
#include "anli/metrics.hpp"
#include "anli/rng.hpp"

namespace anli {

enum class OptimizerKind { kGradientDescent, kAdam };

struct TrainConfig {
  double learning_rate = 1e-2;
  std::size_t batch_size = 1;
  std::size_t epochs = 1;
  FocalParams focal{};
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  std::uint64_t encoder_seed = 3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::size_t hidden_dim = 0;  // 0: match the encoder width
};

inline void validate_config(const TrainConfig& config) {
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    fail("learning rate must be >= 0, got ", config.learning_rate);
  }
  if (config.batch_size < 1) fail("batch size must be >= 1");
  if (config.epochs < 1) fail("epochs must be >= 1");
  validate_focal_params(config.focal);
}

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step = 0;
};

struct TrainState {
  BiLstmParams params;
  std::size_t step = 0;
  std::vector<std::pair<std::size_t, double>> loss_history;
  std::uint64_t shuffle_rng_state = 0;
  AdamState adam;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

inline constexpr std::array<double, 5> kDefaultFractions = {0.01, 0.02, 0.05,
                                                            0.10, 1.00};

namespace detail {

inline void apply_update(const TrainConfig& config,
                         std::vector<ParamBlockRef>& params,
                         const std::vector<ConstParamBlockRef>& grads,
                         AdamState& adam) {
  if (config.optimizer == OptimizerKind::kGradientDescent) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (std::size_t i = 0; i < params[b].size; ++i) {
        params[b].data[i] -= config.learning_rate * grads[b].data[i];
      }
    }
    return;
  }
  adam.step += 1;
  const double bias1 = 1.0 - std::pow(kAdamBeta1, double(adam.step));
  const double bias2 = 1.0 - std::pow(kAdamBeta2, double(adam.step));
  std::size_t offset = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size; ++i, ++offset) {
      const double g = grads[b].data[i];
      double& m = adam.first_moment[offset];
      double& v = adam.second_moment[offset];
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
      params[b].data[i] -=
          config.learning_rate * (m / bias1) /
          (std::sqrt(v / bias2) + kAdamEpsilon);
    }
  }
}

inline void accumulate(BiLstmParams& into, const BiLstmParams& grads) {
  auto dst = param_blocks(into);
  auto src = param_blocks(grads);
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t i = 0; i < dst[b].size; ++i) {
      dst[b].data[i] += src[b].data[i];
    }
  }
}

}  // namespace detail

// Runs the full loop: encoder features -> interaction forward -> loss ->
// backward -> update. Deterministic for fixed seeds: the per-epoch sample
// order comes from shuffle_seed only, and the encoder is frozen. Pass
// `resume` to continue a previous run with its optimizer and shuffle state.
inline TrainState train(const TrainConfig& config,
                        const std::vector<ReasoningSample>& samples,
                        const Encoder& encoder,
                        const TrainState* resume = nullptr) {
  validate_config(config);
  if (samples.empty()) fail("no training samples");

  const std::size_t d = encoder.dim();
  const std::size_t d_h = config.hidden_dim == 0 ? d : config.hidden_dim;

  std::vector<FeatureSequence> features;
  features.reserve(samples.size());
  for (const ReasoningSample& s : samples) {
    std::size_t n_correct = 0;
    for (int y : s.labels) n_correct += std::size_t(y);
    if (s.size() < 2 || n_correct == 0 || n_correct == s.size()) {
      fail("sample \"", s.sample_id,
           "\" is not trainable: needs >= 2 hypotheses with both labels");
    }
    features.push_back(encoder.features(s));
  }

  TrainState state;
  SplitMix64 shuffle_rng(config.shuffle_seed);
  if (resume != nullptr) {
    if (resume->params.input_dim != d) {
      fail("resume state width ", resume->params.input_dim,
           " does not match encoder width ", d);
    }
    if (resume->adam.first_moment.size() != param_count(resume->params)) {
      fail("resume state has inconsistent optimizer moments");
    }
    state = *resume;
    shuffle_rng.set_state(resume->shuffle_rng_state);
  } else {
    state.params = init_params(config.init_seed, d, d_h);
    state.adam.first_moment.assign(param_count(state.params), 0.0);
    state.adam.second_moment.assign(param_count(state.params), 0.0);
  }

  auto param_refs = param_blocks(state.params);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Each epoch's order is a pure function of the rng stream position, so a
    // resumed run shuffles exactly like an uninterrupted one.
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    deterministic_shuffle(order, shuffle_rng);
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(cursor + config.batch_size, order.size());
      BiLstmParams grad_sum = zero_like(state.params);
      double batch_loss = 0.0;
      for (std::size_t b = cursor; b < batch_end; ++b) {
        const std::size_t idx = order[b];
        const ReasoningSample& sample = samples[idx];
        try {
          ForwardResult fwd = bilstm_forward(state.params, features[idx]);
          LossResult loss =
              sample_loss(fwd.scores, sample.labels, config.focal);
          batch_loss += loss.loss;
          BilstmGradients grads = bilstm_backward(
              state.params, features[idx], fwd.trace, loss.score_grad);
          detail::accumulate(grad_sum, grads.params);
        } catch (const Error& e) {
          fail("training aborted at step ", state.step + 1, " on sample \"",
               sample.sample_id, "\": ", e.what());
        }
      }
      if (!std::isfinite(batch_loss)) {
        fail("training aborted at step ", state.step + 1,
             ": non-finite loss on sample \"", samples[order[cursor]].sample_id,
             "\"");
      }
      auto grad_refs = param_blocks(static_cast<const BiLstmParams&>(grad_sum));
      detail::apply_update(config, param_refs, grad_refs, state.adam);
      state.step += 1;
      state.loss_history.emplace_back(state.step, batch_loss);
      cursor = batch_end;
    }
  }
  state.shuffle_rng_state = shuffle_rng.state();
  return state;
}

// Forward-only pass; repeated calls are identical.
inline EvalReport evaluate(const BiLstmParams& params,
                           const std::vector<ReasoningSample>& samples,
                           const Encoder& encoder,
                           std::vector<ScoredSample>* scored_out = nullptr) {
  if (samples.empty()) fail("no samples to evaluate");
  std::vector<ScoredSample> scored;
  scored.reserve(samples.size());
  std::size_t n_hyp = 0;
  for (const ReasoningSample& s : samples) {
    ForwardResult fwd = bilstm_forward(params, encoder.features(s));
    scored.push_back(ScoredSample{s.sample_id, s.labels, fwd.scores});
    n_hyp += s.size();
  }
  EvalReport report;
  report.acc = accuracy(scored);
  report.auc = pooled_auc(scored);
  report.n_samples = samples.size();
  report.n_hypotheses = n_hyp;
  if (scored_out != nullptr) *scored_out = std::move(scored);
  return report;
}

// Arithmetic mean of per-seed reports (the counts must agree).
inline EvalReport mean_report(const std::vector<EvalReport>& reports) {
  if (reports.empty()) fail("no reports to aggregate");
  EvalReport mean = reports.front();
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].n_samples != mean.n_samples ||
        reports[i].n_hypotheses != mean.n_hypotheses) {
      fail("cannot aggregate reports over different sample sets");
    }
    mean.acc += reports[i].acc;
    mean.auc += reports[i].auc;
  }
  mean.acc /= static_cast<double>(reports.size());
  mean.auc /= static_cast<double>(reports.size());
  return mean;
}

// Trains with init_seed replaced by each seed in turn and averages the
// resulting reports.
inline EvalReport seed_mean_evaluate(const TrainConfig& base,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::vector<ReasoningSample>& samples,
                                     const Encoder& encoder) {
  if (seeds.empty()) fail("need at least one seed");
  std::vector<EvalReport> reports;
  reports.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    TrainConfig config = base;
    config.init_seed = seed;
    TrainState state = train(config, samples, encoder);
    reports.push_back(evaluate(state.params, samples, encoder));
  }
  return mean_report(reports);
}

struct LowResourceRow {
  double fraction = 0.0;
  double acc = 0.0;
};

// One full train+evaluate per fraction: train on a deterministic subsample
// (seeded by shuffle_seed), evaluate on the full sample set.
inline std::vector<LowResourceRow> low_resource_run(
    const TrainConfig& config, const std::vector<ReasoningSample>& samples,
    const Encoder& encoder, const std::vector<double>& fractions) {
  if (fractions.empty()) fail("no fractions given");
  std::vector<LowResourceRow> rows;
  rows.reserve(fractions.size());
  for (double fraction : fractions) {
    const std::vector<ReasoningSample> subset =
        subsample(samples, fraction, config.shuffle_seed);
    TrainState state = train(config, subset, encoder);
    const EvalReport report = evaluate(state.params, samples, encoder);
    rows.push_back(LowResourceRow{fraction, report.acc});
  }
  return rows;
}

// CSV training log, one row per optimizer step.
inline void write_train_log(
    const std::string& path,
    const std::vector<std::pair<std::size_t, double>>& history) {
  std::ofstream out(path);
  if (!out) fail("cannot open training log for writing: ", path);
  out << "step,loss\n";
  for (const auto& [step, loss] : history) {
    out << step << ',' << format_double(loss) << '\n';
  }
  if (!out) fail("write failed: ", path);
}

}  // namespace anli
