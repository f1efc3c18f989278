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
#include <cmath>
#include <cstddef>
#include <vector>

#include "anli/common.hpp"

namespace anli {

// Index structure for the rearranged score groups: group k holds the k-th
// correct hypothesis together with every wrong hypothesis.
struct GroupRearrangement {
  std::vector<std::size_t> correct;  // ascending hypothesis indices
  std::vector<std::size_t> wrong;

  std::size_t group_count() const { return correct.size(); }
};

inline void validate_binary_labels(const std::vector<int>& labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) fail("labels must be 0/1, got ", y);
  }
}

inline GroupRearrangement rearrange_groups(const std::vector<int>& labels) {
  validate_binary_labels(labels);
  GroupRearrangement groups;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    (labels[j] == 1 ? groups.correct : groups.wrong).push_back(j);
  }
  if (groups.correct.empty() || groups.wrong.empty()) {
    fail("grouping needs at least one correct and one wrong hypothesis (got ",
         groups.correct.size(), " correct of ", labels.size(), ")");
  }
  return groups;
}

// Per-hypothesis predicted values from the group-wise softmax: a correct
// hypothesis takes its own group's softmax mass; a wrong hypothesis takes its
// slot's mass averaged over all groups.
struct GroupedProbabilities {
  std::vector<double> hyp_prob;  // length N
  // group_mass(k, 0) is the mass of group k's correct hypothesis;
  // group_mass(k, 1 + t) the mass of groups.wrong[t] within group k.
  Matrix group_mass;
  GroupRearrangement groups;
};

inline GroupedProbabilities grouped_softmax(const ScoreVector& scores,
                                            const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    fail("scores/labels size mismatch: ", scores.size(), " vs ",
         labels.size());
  }
  if (!all_finite(scores)) fail("scores must be finite");

  GroupedProbabilities out;
  out.groups = rearrange_groups(labels);
  const auto& correct = out.groups.correct;
  const auto& wrong = out.groups.wrong;
  const std::size_t k_count = correct.size();
  const std::size_t w_count = wrong.size();

  out.hyp_prob.assign(labels.size(), 0.0);
  out.group_mass = Matrix(k_count, 1 + w_count);

  for (std::size_t k = 0; k < k_count; ++k) {
    double peak = scores[correct[k]];
    for (std::size_t t = 0; t < w_count; ++t) {
      peak = std::max(peak, scores[wrong[t]]);
    }
    double* row = out.group_mass.row(k);
    row[0] = std::exp(scores[correct[k]] - peak);
    double total = row[0];
    for (std::size_t t = 0; t < w_count; ++t) {
      row[1 + t] = std::exp(scores[wrong[t]] - peak);
      total += row[1 + t];
    }
    for (std::size_t t = 0; t <= w_count; ++t) row[t] /= total;
    out.hyp_prob[correct[k]] = row[0];
  }
  for (std::size_t t = 0; t < w_count; ++t) {
    double mean = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      mean += out.group_mass.at(k, 1 + t);
    }
    out.hyp_prob[wrong[t]] = mean / static_cast<double>(k_count);
  }
  return out;
}

struct FocalParams {
  double gamma = 2.0;
  double alpha = 0.55;
  double epsilon = 1e-8;
};

inline void validate_focal_params(const FocalParams& fp) {
  if (!(fp.gamma >= 0.0) || !std::isfinite(fp.gamma)) {
    fail("gamma must be >= 0, got ", fp.gamma);
  }
  if (!(fp.alpha > 0.0 && fp.alpha < 1.0)) {
    fail("alpha must be in (0, 1), got ", fp.alpha);
  }
  if (!(fp.epsilon >= 0.0) || !std::isfinite(fp.epsilon)) {
    fail("epsilon must be >= 0, got ", fp.epsilon);
  }
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> score_grad;        // dL/ds per hypothesis
  std::vector<double> balance_weight;    // alpha for correct, 1-alpha otherwise
  std::vector<double> true_class_prob;   // probability on the labeled outcome
  std::vector<double> focus_factor;      // (1 - true_class_prob)^gamma
};

// Focal loss over the grouped probabilities with exact gradients w.r.t. the
// scores. The epsilon of the probability definition can push a perfectly
// classified term above 1; such terms are clamped to 1 (zero loss, zero
// gradient) so the log stays nonpositive.
inline LossResult focal_loss(const GroupedProbabilities& gp,
                             const std::vector<int>& labels,
                             const FocalParams& fp) {
  validate_focal_params(fp);
  validate_binary_labels(labels);
  const std::size_t n = labels.size();
  if (gp.hyp_prob.size() != n) {
    fail("probabilities/labels size mismatch: ", gp.hyp_prob.size(), " vs ",
         n);
  }

  LossResult result;
  result.score_grad.assign(n, 0.0);
  result.balance_weight.resize(n);
  result.true_class_prob.resize(n);
  result.focus_factor.resize(n);

  // dL/dp per hypothesis.
  std::vector<double> grad_p(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double y = labels[j];
    const double beta = y * fp.alpha + (1.0 - y) * (1.0 - fp.alpha);
    double p = y * gp.hyp_prob[j] + (1.0 - y) * (1.0 - gp.hyp_prob[j]) +
               fp.epsilon;
    const bool clamped = p > 1.0;
    if (clamped) p = 1.0;
    if (!(p > 0.0)) fail("degenerate probability ", p, " for hypothesis ", j);

    const double one_minus_p = 1.0 - p;
    const double focus = std::pow(one_minus_p, fp.gamma);
    result.balance_weight[j] = beta;
    result.true_class_prob[j] = p;
    result.focus_factor[j] = focus;
    result.loss -= beta * focus * std::log(p);

    double dt_dp;
    if (clamped) {
      dt_dp = 0.0;
    } else if (one_minus_p == 0.0) {
      dt_dp = fp.gamma == 0.0 ? -beta / p : 0.0;
    } else {
      dt_dp = beta * (fp.gamma * std::pow(one_minus_p, fp.gamma - 1.0) *
                          std::log(p) -
                      focus / p);
    }
    // A wrong hypothesis enters p through 1 - hyp_prob.
    grad_p[j] = dt_dp;
  }

  // Route dL/dp through the per-group softmax rows. Slot upstreams: the
  // correct slot feeds its own term directly; a wrong slot feeds the group
  // average, weight 1/K, with a sign flip from p = 1 - hyp_prob + eps.
  const auto& correct = gp.groups.correct;
  const auto& wrong = gp.groups.wrong;
  const std::size_t k_count = correct.size();
  const std::size_t w_count = wrong.size();
  if (gp.group_mass.rows != k_count || gp.group_mass.cols != 1 + w_count) {
    fail("grouped probabilities have inconsistent shape");
  }

  std::vector<double> slot_up(1 + w_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double* mass = gp.group_mass.row(k);
    slot_up[0] = grad_p[correct[k]];
    for (std::size_t t = 0; t < w_count; ++t) {
      slot_up[1 + t] = -grad_p[wrong[t]] / static_cast<double>(k_count);
    }
    double inner = 0.0;
    for (std::size_t t = 0; t <= w_count; ++t) inner += mass[t] * slot_up[t];
    result.score_grad[correct[k]] += mass[0] * (slot_up[0] - inner);
    for (std::size_t t = 0; t < w_count; ++t) {
      result.score_grad[wrong[t]] += mass[1 + t] * (slot_up[1 + t] - inner);
    }
  }

  if (!std::isfinite(result.loss) || !all_finite(result.score_grad)) {
    fail("loss or gradient is not finite");
  }
  return result;
}

// Group rearrangement + grouped softmax + focal loss in one call. The loss of
// a batch is the plain sum of per-sample losses.
inline LossResult sample_loss(const ScoreVector& scores,
                              const std::vector<int>& labels,
                              const FocalParams& fp) {
  return focal_loss(grouped_softmax(scores, labels), labels, fp);
}

}  // namespace anli
