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
#include "anli/trainer.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"
#include "support/test_support.hpp"

using namespace anli;
using anli::testing::TempDir;

namespace {

TrainConfig tiny_config() {
  TrainConfig config;
  config.learning_rate = 1e-2;
  config.epochs = 2;
  config.init_seed = 11;
  config.shuffle_seed = 22;
  config.encoder_seed = 33;
  return config;
}

bool params_equal(const BiLstmParams& a, const BiLstmParams& b) {
  auto ba = param_blocks(a);
  auto bb = param_blocks(b);
  for (std::size_t blk = 0; blk < ba.size(); ++blk) {
    for (std::size_t i = 0; i < ba[blk].size; ++i) {
      if (ba[blk].data[i] != bb[blk].data[i]) return false;
    }
  }
  return true;
}

class NanEncoder final : public Encoder {
 public:
  std::size_t dim() const override { return 2; }
  FeatureVector feature(const ReasoningSample&, std::size_t) const override {
    return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  }
};

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("zero learning rate leaves the parameters at their init") {
  auto samples = testing::make_separable_corpus(5, 1);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.learning_rate = 0.0;
  for (OptimizerKind opt :
       {OptimizerKind::kAdam, OptimizerKind::kGradientDescent}) {
    config.optimizer = opt;
    TrainState state = train(config, samples, encoder);
    BiLstmParams fresh = init_params(config.init_seed, 8, 8);
    CHECK(params_equal(state.params, fresh));
    CHECK(state.step == config.epochs * samples.size());
  }
}

TEST_CASE("identical seeds give identical runs") {
  auto samples = testing::make_separable_corpus(6, 2);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  TrainState a = train(config, samples, encoder);
  TrainState b = train(config, samples, encoder);
  CHECK(a.loss_history == b.loss_history);  // bitwise
  CHECK(params_equal(a.params, b.params));

  TrainConfig other = config;
  other.shuffle_seed += 1;
  TrainState c = train(other, samples, encoder);
  CHECK(a.loss_history != c.loss_history);
}

TEST_CASE("a small gradient step decreases the sample loss") {
  HashingEncoder encoder(5, 8);
  SplitMix64 seeds(321);
  for (int trial = 0; trial < 10; ++trial) {
    auto samples = testing::make_separable_corpus(1, seeds.next_u64());
    TrainConfig config;
    config.learning_rate = 1e-3;
    config.epochs = 1;
    config.optimizer = OptimizerKind::kGradientDescent;
    config.init_seed = seeds.next_u64();

    BiLstmParams before = init_params(config.init_seed, 8, 8);
    FeatureSequence f = encoder.features(samples[0]);
    const double loss_before =
        sample_loss(bilstm_forward(before, f).scores, samples[0].labels,
                    config.focal)
            .loss;

    TrainState state = train(config, samples, encoder);
    const double loss_after =
        sample_loss(bilstm_forward(state.params, f).scores, samples[0].labels,
                    config.focal)
            .loss;
    CHECK(loss_after < loss_before);
  }
}

TEST_CASE("full-batch loss equals the sum over the shuffled epoch") {
  auto samples = testing::make_separable_corpus(4, 9);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 1;
  config.batch_size = 4;
  TrainState state = train(config, samples, encoder);
  REQUIRE(state.loss_history.size() == 1);

  // Replicate the epoch order and accumulate in the same sequence.
  std::vector<std::size_t> order{0, 1, 2, 3};
  SplitMix64 rng(config.shuffle_seed);
  deterministic_shuffle(order, rng);
  BiLstmParams init = init_params(config.init_seed, 8, 8);
  double expected = 0.0;
  for (std::size_t idx : order) {
    FeatureSequence f = encoder.features(samples[idx]);
    expected += sample_loss(bilstm_forward(init, f).scores,
                            samples[idx].labels, config.focal)
                    .loss;
  }
  CHECK(state.loss_history[0].second == expected);
}

TEST_CASE("training in two legs matches one continuous run") {
  auto samples = testing::make_separable_corpus(5, 14);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 4;
  TrainState whole = train(config, samples, encoder);

  config.epochs = 2;
  TrainState first = train(config, samples, encoder);
  TrainState second = train(config, samples, encoder, &first);
  CHECK(params_equal(whole.params, second.params));
  CHECK(whole.loss_history == second.loss_history);
  CHECK(whole.step == second.step);
}

TEST_CASE("evaluate with zero parameters ties every score") {
  auto samples = testing::make_separable_corpus(10, 4);
  HashingEncoder encoder(33, 8);
  BiLstmParams zeros(8, 8);
  std::vector<ScoredSample> scored;
  EvalReport report = evaluate(zeros, samples, encoder, &scored);
  for (const auto& s : scored) {
    for (double v : s.scores) CHECK(v == 0.0);
  }
  CHECK(report.auc == 0.5);
  // Tie-break baseline: argmax lands on index 0.
  std::size_t first_correct = 0;
  for (const auto& s : samples) first_correct += std::size_t(s.labels[0] == 1);
  CHECK(report.acc == double(first_correct) / double(samples.size()));
  CHECK(report.n_samples == 10);
}

TEST_CASE("evaluate is side-effect free") {
  auto samples = testing::make_separable_corpus(6, 5);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 1;
  TrainState state = train(config, samples, encoder);
  EvalReport a = evaluate(state.params, samples, encoder);
  EvalReport b = evaluate(state.params, samples, encoder);
  CHECK(a.acc == b.acc);
  CHECK(a.auc == b.auc);
  CHECK(a.n_hypotheses == b.n_hypotheses);
}

TEST_CASE("mean_report averages the fractions") {
  EvalReport a{0.5, 0.6, 7, 21};
  EvalReport b{0.7, 0.8, 7, 21};
  EvalReport c{0.6, 1.0, 7, 21};
  EvalReport mean = mean_report({a, b, c});
  CHECK(mean.acc == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(mean.auc == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(mean.n_samples == 7);

  EvalReport other{0.5, 0.5, 8, 22};
  CHECK_THROWS_AS(mean_report({a, other}), Error);
  CHECK_THROWS_AS(mean_report({}), Error);
}

TEST_CASE("seed averaging runs one training per seed") {
  auto samples = testing::make_separable_corpus(4, 6);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 1;

  EvalReport mean = seed_mean_evaluate(config, {1, 2, 3}, samples, encoder);
  std::vector<EvalReport> individual;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig c = config;
    c.init_seed = seed;
    TrainState state = train(c, samples, encoder);
    individual.push_back(evaluate(state.params, samples, encoder));
  }
  EvalReport expected = mean_report(individual);
  CHECK(mean.acc == expected.acc);
  CHECK(mean.auc == expected.auc);
}

TEST_CASE("training surfaces encoder failures with sample context") {
  auto samples = testing::make_separable_corpus(2, 3);
  NanEncoder encoder;
  TrainConfig config = tiny_config();
  CHECK_THROWS_WITH_AS(train(config, samples, encoder),
                       doctest::Contains("not finite"), Error);
}

TEST_CASE("training rejects single-class samples") {
  ReasoningSample degenerate;
  degenerate.sample_id = "bad";
  degenerate.obs1 = "o1";
  degenerate.obs2 = "o2";
  degenerate.hypotheses = {"a", "b"};
  degenerate.labels = {1, 1};
  HashingEncoder encoder(1, 8);
  TrainConfig config = tiny_config();
  CHECK_THROWS_WITH_AS(train(config, {degenerate}, encoder),
                       doctest::Contains("not trainable"), Error);
}

TEST_CASE("low_resource_run at full fraction matches a plain train+eval") {
  auto samples = testing::make_separable_corpus(6, 7);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 1;

  auto rows = low_resource_run(config, samples, encoder, {1.0});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].fraction == 1.0);

  TrainState state = train(config, samples, encoder);
  EvalReport report = evaluate(state.params, samples, encoder);
  CHECK(rows[0].acc == report.acc);
}

TEST_CASE("default low-resource fractions") {
  CHECK(kDefaultFractions ==
        std::array<double, 5>{0.01, 0.02, 0.05, 0.10, 1.00});
}

TEST_CASE("config validation") {
  auto samples = testing::make_separable_corpus(2, 8);
  HashingEncoder encoder(1, 8);
  TrainConfig config = tiny_config();
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(train(config, samples, encoder), Error);
  config = tiny_config();
  config.epochs = 0;
  CHECK_THROWS_AS(train(config, samples, encoder), Error);
  config = tiny_config();
  config.focal.gamma = -2.0;
  CHECK_THROWS_AS(train(config, samples, encoder), Error);
}

TEST_CASE("train log lists one row per step") {
  TempDir dir;
  auto samples = testing::make_separable_corpus(3, 10);
  HashingEncoder encoder(33, 8);
  TrainConfig config = tiny_config();
  config.epochs = 2;
  TrainState state = train(config, samples, encoder);
  const std::string path = dir.file("train.log.csv");
  write_train_log(path, state.loss_history);

  const std::string text = testing::read_text(path);
  std::size_t lines = 0;
  for (char ch : text) lines += std::size_t(ch == '\n');
  CHECK(lines == 1 + config.epochs * samples.size());
  CHECK(text.rfind("step,loss\n", 0) == 0);
}

TEST_SUITE_END();
