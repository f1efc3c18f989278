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
//
// Command-line front end: train / eval / sweep / lowres over line-delimited
// JSON records with an aligned label file. All randomness flows from the
// three named seed flags, so identical invocations produce identical bytes.

#include <cstdint>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "anli/corpus.hpp"
#include "anli/encoder.hpp"
#include "anli/interaction.hpp"
#include "anli/metrics.hpp"
#include "anli/trainer.hpp"

namespace {

struct Options {
  std::string data;
  std::string labels;
  std::string features;
  std::string out;
  std::string checkpoint;
  std::string export_scores;
  double gamma = 2.0;
  double alpha = 0.55;
  double eps = 1e-8;
  double lr = 1e-2;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;
  std::size_t dim = 64;
  std::size_t hidden = 0;
  std::uint64_t seed_init = 1;
  std::uint64_t seed_shuffle = 2;
  std::uint64_t seed_encoder = 3;
  std::string optimizer = "adam";
  std::vector<double> fractions{anli::kDefaultFractions.begin(),
                                anli::kDefaultFractions.end()};
  std::vector<double> gammas{1.0, 2.0, 3.0};
  std::vector<double> alphas{0.45, 0.5, 0.55};

  CLI::Option* seed_encoder_opt = nullptr;
  CLI::Option* dim_opt = nullptr;
};

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "Records file, one JSON object per line")
      ->required();
  cmd->add_option("--labels", o.labels,
                  "Label file, one integer (1 or 2) per line")
      ->required();
  cmd->add_option("--features", o.features,
                  "Feature TSV; replaces the built-in hashing encoder");
}

void add_model_options(CLI::App* cmd, Options& o) {
  o.dim_opt = cmd->add_option("--dim", o.dim, "Hashing-encoder feature width")
                  ->check(CLI::PositiveNumber)
                  ->capture_default_str();
  cmd->add_option("--hidden", o.hidden,
                  "BiLSTM hidden width (0: match feature width)")
      ->capture_default_str();
  o.seed_encoder_opt =
      cmd->add_option("--seed-encoder", o.seed_encoder, "Hashing-encoder seed")
          ->capture_default_str();
}

void add_train_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--gamma", o.gamma, "Focusing parameter")
      ->check(CLI::Range(0.0, 1e9))
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Balance factor for correct hypotheses")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--eps", o.eps, "Probability stabilizer")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--lr", o.lr, "Learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--epochs", o.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "Samples per update")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--optimizer", o.optimizer, "Parameter update rule")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  cmd->add_option("--seed-init", o.seed_init, "Parameter init seed")
      ->capture_default_str();
  cmd->add_option("--seed-shuffle", o.seed_shuffle,
                  "Epoch shuffle / subsample seed")
      ->capture_default_str();
}

anli::TrainConfig make_config(const Options& o) {
  anli::TrainConfig config;
  config.learning_rate = o.lr;
  config.batch_size = o.batch_size;
  config.epochs = o.epochs;
  config.focal = anli::FocalParams{o.gamma, o.alpha, o.eps};
  config.init_seed = o.seed_init;
  config.shuffle_seed = o.seed_shuffle;
  config.encoder_seed = o.seed_encoder;
  config.optimizer = o.optimizer == "sgd"
                         ? anli::OptimizerKind::kGradientDescent
                         : anli::OptimizerKind::kAdam;
  config.hidden_dim = o.hidden;
  return config;
}

std::unique_ptr<anli::Encoder> make_encoder(const Options& o) {
  if (!o.features.empty()) {
    return std::make_unique<anli::FeatureFileEncoder>(
        anli::load_feature_file(o.features));
  }
  return std::make_unique<anli::HashingEncoder>(o.seed_encoder, o.dim);
}

struct Dataset {
  std::vector<anli::ReasoningSample> evaluable;   // every sample with N >= 2
  std::vector<anli::ReasoningSample> trainable;   // both label classes present
  std::size_t quarantined = 0;
};

Dataset load_dataset(const Options& o) {
  anli::LoadedRecords loaded = anli::load_records(o.data, o.labels);
  for (const std::string& w : loaded.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::vector<anli::ReasoningSample> samples =
      anli::group_by_context(loaded.records);

  Dataset ds;
  for (anli::ReasoningSample& s : samples) {
    if (s.size() >= 2) ds.evaluable.push_back(s);
  }
  anli::TrainablePartition split =
      anli::partition_trainable(std::move(samples));
  ds.quarantined = split.quarantined.size();
  ds.trainable = std::move(split.trainable);
  return ds;
}

anli::CheckpointMeta make_meta(const Options& o, std::size_t encoder_dim) {
  return {
      {"init_seed", std::to_string(o.seed_init)},
      {"shuffle_seed", std::to_string(o.seed_shuffle)},
      {"encoder_seed", std::to_string(o.seed_encoder)},
      {"encoder_dim", std::to_string(encoder_dim)},
      {"encoder_kind", o.features.empty() ? "hash" : "file"},
  };
}

void require_distinct(const std::vector<double>& values, const char* flag) {
  std::set<double> unique(values.begin(), values.end());
  if (unique.size() != values.size()) {
    anli::fail("duplicate values in ", flag);
  }
}

void require_fractions(const std::vector<double>& fractions) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      anli::fail("--fractions values must be in (0, 1], got ", f);
    }
  }
}

int run_train(const Options& o) {
  Dataset ds = load_dataset(o);
  if (ds.trainable.empty()) anli::fail("no trainable samples after grouping");
  std::unique_ptr<anli::Encoder> encoder = make_encoder(o);
  anli::TrainConfig config = make_config(o);
  anli::TrainState state = anli::train(config, ds.trainable, *encoder);

  const std::string ckpt_path = o.out + ".ckpt";
  anli::save_checkpoint(ckpt_path, state.params, make_meta(o, encoder->dim()));
  anli::write_train_log(o.out + ".log.csv", state.loss_history);

  nlohmann::json report;
  report["checkpoint"] = ckpt_path;
  report["final_loss"] =
      state.loss_history.empty() ? 0.0 : state.loss_history.back().second;
  report["quarantined"] = ds.quarantined;
  report["samples"] = ds.trainable.size();
  report["steps"] = state.step;
  std::cout << report.dump() << "\n";
  return 0;
}

int run_eval(Options& o) {
  anli::Checkpoint ckpt = anli::load_checkpoint(o.checkpoint);
  if (o.seed_encoder_opt->count() == 0) {
    o.seed_encoder = std::stoull(
        anli::meta_value(ckpt.meta, "encoder_seed", "3"));
  }
  if (o.dim_opt->count() == 0) {
    o.dim = std::stoul(anli::meta_value(
        ckpt.meta, "encoder_dim", std::to_string(ckpt.params.input_dim)));
  }
  std::unique_ptr<anli::Encoder> encoder = make_encoder(o);
  if (encoder->dim() != ckpt.params.input_dim) {
    anli::fail("encoder width ", encoder->dim(),
               " does not match checkpoint input width ",
               ckpt.params.input_dim);
  }

  Dataset ds = load_dataset(o);
  if (ds.evaluable.empty()) anli::fail("no samples with >= 2 hypotheses");
  std::vector<anli::ScoredSample> scored;
  anli::EvalReport report =
      anli::evaluate(ckpt.params, ds.evaluable, *encoder, &scored);
  if (!o.export_scores.empty()) {
    anli::export_scores(scored, o.export_scores);
  }

  nlohmann::json out;
  out["acc"] = report.acc;
  out["auc"] = report.auc;
  out["n_hypotheses"] = report.n_hypotheses;
  out["n_samples"] = report.n_samples;
  std::cout << out.dump() << "\n";
  return 0;
}

int run_sweep(const Options& o) {
  require_distinct(o.gammas, "--gammas");
  require_distinct(o.alphas, "--alphas");
  Dataset ds = load_dataset(o);
  if (ds.trainable.empty()) anli::fail("no trainable samples after grouping");
  std::unique_ptr<anli::Encoder> encoder = make_encoder(o);

  std::vector<anli::SweepCell> cells;
  for (double gamma : o.gammas) {
    for (double alpha : o.alphas) {
      Options cell_opts = o;
      cell_opts.gamma = gamma;
      cell_opts.alpha = alpha;
      anli::TrainConfig config = make_config(cell_opts);
      anli::TrainState state = anli::train(config, ds.trainable, *encoder);
      anli::EvalReport report =
          anli::evaluate(state.params, ds.evaluable, *encoder);
      cells.push_back(anli::SweepCell{gamma, alpha, report.acc});
    }
  }
  anli::sweep_report(cells, o.out);

  nlohmann::json out;
  out["alphas"] = o.alphas.size();
  out["gammas"] = o.gammas.size();
  out["out"] = o.out;
  std::cout << out.dump() << "\n";
  return 0;
}

int run_lowres(const Options& o) {
  require_fractions(o.fractions);
  Dataset ds = load_dataset(o);
  if (ds.trainable.empty()) anli::fail("no trainable samples after grouping");
  std::unique_ptr<anli::Encoder> encoder = make_encoder(o);
  anli::TrainConfig config = make_config(o);

  std::vector<anli::LowResourceRow> rows =
      anli::low_resource_run(config, ds.trainable, *encoder, o.fractions);

  std::ofstream table(o.out);
  if (!table) anli::fail("cannot open output file: ", o.out);
  table << "fraction,acc\n";
  for (const anli::LowResourceRow& row : rows) {
    table << anli::format_double(row.fraction) << ','
          << anli::format_double(row.acc) << '\n';
  }
  if (!table) anli::fail("write failed: ", o.out);

  nlohmann::json out;
  out["out"] = o.out;
  out["rows"] = rows.size();
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped-softmax focal training for abductive NLI"};
  app.require_subcommand(1);

  Options train_opts, eval_opts, sweep_opts, lowres_opts;

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a scorer and write a checkpoint");
  add_data_options(train_cmd, train_opts);
  add_model_options(train_cmd, train_opts);
  add_train_options(train_cmd, train_opts);
  train_cmd
      ->add_option("--out", train_opts.out,
                   "Output prefix (writes <out>.ckpt and <out>.log.csv)")
      ->required();

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score a data set with a saved checkpoint");
  add_data_options(eval_cmd, eval_opts);
  add_model_options(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")
      ->required();
  eval_cmd->add_option("--export-scores", eval_opts.export_scores,
                       "Write a per-hypothesis score TSV here");

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Train one model per (gamma, alpha) cell and tabulate accuracy");
  add_data_options(sweep_cmd, sweep_opts);
  add_model_options(sweep_cmd, sweep_opts);
  add_train_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--gammas", sweep_opts.gammas, "Gamma grid values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--alphas", sweep_opts.alphas, "Alpha grid values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_opts.out, "Output CSV path")->required();

  CLI::App* lowres_cmd = app.add_subcommand(
      "lowres", "Train on data fractions and tabulate accuracy per fraction");
  add_data_options(lowres_cmd, lowres_opts);
  add_model_options(lowres_cmd, lowres_opts);
  add_train_options(lowres_cmd, lowres_opts);
  lowres_cmd
      ->add_option("--fractions", lowres_opts.fractions,
                   "Training-set fractions in (0, 1]")
      ->delimiter(',')
      ->capture_default_str();
  lowres_cmd->add_option("--out", lowres_opts.out, "Output CSV path")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return run_train(train_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (sweep_cmd->parsed()) return run_sweep(sweep_opts);
    if (lowres_cmd->parsed()) return run_lowres(lowres_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
