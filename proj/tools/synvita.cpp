// Copyright 2026 The Synvita Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// synvita: command-line driver for the alignment training pipeline.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synvita/captions.hpp"
#include "synvita/errors.hpp"
#include "synvita/pipeline.hpp"

namespace fs = std::filesystem;
using namespace synvita;

namespace {

enum ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4, kDependency = 5 };

struct ConfigFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string work_dir;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON run config");
  cmd->add_option("--seed", flags.seed, "Master seed (overrides the config)");
  cmd->add_option("--work-dir", flags.work_dir, "Artifact directory (overrides the config)");
}

RunConfig resolve_config(const ConfigFlags& flags) {
  RunConfig config = flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.work_dir.empty()) config.work_dir = flags.work_dir;
  config.propagate_seed();
  config.validate();
  return config;
}

std::vector<const FrameScorer*> views(const std::vector<std::unique_ptr<FrameScorer>>& owned) {
  std::vector<const FrameScorer*> out;
  for (const auto& s : owned) out.push_back(s.get());
  return out;
}

std::string mask_string(const std::vector<bool>& mask) {
  std::string s;
  for (bool b : mask) s += b ? '1' : '0';
  return s;
}

// LossConfig on its own, or the "loss" section of a run config.
LossConfig load_loss_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("loss")) return run_config_from_json(j).loss;
  return loss_config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-video weighted alignment training"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  int status = kOk;

  // toygen
  ConfigFlags toygen_flags;
  std::optional<std::size_t> toy_triplets;
  std::optional<double> toy_fidelity;
  std::optional<double> toy_low_fraction;
  std::optional<std::size_t> toy_generators;
  auto* toygen = app.add_subcommand("toygen", "Generate a synthetic toy corpus and evaluation sets");
  add_config_flags(toygen, toygen_flags);
  toygen->add_option("--n-triplets", toy_triplets, "Training triplets");
  toygen->add_option("--fidelity", toy_fidelity, "Generation fidelity rho");
  toygen->add_option("--low-fidelity-fraction", toy_low_fraction, "Share of synthetics generated at rho = 0");
  toygen->add_option("--generators", toy_generators, "Synthetic videos per triplet");
  toygen->callback([&] {
    auto config = resolve_config(toygen_flags);
    if (!config.toy) config.toy = ToyCorpusConfig{};
    if (toy_triplets) config.toy->n_triplets = *toy_triplets;
    if (toy_fidelity) config.toy->fidelity = *toy_fidelity;
    if (toy_low_fraction) config.toy->low_fidelity_fraction = *toy_low_fraction;
    if (toy_generators) config.toy->n_generators = *toy_generators;
    config.propagate_seed();
    config.validate();
    stage_toygen(config);
    std::cout << "wrote toy corpus to " << config.work_dir.string() << '\n';
  });

  // score
  std::string sc_triplets, sc_synthetics, sc_features, sc_concepts, sc_cache, sc_out;
  std::vector<std::string> sc_scorers = {"oracle"};
  ScoringConfig sc_opts;
  auto* score = app.add_subcommand("score", "Score synthetic videos with the frame-scorer ensemble");
  score->add_option("--triplets", sc_triplets)->required();
  score->add_option("--synthetics", sc_synthetics)->required();
  score->add_option("--features", sc_features)->required();
  score->add_option("--concepts", sc_concepts)->required();
  score->add_option("--cache", sc_cache)->required();
  score->add_option("--scorers", sc_scorers, "oracle or oracle:<temperature>")->delimiter(',');
  score->add_option("--frames", sc_opts.n_frames, "Frames sampled per video");
  score->add_option("--frame-count", sc_opts.frame_count, "Frames per video");
  score->add_option("--threads", sc_opts.threads);
  score->add_option("--out", sc_out)->required();
  score->callback([&] {
    const auto triplets = load_triplets(sc_triplets);
    const auto synthetics = load_synthetic_manifest(sc_synthetics, triplets);
    const auto features = load_embeddings(sc_features, "video_ref");
    const auto concepts = load_embeddings(sc_concepts, "token");
    const auto owned = make_scorers(sc_scorers, features, concepts, sc_opts);
    const auto scorers = views(owned);
    ScoreCache cache(sc_cache);
    ScoringOptions options;
    options.n_frames = sc_opts.n_frames;
    options.default_frame_count = sc_opts.frame_count;
    options.threads = sc_opts.threads;
    const auto table = score_corpus(join_samples(triplets, synthetics), scorers, cache, options);
    save_score_table(sc_out, table);
    std::cout << "scored " << table.size() << " synthetic videos\n";
  });

  // weigh
  std::string w_triplets, w_synthetics, w_scores, w_strategy = "clamped_diff", w_out;
  auto* weigh = app.add_subcommand("weigh", "Turn ensemble scores into per-sample weights");
  weigh->add_option("--triplets", w_triplets)->required();
  weigh->add_option("--synthetics", w_synthetics)->required();
  weigh->add_option("--scores", w_scores)->required();
  weigh->add_option("--strategy", w_strategy, "fixed, pos_only, product, indicator or clamped_diff");
  weigh->add_option("--out", w_out)->required();
  weigh->callback([&] {
    const auto strategy = parse_weight_strategy(w_strategy);
    const auto triplets = load_triplets(w_triplets);
    const auto synthetics = load_synthetic_manifest(w_synthetics, triplets);
    const auto weights = weigh_samples(join_samples(triplets, synthetics), load_score_table(w_scores), strategy);
    save_weights(w_out, weights);
    std::cout << "weighed " << weights.size() << " samples\n";
  });

  // train
  std::string t_triplets, t_synthetics, t_features, t_weights, t_config, t_out, t_trace;
  std::optional<std::size_t> t_epochs;
  std::optional<std::uint64_t> t_seed;
  SurrogateConfig t_model;
  auto* train = app.add_subcommand("train", "Fit the surrogate alignment model");
  train->add_option("--triplets", t_triplets)->required();
  train->add_option("--synthetics", t_synthetics)->required();
  train->add_option("--features", t_features)->required();
  train->add_option("--weights", t_weights)->required();
  train->add_option("--config", t_config, "LossConfig JSON (or a run config)");
  train->add_option("--epochs", t_epochs);
  train->add_option("--seed", t_seed);
  train->add_option("--embed-dim", t_model.embed_dim);
  train->add_option("--out", t_out, "Checkpoint path")->required();
  train->add_option("--trace", t_trace, "Loss trace CSV");
  train->callback([&] {
    LossConfig loss = t_config.empty() ? LossConfig{} : load_loss_config(t_config);
    if (t_epochs) loss.epochs = *t_epochs;
    if (t_seed) loss.seed = *t_seed;
    loss.validate();
    const auto triplets = load_triplets(t_triplets);
    const auto synthetics = load_synthetic_manifest(t_synthetics, triplets);
    const auto features = load_embeddings(t_features, "video_ref");
    auto samples = join_samples(triplets, synthetics);
    apply_weights(samples, load_weights(t_weights));
    t_model.feature_dim = features.dim();
    t_model.seed = loss.seed;
    SurrogateModel model(t_model, build_vocabulary(triplets));
    const auto prepared = prepare_samples(samples, features, model);
    FitOptions options;
    options.checkpoint = fs::path(t_out);
    RunConfig provenance;
    provenance.toy.reset();
    provenance.seed = loss.seed;
    provenance.model = t_model;
    provenance.loss = loss;
    options.config_digest = config_digest(provenance);
    const auto trace = fit(model, prepared, loss, options);
    if (!t_trace.empty()) save_loss_trace(t_trace, trace);
    std::cout << "final loss " << trace.back().total << '\n';
  });

  // eval
  std::string e_task, e_checkpoint, e_data, e_features, e_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on entailment, retrieval or VQA data");
  eval->add_option("task", e_task, "entailment, retrieval or vqa")
      ->required()
      ->check(CLI::IsMember({"entailment", "retrieval", "vqa"}));
  eval->add_option("--checkpoint", e_checkpoint)->required();
  eval->add_option("--data", e_data)->required();
  eval->add_option("--features", e_features)->required();
  eval->add_option("--out", e_out)->required();
  eval->callback([&] {
    std::string digest;
    const auto model = load_checkpoint(e_checkpoint, &digest);
    const auto features = load_embeddings(e_features, "video_ref");
    const auto scorer = model_scorer(model, features);
    TaskReport report;
    report.task = e_task;
    report.config_digest = digest;
    if (e_task == "entailment") {
      const auto data = load_entailment(e_data);
      report.metric = "auc";
      report.value = evaluate_entailment(data, scorer);
      report.n_items = data.size();
    } else if (e_task == "retrieval") {
      const auto data = load_retrieval(e_data);
      report.metric = "map";
      report.value = evaluate_retrieval(data, scorer);
      report.n_items = data.classes.size();
    } else {
      const auto data = load_vqa(e_data);
      report.metric = "accuracy";
      report.value = vqa_accuracy(data, scorer);
      report.n_items = data.size();
    }
    save_task_report(e_out, report);
    std::cout << report.task << ' ' << report.metric << ' ' << report.value << '\n';
  });

  // analyze
  std::string a_scores, a_triplets, a_out, a_plots;
  auto* analyze = app.add_subcommand("analyze", "Per-misalignment statistics of the score differences");
  analyze->add_option("--scores", a_scores)->required();
  analyze->add_option("--triplets", a_triplets)->required();
  analyze->add_option("--out", a_out)->required();
  analyze->add_option("--plots", a_plots, "Directory for SVG plots");
  analyze->callback([&] {
    const auto rows = misalignment_analysis(load_score_table(a_scores), load_triplets(a_triplets));
    save_analysis_csv(a_out, rows);
    if (!a_plots.empty()) save_analysis_plots(a_plots, rows);
    for (const auto& row : rows) {
      std::cout << to_string(row.type) << ' ' << row.count;
      if (row.mean) std::cout << ' ' << *row.mean;
      std::cout << '\n';
    }
  });

  // sweep
  ConfigFlags sweep_flags;
  std::vector<std::string> sw_strategies;
  std::vector<std::uint64_t> sw_seeds = {0, 1, 2, 3, 4};
  std::string sw_out;
  auto* sweep = app.add_subcommand("sweep", "Train one model per weighting strategy and compare");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--strategies", sw_strategies)->delimiter(',');
  sweep->add_option("--seeds", sw_seeds)->delimiter(',');
  sweep->add_option("--out", sw_out)->required();
  sweep->callback([&] {
    const auto config = resolve_config(sweep_flags);
    std::vector<WeightStrategy> strategies;
    for (const auto& name : sw_strategies) strategies.push_back(parse_weight_strategy(name));
    const auto rows = ablation_sweep(config, strategies, sw_seeds);
    save_sweep_csv(sw_out, rows);
    for (const auto& row : rows) {
      std::cout << to_string(row.strategy);
      if (row.auc) std::cout << " auc " << *row.auc;
      if (!row.error.empty()) std::cout << " error: " << row.error;
      std::cout << '\n';
    }
  });

  // pipeline
  ConfigFlags pipe_flags;
  bool pipe_force = false;
  auto* pipeline = app.add_subcommand("pipeline", "Run toygen, score, weigh, train, eval and analyze");
  add_config_flags(pipeline, pipe_flags);
  pipeline->add_flag("--force", pipe_force, "Rerun stages even when outputs are current");
  pipeline->callback([&] {
    const auto config = resolve_config(pipe_flags);
    for (const auto& stage : run_pipeline(config, {pipe_force})) {
      std::cout << stage.name << (stage.ran ? " ran " : " skipped ") << stage.seconds << "s\n";
    }
  });

  // captions lcs
  std::string c_a, c_b;
  auto* captions = app.add_subcommand("captions", "Caption utilities");
  captions->require_subcommand(1);
  auto* lcs_cmd = captions->add_subcommand("lcs", "Print the shared caption and both token masks");
  lcs_cmd->add_option("--a", c_a)->required();
  lcs_cmd->add_option("--b", c_b)->required();
  lcs_cmd->callback([&] {
    const auto shared = shared_caption(c_a, c_b);
    std::cout << shared.text << '\n' << mask_string(shared.mask_pos) << '\n' << mask_string(shared.mask_neg) << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    status = kConfig;
  } catch (const DependencyError& e) {
    std::cerr << "missing dependency: " << e.what() << '\n';
    status = kDependency;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    status = kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    status = kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    status = kData;
  }
  return status;
}
