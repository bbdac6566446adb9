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

#ifndef SYNVITA_PIPELINE_HPP_
#define SYNVITA_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synvita/corpus.hpp"
#include "synvita/eval.hpp"
#include "synvita/model.hpp"
#include "synvita/objective.hpp"
#include "synvita/scoring.hpp"

namespace synvita {

inline constexpr std::string_view kVersion = "0.1.0";

struct RunPaths {
  std::filesystem::path triplets = "triplets.jsonl";
  std::filesystem::path synthetics = "synthetics.jsonl";
  std::filesystem::path features = "features.jsonl";
  std::filesystem::path concepts = "concepts.jsonl";
  std::filesystem::path ground_truth = "ground_truth.jsonl";
  std::filesystem::path cache = "score_cache.jsonl";
  std::filesystem::path scores = "scores.jsonl";
  std::filesystem::path weights = "weights.jsonl";
  std::filesystem::path checkpoint = "checkpoint.json";
  std::filesystem::path trace = "loss_trace.csv";
  std::filesystem::path entailment = "eval/entailment.jsonl";
  std::filesystem::path retrieval = "eval/retrieval.json";
  std::filesystem::path vqa = "eval/vqa.jsonl";
  std::filesystem::path report = "report.json";  // entailment
  std::filesystem::path retrieval_report = "report_retrieval.json";
  std::filesystem::path vqa_report = "report_vqa.json";
  std::filesystem::path analysis = "analysis.csv";
  std::filesystem::path plots = "plots";
};

struct ScoringConfig {
  std::size_t n_frames = 4;
  std::size_t frame_count = 16;
  double temperature = 20.0;
  double offset = 0.85;
  std::size_t threads = 1;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path work_dir = "run";
  RunPaths paths;  // relative paths resolve against work_dir
  // Absent when the corpus is supplied rather than generated.
  std::optional<ToyCorpusConfig> toy = ToyCorpusConfig{};
  ToyEvalConfig toy_eval;
  SurrogateConfig model;
  LossConfig loss;
  WeightStrategy strategy = WeightStrategy::kClampedDiff;
  std::vector<std::string> scorers = {"oracle"};
  ScoringConfig scoring;

  // Copies `seed` into the toy corpus, model and loss settings.
  void propagate_seed();
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& config);
// Missing keys keep defaults; unknown keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);
// First 16 hex characters of the SHA-256 of the canonical config JSON.
std::string config_digest(const RunConfig& config);
std::string sha256_file(const std::filesystem::path& path);

// Builds scorers from names: "oracle" or "oracle:<temperature>".
std::vector<std::unique_ptr<FrameScorer>> make_scorers(const std::vector<std::string>& names,
                                                       const Embeddings& features,
                                                       const Embeddings& concepts,
                                                       const ScoringConfig& scoring);

// Vocabulary of every caption token in the triplets, in first-seen order.
Vocabulary build_vocabulary(std::span<const Triplet> triplets);

struct Metrics {
  std::optional<double> auc;
  std::optional<double> map;
  std::optional<double> accuracy;
};

struct TrainOutcome {
  SurrogateModel model;
  std::vector<EpochReport> trace;
  Metrics metrics;
};

// Fresh surrogate on the given (already weighted) samples, then whichever of
// the evaluation sets are non-empty.
TrainOutcome train_and_evaluate(std::span<const TrainingSample> samples, std::span<const Triplet> triplets,
                                const Embeddings& features, const ToyEvalSets& eval,
                                const SurrogateConfig& model_config, const LossConfig& loss,
                                const FitOptions& options = {});

// Individual stages, reading and writing the configured paths.
void stage_toygen(const RunConfig& config);
void stage_score(const RunConfig& config);
void stage_weigh(const RunConfig& config);
void stage_train(const RunConfig& config);
void stage_eval(const RunConfig& config);
void stage_analyze(const RunConfig& config);

struct StageOutcome {
  std::string name;
  bool ran = false;
  double seconds = 0.0;
};

struct PipelineOptions {
  bool force = false;
};

// Runs toygen, score, weigh, train, eval and analyze in order. A stage is
// skipped when its outputs exist, are no older than its inputs and were made
// under the same config digest. Artifacts from a different digest are never
// mixed in: that raises ConfigError unless `force` is set. A failing stage
// leaves `<stage>.failed` in the work directory and rethrows.
std::vector<StageOutcome> run_pipeline(const RunConfig& config, const PipelineOptions& options = {});

struct SweepRow {
  WeightStrategy strategy = WeightStrategy::kClampedDiff;
  std::vector<double> aucs;  // one per seed
  std::optional<double> auc;  // medians over seeds
  std::optional<double> map;
  std::optional<double> accuracy;
  std::string error;
};

double median(std::vector<double> values);

// Scores the corpus once (through the shared cache), then trains and
// evaluates one model per (strategy, seed). Errors of one strategy are
// recorded in its row. Throws ConfigError "nothing to sweep" when empty.
std::vector<SweepRow> ablation_sweep(const RunConfig& config, std::span<const WeightStrategy> strategies,
                                     std::span<const std::uint64_t> seeds);
void save_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

}  // namespace synvita

#endif  // SYNVITA_PIPELINE_HPP_
