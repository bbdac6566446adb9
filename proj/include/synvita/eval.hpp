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

#ifndef SYNVITA_EVAL_HPP_
#define SYNVITA_EVAL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synvita/corpus.hpp"
#include "synvita/model.hpp"
#include "synvita/scoring.hpp"

namespace synvita {

struct EntailmentExample {
  std::string video_ref;
  std::string caption;
  int label = 0;  // 1 when the video entails the caption
};

struct RetrievalClass {
  std::string caption;
  std::vector<std::string> relevant;
};

struct RetrievalTask {
  std::vector<RetrievalClass> classes;
  std::vector<std::string> pool;

  // Throws DataError when a relevant video is missing from the pool or a
  // class has no relevant videos.
  void validate() const;
};

struct VqaCandidate {
  std::string text;
  bool is_correct = false;
};

struct VqaItem {
  std::string video_ref;
  std::vector<VqaCandidate> candidates;

  // At least two candidates, exactly one correct.
  void validate() const;
};

// Alignment score of a caption against a video.
using VideoCaptionScorer = std::function<double(const std::string& video_ref, const std::string& caption)>;

// Wraps a model and a feature store; captions go through the tokenizer.
VideoCaptionScorer model_scorer(const AlignmentModel& model, const Embeddings& features);

// Mann-Whitney statistic: (concordant + 0.5 * tied) / (#pos * #neg),
// computed from mid-ranks. Throws DataError "AUC undefined" on one class.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision of one ranking: mean of precision at each relevant hit.
double average_precision(std::span<const std::string> ranking,
                         std::span<const std::string> relevant);

// Returns nullopt when no score exists for the (class, video) pair.
using RetrievalScoreFn =
    std::function<std::optional<double>(std::size_t class_index, const std::string& video_ref)>;

// Per class, ranks the pool by descending score (ties keep pool order) and
// averages AP over classes.
double retrieval_map(const RetrievalTask& task, const RetrievalScoreFn& scores);

// Fraction of items whose first highest-scoring candidate is the correct one.
double vqa_accuracy(std::span<const VqaItem> items, const VideoCaptionScorer& scorer);

inline constexpr std::size_t kHistogramBins = 40;

struct MisalignmentRow {
  MisalignmentType type = MisalignmentType::kObject;
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> stddev;  // population
  std::array<std::size_t, kHistogramBins> histogram{};  // over [-1, 1]
};

// Groups s_pos - s_neg by the triplet's misalignment type. One row per type
// in taxonomy order, including empty ones.
std::vector<MisalignmentRow> misalignment_analysis(const ScoreTable& scores,
                                                   std::span<const Triplet> triplets);

void save_analysis_csv(const std::filesystem::path& path, std::span<const MisalignmentRow> rows);
// One SVG histogram per type plus an overview of the group means.
void save_analysis_plots(const std::filesystem::path& dir, std::span<const MisalignmentRow> rows);

struct EvalReport {
  std::optional<double> auc;
  std::optional<double> map;
  std::optional<double> accuracy;
  std::vector<MisalignmentRow> per_misalignment;
};

struct TaskReport {
  std::string task;    // entailment | retrieval | vqa
  std::string metric;  // auc | map | accuracy
  double value = 0.0;
  std::size_t n_items = 0;
  std::string config_digest;
};

void save_task_report(const std::filesystem::path& path, const TaskReport& report);
TaskReport load_task_report(const std::filesystem::path& path);

double evaluate_entailment(std::span<const EntailmentExample> examples,
                           const VideoCaptionScorer& scorer);
double evaluate_retrieval(const RetrievalTask& task, const VideoCaptionScorer& scorer);

// Dataset files.
std::vector<EntailmentExample> load_entailment(const std::filesystem::path& path);
void save_entailment(const std::filesystem::path& path, std::span<const EntailmentExample> data);
RetrievalTask load_retrieval(const std::filesystem::path& path);
void save_retrieval(const std::filesystem::path& path, const RetrievalTask& task);
std::vector<VqaItem> load_vqa(const std::filesystem::path& path);
void save_vqa(const std::filesystem::path& path, std::span<const VqaItem> items);

// Each held-out triplet yields (video, caption_pos, 1) and (video, caption_neg, 0).
std::vector<EntailmentExample> entailment_examples(std::span<const Triplet> triplets);

struct ToyEvalConfig {
  std::size_t retrieval_classes = 6;
  std::size_t videos_per_class = 4;
  std::size_t vqa_candidates = 5;
  std::uint64_t seed = 1;
};

struct ToyEvalSets {
  std::vector<EntailmentExample> entailment;
  RetrievalTask retrieval;
  std::vector<VqaItem> vqa;
};

// Builds evaluation sets from the corpus' held-out triplets and concept
// vectors. Retrieval videos are new and are added to `corpus.features`.
// Retrieval classes come in pairs differing in a single token; VQA
// distractors are single-token edits of the true caption.
ToyEvalSets make_toy_eval_sets(ToyCorpus& corpus, const ToyCorpusConfig& corpus_config,
                               const ToyEvalConfig& config = {});

}  // namespace synvita

#endif  // SYNVITA_EVAL_HPP_
