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

#ifndef SYNVITA_SCORING_HPP_
#define SYNVITA_SCORING_HPP_

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "synvita/corpus.hpp"
#include "synvita/errors.hpp"

namespace synvita {

// Raised when a frame scorer fails; carries the scorer and frame involved.
class ScorerError : public DataError {
 public:
  ScorerError(std::string scorer_id, std::size_t frame_index, const std::string& what);

  const std::string& scorer_id() const { return scorer_id_; }
  std::size_t frame_index() const { return frame_index_; }

 private:
  std::string scorer_id_;
  std::size_t frame_index_;
};

// One member of the external ensemble: a yes-likelihood for a single frame
// of a video against a caption. Must be deterministic and return [0, 1].
class FrameScorer {
 public:
  virtual ~FrameScorer() = default;
  virtual std::string id() const = 0;
  virtual double score(const std::string& video_ref, std::size_t frame_index,
                       std::string_view caption) const = 0;
};

// Test oracle for feature-vector videos: sigmoid(temperature * (cos(v, e) -
// offset)) where e is the mean concept vector of the caption's tokens. The
// frame index is ignored.
class OracleScorer : public FrameScorer {
 public:
  struct Params {
    double temperature = 20.0;
    double offset = 0.85;
  };

  OracleScorer(const Embeddings& features, const Embeddings& concepts)
      : OracleScorer(features, concepts, Params{}) {}
  OracleScorer(const Embeddings& features, const Embeddings& concepts, Params params,
               std::string id = "oracle");

  std::string id() const override { return id_; }
  double score(const std::string& video_ref, std::size_t frame_index,
               std::string_view caption) const override;

 private:
  const Embeddings& features_;
  const Embeddings& concepts_;
  Params params_;
  std::string id_;
};

// Endpoint-inclusive uniform spacing: round(k * (N - 1) / (F - 1)).
std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t n_frames);

// SHA-256 hex digest of the tokenized caption re-joined with single spaces.
std::string caption_key(std::string_view caption);

struct ScoreRecord {
  std::string video_ref;
  std::string caption_key;
  std::string scorer_id;
  std::size_t frame_index = 0;
  double score = 0.0;
};

// Append-only JSONL log of ScoreRecord with an in-memory index. Lookups take
// a shared lock; appends are serialized and flushed line by line. A cache
// built without a path lives in memory only.
class ScoreCache {
 public:
  ScoreCache() = default;
  explicit ScoreCache(std::filesystem::path path);

  ScoreCache(const ScoreCache&) = delete;
  ScoreCache& operator=(const ScoreCache&) = delete;

  std::optional<double> lookup(const std::string& video_ref, const std::string& caption_key,
                               const std::string& scorer_id, std::size_t frame_index) const;
  // No-op when the key is already present. Returns whether a record was written.
  bool append(const ScoreRecord& record);

  std::size_t size() const;

 private:
  static std::string index_key(const std::string& video_ref, const std::string& caption_key,
                               const std::string& scorer_id, std::size_t frame_index);

  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, double> index_;
  std::filesystem::path path_;
  std::ofstream log_;
};

// Mean over scorers and sampled frames of score(frame, caption). When a cache
// is given, constituent scores are served from and written to it.
double ensemble_score(const std::string& video_ref, std::string_view caption,
                      std::span<const FrameScorer* const> scorers, std::size_t n_frames,
                      std::size_t frame_count_of_video, ScoreCache* cache = nullptr);

struct SampleScores {
  std::string triplet_id;
  std::string generator_id;
  std::string video_ref;
  MisalignmentType misalignment = MisalignmentType::kObject;
  double s_pos = 0.0;  // ensemble(V^s, t^s)
  double s_neg = 0.0;  // ensemble(V^s, t^r)

  double difference() const { return s_pos - s_neg; }
};

class ScoreTable {
 public:
  void add(SampleScores row);
  const SampleScores* find(const std::string& triplet_id, const std::string& generator_id) const;
  std::span<const SampleScores> rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  bool operator==(const ScoreTable& other) const;

 private:
  std::vector<SampleScores> rows_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

void save_score_table(const std::filesystem::path& path, const ScoreTable& table);
ScoreTable load_score_table(const std::filesystem::path& path);

struct ScoringOptions {
  std::size_t n_frames = 4;
  std::size_t default_frame_count = 16;
  // Overrides default_frame_count per video when set.
  std::function<std::size_t(const std::string&)> frame_count_of;
  std::size_t threads = 1;
};

// Scores every synthetic-bearing sample. Samples without a synthetic video
// are skipped.
ScoreTable score_corpus(std::span<const TrainingSample> samples,
                        std::span<const FrameScorer* const> scorers, ScoreCache& cache,
                        const ScoringOptions& options = {});

enum class WeightStrategy { kFixed, kPosOnly, kProduct, kIndicator, kClampedDiff };

std::string_view to_string(WeightStrategy strategy);
// Throws ConfigError for unknown names.
WeightStrategy parse_weight_strategy(std::string_view name);
const std::vector<WeightStrategy>& all_weight_strategies();

// fixed:        1
// pos_only:     s_pos
// product:      s_pos * (1 - s_neg)
// indicator:    [s_pos > s_neg]
// clamped_diff: max(0, s_pos - s_neg)
// Throws DataError when either score lies outside [0, 1].
double compute_weight(WeightStrategy strategy, double s_pos, double s_neg);

struct WeightRecord {
  std::string triplet_id;
  std::string generator_id;
  WeightStrategy strategy = WeightStrategy::kClampedDiff;
  double s_pos = 0.0;
  double s_neg = 0.0;
  double omega = 0.0;
};

std::vector<WeightRecord> weigh_samples(std::span<const TrainingSample> samples,
                                        const ScoreTable& scores, WeightStrategy strategy);

// Sets `weight` on every synthetic-bearing sample from the matching record.
// Throws DataError listing samples left without a weight.
void apply_weights(std::span<TrainingSample> samples, std::span<const WeightRecord> weights);

void save_weights(const std::filesystem::path& path, std::span<const WeightRecord> weights);
// Verifies each record's omega against its strategy and scores.
std::vector<WeightRecord> load_weights(const std::filesystem::path& path);

}  // namespace synvita

#endif  // SYNVITA_SCORING_HPP_
