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

#ifndef SYNVITA_OBJECTIVE_HPP_
#define SYNVITA_OBJECTIVE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synvita/corpus.hpp"
#include "synvita/model.hpp"

namespace synvita {

enum class OptimizerKind { kAdam, kSgd };

struct LossConfig {
  double gamma = 0.2;
  double lambda_scr = 1e-2;
  double epsilon = 1e-7;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t warmup_steps = 200;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;

  void validate() const;
};

nlohmann::ordered_json to_json(const LossConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
LossConfig loss_config_from_json(const nlohmann::ordered_json& j);

// A training sample resolved against a model's vocabulary and the feature
// store. The feature views point into the store, which must outlive it.
struct PreparedSample {
  std::string triplet_id;
  std::string generator_id;  // empty without a synthetic video
  std::span<const double> real_video;
  std::span<const double> synthetic_video;  // empty without a synthetic video
  std::vector<int> pos_tokens;              // t^r
  std::vector<int> neg_tokens;              // t^s
  TokenMask shared_mask;                    // t' as a mask over pos_tokens
  std::optional<double> weight;             // omega
  // Fraction of the triplet's real-video term this sample carries, so that a
  // triplet with several synthetic videos still contributes its real term once.
  double real_share = 1.0;

  bool has_synthetic() const { return !synthetic_video.empty(); }
  bool has_shared() const;
};

std::vector<PreparedSample> prepare_samples(std::span<const TrainingSample> samples,
                                            const Embeddings& features,
                                            const AlignmentModel& model);

struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;
};

// Each loss is a mean over `batch` and returns its gradient with respect to
// every model parameter. Predictions inside logs are clamped to [eps, 1-eps].
LossValue loss_real(const AlignmentModel& model, std::span<const PreparedSample> batch,
                    double epsilon = 1e-7);
// Every sample needs a synthetic video and a weight (DataError otherwise).
LossValue loss_syn_weighted(const AlignmentModel& model, std::span<const PreparedSample> batch,
                            double epsilon = 1e-7);
// Every sample needs a synthetic video, a weight and a non-empty shared mask.
LossValue loss_scr(const AlignmentModel& model, std::span<const PreparedSample> batch, double gamma);

struct SampleDiagnostics {
  std::string triplet_id;
  std::string generator_id;
  std::optional<double> omega;
  // Active hinges in the order (V^s, t' vs t^s), (V^s, t^r vs t'),
  // (V^r, t' vs t^r), (V^r, t^s vs t').
  std::array<bool, 4> hinge_active{};
};

struct LossReport {
  double l_real = 0.0;
  double l_syn = 0.0;
  double l_scr = 0.0;
  double total = 0.0;
  std::vector<SampleDiagnostics> samples;
};

struct TotalLoss {
  LossReport report;
  std::vector<double> gradient;
};

// L_real + L_syn + lambda_scr * L_scr over a mixed batch. All three terms
// share the batch size as denominator; synthetic-free samples only enter
// L_real and samples with an empty shared caption skip L_scr.
TotalLoss total_loss(const AlignmentModel& model, std::span<const PreparedSample> batch,
                     const LossConfig& config);

// Adam (or plain gradient descent) under linear warmup then cosine decay.
class Optimizer {
 public:
  Optimizer(const LossConfig& config, std::size_t parameter_count, std::size_t total_steps);

  double learning_rate_at(std::size_t step) const;
  void step(std::span<double> parameters, std::span<const double> gradient);
  std::size_t steps_taken() const { return step_; }

 private:
  LossConfig config_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct EpochReport {
  std::size_t epoch = 0;
  double l_real = 0.0;
  double l_syn = 0.0;
  double l_scr = 0.0;
  double total = 0.0;
};

struct FitOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::string config_digest;
  std::function<void(const EpochReport&)> on_epoch;
};

// Seeded shuffling per epoch, fixed-size batches, optimizer step per batch.
// Epoch losses are sample-weighted means of the batch reports. Throws
// NumericError naming the batch when a loss or gradient goes non-finite.
std::vector<EpochReport> fit(SurrogateModel& model, std::span<const PreparedSample> samples,
                             const LossConfig& config, const FitOptions& options = {});

void save_loss_trace(const std::filesystem::path& path, std::span<const EpochReport> trace);

}  // namespace synvita

#endif  // SYNVITA_OBJECTIVE_HPP_
