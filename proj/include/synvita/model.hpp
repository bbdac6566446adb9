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

#ifndef SYNVITA_MODEL_HPP_
#define SYNVITA_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace synvita {

// An empty mask selects every token.
using TokenMask = std::vector<bool>;

// Word vocabulary with a reserved out-of-vocabulary row at index 0.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;

  Vocabulary() = default;
  // Duplicates are ignored; order of first appearance is kept.
  explicit Vocabulary(const std::vector<std::string>& words);

  int index(const std::string& word) const;
  std::vector<int> indices(const std::vector<std::string>& words) const;
  // Rows including UNK.
  std::size_t size() const { return words_.size() + 1; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> lookup_;
};

// f(V, t) in [0, 1]: the normalized probability that the video entails the
// caption. Implementations expose a flat parameter vector and accumulate
// analytic gradients into a caller-owned buffer of the same length.
class AlignmentModel {
 public:
  virtual ~AlignmentModel() = default;

  virtual std::size_t feature_dim() const = 0;
  virtual std::vector<int> token_ids(const std::vector<std::string>& tokens) const = 0;

  virtual double predict(std::span<const double> video, std::span<const int> tokens,
                         const TokenMask& mask = {}) const = 0;
  // grad += upstream * d predict / d theta. Returns the prediction.
  virtual double accumulate_gradient(std::span<const double> video, std::span<const int> tokens,
                                     const TokenMask& mask, double upstream,
                                     std::span<double> grad) const = 0;

  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;
  std::size_t parameter_count() const { return parameters().size(); }
};

struct SurrogateConfig {
  std::size_t feature_dim = 32;
  std::size_t embed_dim = 16;
  double init_std = 0.1;
  std::uint64_t seed = 0;
};

// sigmoid(p(V)^T W c(t) + b) with p(V) = video_projection * V and c(t) the
// mask-aware mean of token embeddings.
//
// Parameter layout: token embeddings (vocab rows x embed_dim, row-major),
// video projection (embed_dim x feature_dim), interaction (embed_dim x
// embed_dim), bias.
class SurrogateModel final : public AlignmentModel {
 public:
  SurrogateModel(SurrogateConfig config, Vocabulary vocabulary);

  const SurrogateConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }

  std::size_t feature_dim() const override { return config_.feature_dim; }
  std::vector<int> token_ids(const std::vector<std::string>& tokens) const override {
    return vocab_.indices(tokens);
  }

  // Mean of the embeddings of tokens whose mask bit is set; all-false gives
  // the zero vector. Throws DataError on a mask length mismatch.
  std::vector<double> encode_caption(std::span<const int> tokens, const TokenMask& mask = {}) const;

  double predict(std::span<const double> video, std::span<const int> tokens,
                 const TokenMask& mask = {}) const override;
  double accumulate_gradient(std::span<const double> video, std::span<const int> tokens,
                             const TokenMask& mask, double upstream,
                             std::span<double> grad) const override;

  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

  std::span<double> token_embeddings() { return slice(0, embeddings_size()); }
  std::span<double> video_projection() { return slice(embeddings_size(), projection_size()); }
  std::span<double> interaction() {
    return slice(embeddings_size() + projection_size(), interaction_size());
  }
  double& bias() { return params_.back(); }

 private:
  struct Forward {
    std::vector<double> projected;  // p(V)
    std::vector<double> caption;    // c(t)
    std::vector<double> mixed;      // W c(t)
    std::size_t selected = 0;
    double prob = 0.0;
  };

  Forward forward(std::span<const double> video, std::span<const int> tokens,
                  const TokenMask& mask) const;
  std::size_t embeddings_size() const { return vocab_.size() * config_.embed_dim; }
  std::size_t projection_size() const { return config_.embed_dim * config_.feature_dim; }
  std::size_t interaction_size() const { return config_.embed_dim * config_.embed_dim; }
  std::span<double> slice(std::size_t offset, std::size_t count) {
    return std::span<double>(params_).subspan(offset, count);
  }

  SurrogateConfig config_;
  Vocabulary vocab_;
  std::vector<double> params_;
};

// Records predictions during a forward sweep so that gradients of a scalar
// loss can be formed once the per-prediction upstream derivatives are known.
// The tape keeps views into caller-owned inputs; they must outlive it.
class ForwardTape {
 public:
  explicit ForwardTape(const AlignmentModel& model) : model_(model) {}

  // Returns the entry's index.
  std::size_t record(std::span<const double> video, std::span<const int> tokens,
                     const TokenMask* mask = nullptr);
  double prediction(std::size_t entry) const { return entries_[entry].prob; }
  std::size_t size() const { return entries_.size(); }

  // sum_e upstream[e] * d prediction_e / d theta. Throws std::logic_error
  // when nothing was recorded or the upstream length differs.
  std::vector<double> parameter_gradients(std::span<const double> upstream) const;

 private:
  struct Entry {
    std::span<const double> video;
    std::span<const int> tokens;
    const TokenMask* mask;
    double prob;
  };

  const AlignmentModel& model_;
  std::vector<Entry> entries_;
};

// JSON checkpoint holding the config, vocabulary and every parameter. Doubles
// are written with round-trip precision, so predictions reload bitwise.
void save_checkpoint(const std::filesystem::path& path, const SurrogateModel& model,
                     const std::string& config_digest = {});
SurrogateModel load_checkpoint(const std::filesystem::path& path,
                               std::string* config_digest = nullptr);

}  // namespace synvita

#endif  // SYNVITA_MODEL_HPP_
