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

#ifndef SYNVITA_CORPUS_HPP_
#define SYNVITA_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace synvita {

enum class MisalignmentType {
  kObject,
  kAction,
  kAttribute,
  kCounting,
  kRelation,
  kHallucination,
  kEventOrderFlip,
};

inline constexpr std::size_t kNumMisalignmentTypes = 7;

const std::vector<MisalignmentType>& all_misalignment_types();
std::string_view to_string(MisalignmentType type);
// Case-insensitive; "event order flip", "event-order-flip" and "flip" are
// accepted spellings of kEventOrderFlip. Returns nullopt for anything else.
std::optional<MisalignmentType> parse_misalignment(std::string_view text);

struct Triplet {
  std::string id;
  std::string video_ref;
  std::string caption_pos;  // t^r, entailed by the real video
  std::string caption_neg;  // t^s, contradicted by the real video
  MisalignmentType misalignment = MisalignmentType::kObject;
  std::string source;

  bool operator==(const Triplet&) const = default;
};

struct SyntheticVideo {
  std::string triplet_id;
  std::string generator_id;
  std::string video_ref;  // realizes the triplet's caption_neg

  bool operator==(const SyntheticVideo&) const = default;
};

struct TrainingSample {
  Triplet triplet;
  std::optional<SyntheticVideo> synthetic;
  std::optional<double> weight;

  bool has_synthetic() const { return synthetic.has_value(); }
};

// Dense vectors keyed by name. Used both for per-video features and for the
// toy corpus' token concept vectors.
class Embeddings {
 public:
  Embeddings() = default;
  explicit Embeddings(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  bool contains(const std::string& key) const { return rows_.count(key) != 0; }

  void insert(std::string key, std::vector<double> values);
  // Throws DataError naming the key when absent.
  const std::vector<double>& at(const std::string& key) const;
  const std::vector<double>* find(const std::string& key) const;
  // Keys in insertion order.
  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> rows_;
  std::vector<std::string> order_;
};

// Manifest I/O. All files are line-delimited JSON; blank lines are ignored.
std::vector<Triplet> load_triplets(const std::filesystem::path& path);
void save_triplets(const std::filesystem::path& path, std::span<const Triplet> triplets);
std::vector<SyntheticVideo> load_synthetic_manifest(const std::filesystem::path& path,
                                                    std::span<const Triplet> triplets);
void save_synthetic_manifest(const std::filesystem::path& path,
                             std::span<const SyntheticVideo> synthetics);
// `key_field` is "video_ref" for feature files and "token" for concept files.
Embeddings load_embeddings(const std::filesystem::path& path,
                           std::string_view key_field = "video_ref");
void save_embeddings(const std::filesystem::path& path, const Embeddings& embeddings,
                     std::string_view key_field = "video_ref");

// Order follows `triplets`; within a triplet, synthetics keep manifest order.
std::vector<TrainingSample> join_samples(std::span<const Triplet> triplets,
                                         std::span<const SyntheticVideo> synthetics);

struct ToyCorpusConfig {
  std::size_t n_triplets = 500;
  std::size_t feature_dim = 32;
  std::size_t vocab_size = 16;
  double fidelity = 1.0;  // rho
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  std::size_t caption_length = 4;
  std::size_t n_generators = 1;
  std::size_t n_heldout = 300;
  // Fraction of synthetic videos generated at `low_fidelity` instead.
  double low_fidelity_fraction = 0.0;
  double low_fidelity = 0.0;
  // Per-type fidelity overrides; they take precedence over both of the above.
  std::map<MisalignmentType, double> fidelity_by_type;

  // Throws ConfigError on violated invariants.
  void validate() const;
};

struct GroundTruthRow {
  std::string triplet_id;
  std::string generator_id;
  MisalignmentType misalignment = MisalignmentType::kObject;
  double fidelity = 0.0;
};

struct ToyCorpus {
  std::vector<Triplet> triplets;
  std::vector<SyntheticVideo> synthetics;
  std::vector<GroundTruthRow> ground_truth;
  std::vector<Triplet> heldout;  // never paired with synthetic videos
  Embeddings features;           // every video_ref above
  Embeddings concepts;           // token -> latent concept vector
};

// Token vectors are the latent concept matrix; a caption's embedding is the
// mean of its token vectors. Real video = embedding(caption_pos) + noise.
// Synthetic video = rho * embedding(caption_neg) + (1 - rho) *
// embedding(caption_pos) + noise. Captions use distinct tokens and the
// negative replaces exactly one of them with a token absent from the caption.
ToyCorpus make_toy_corpus(const ToyCorpusConfig& config);

// Mean of the concept vectors of the caption's tokens. Throws DataError for
// tokens missing from the table.
std::vector<double> caption_embedding(const Embeddings& concepts, std::string_view caption);

void save_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthRow> rows);
std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path);

}  // namespace synvita

#endif  // SYNVITA_CORPUS_HPP_
