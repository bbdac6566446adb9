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

// Small randomized training batches shared by the loss tests and the
// acceptance binary.

#ifndef SYNVITA_TESTS_FIXTURES_HPP_
#define SYNVITA_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "synvita/captions.hpp"
#include "synvita/corpus.hpp"
#include "synvita/model.hpp"
#include "synvita/objective.hpp"

namespace fixtures {

using namespace synvita;

// Six triplets with two synthetic videos each, random weights in (0.05, 0.95)
// except for one zero weight.
struct LossFixture {
  ToyCorpus corpus;
  std::vector<TrainingSample> samples;
  std::unique_ptr<SurrogateModel> model;
  std::vector<PreparedSample> prepared;

  explicit LossFixture(std::uint64_t seed, double init_std = 0.5) {
    ToyCorpusConfig config;
    config.n_triplets = 6;
    config.feature_dim = 6;
    config.vocab_size = 8;
    config.caption_length = 3;
    config.n_generators = 2;
    config.fidelity = 0.7;
    config.n_heldout = 0;
    config.noise_sigma = 0.3;
    config.seed = seed;
    corpus = make_toy_corpus(config);
    samples = join_samples(corpus.triplets, corpus.synthetics);
    std::mt19937_64 rng(seed + 100);
    std::uniform_real_distribution<double> omega(0.05, 0.95);
    for (auto& s : samples) s.weight = omega(rng);
    samples[1].weight = 0.0;
    std::vector<std::string> words;
    for (const auto& t : corpus.triplets) {
      for (const auto& w : tokenize(t.caption_pos + " " + t.caption_neg).tokens) words.push_back(w);
    }
    model = std::make_unique<SurrogateModel>(SurrogateConfig{6, 4, init_std, seed}, Vocabulary(words));
    prepared = prepare_samples(samples, corpus.features, *model);
  }
};

// Smallest distance of any hinge argument from its kink.
inline double kink_distance(const AlignmentModel& model, std::span<const PreparedSample> batch, double gamma) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : batch) {
    if (!s.has_synthetic() || !s.has_shared()) continue;
    const std::span<const double> videos[2] = {s.synthetic_video, s.real_video};
    const std::vector<int>* own[2] = {&s.neg_tokens, &s.pos_tokens};
    const std::vector<int>* other[2] = {&s.pos_tokens, &s.neg_tokens};
    for (int z = 0; z < 2; ++z) {
      const double shared = model.predict(videos[z], s.pos_tokens, s.shared_mask);
      const double f_own = model.predict(videos[z], *own[z]);
      const double f_other = model.predict(videos[z], *other[z]);
      best = std::min({best, std::abs(gamma + shared - f_own), std::abs(gamma + f_other - shared)});
    }
  }
  return best;
}

}  // namespace fixtures

#endif  // SYNVITA_TESTS_FIXTURES_HPP_
