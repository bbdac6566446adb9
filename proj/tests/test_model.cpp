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


#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "synvita/errors.hpp"
#include "synvita/model.hpp"

using namespace synvita;

namespace {

Vocabulary small_vocabulary() {
  return Vocabulary({"a", "man", "dog", "runs", "jumps", "red", "blue", "cup"});
}

SurrogateModel small_model(std::uint64_t seed = 0, double init_std = 0.1) {
  return SurrogateModel({6, 4, init_std, seed}, small_vocabulary());
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("vocabulary reserves the unknown row") {
  const auto vocab = small_vocabulary();
  CHECK(vocab.size() == 9);
  CHECK(vocab.index("a") == 1);
  CHECK(vocab.index("cup") == 8);
  CHECK(vocab.index("zebra") == Vocabulary::kUnk);
  CHECK(Vocabulary({"x", "y", "x"}).size() == 3);
  CHECK(vocab.indices({"man", "zebra"}) == std::vector<int>{2, 0});
}

TEST_CASE("parameter layout and seeded initialization") {
  auto model = small_model();
  CHECK(model.parameter_count() == 9 * 4 + 4 * 6 + 4 * 4 + 1);
  CHECK(model.token_embeddings().size() == 36);
  CHECK(model.video_projection().size() == 24);
  CHECK(model.interaction().size() == 16);
  CHECK(model.bias() == 0.0);
  const auto again = small_model();
  CHECK(std::equal(model.parameters().begin(), model.parameters().end(), again.parameters().begin()));
  const auto other = small_model(1);
  CHECK_FALSE(std::equal(model.parameters().begin(), model.parameters().end(), other.parameters().begin()));
}

TEST_CASE("encode_caption basics") {
  auto model = small_model();
  const std::vector<int> one = {3};
  const auto row = model.encode_caption(one, {true});
  for (std::size_t k = 0; k < 4; ++k) CHECK(row[k] == model.token_embeddings()[3 * 4 + k]);

  const std::vector<int> tokens = {1, 2, 4};
  for (double x : model.encode_caption(tokens, {false, false, false})) CHECK(x == 0.0);
  CHECK_THROWS_AS(model.encode_caption(tokens, {true, false}), DataError);
  CHECK(model.encode_caption(tokens) == model.encode_caption(tokens, {true, true, true}));
}

TEST_CASE("masking equals removal") {
  auto model = small_model(3, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> length(0, 10);
  std::uniform_int_distribution<int> token(0, 8);
  std::bernoulli_distribution bit(0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> tokens(static_cast<std::size_t>(length(rng)));
    TokenMask mask(tokens.size());
    std::vector<int> kept;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      tokens[i] = token(rng);
      mask[i] = bit(rng);
      if (mask[i]) kept.push_back(tokens[i]);
    }
    const auto masked = model.encode_caption(tokens, mask);
    const auto removed = model.encode_caption(kept, TokenMask(kept.size(), true));
    REQUIRE(masked == removed);
  }
}

TEST_CASE("predict range and saturation") {
  auto model = small_model();
  std::mt19937_64 rng(5);
  const std::vector<int> tokens = {1, 2, 4};
  for (int i = 0; i < 50; ++i) {
    const auto video = random_vector(rng, 6);
    const double p = model.predict(video, tokens);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  const auto video = random_vector(rng, 6);
  for (auto& w : model.interaction()) w = 0.0;
  CHECK(model.predict(video, tokens) == 0.5);
  model.bias() = 30.0;
  CHECK(model.predict(video, tokens) > 1.0 - 1e-9);
}

TEST_CASE("predict rejects malformed or non-finite inputs") {
  auto model = small_model();
  const std::vector<int> tokens = {1};
  CHECK_THROWS_AS(model.predict(std::vector<double>(5, 0.0), tokens), DataError);
  std::vector<double> video(6, 0.0);
  video[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(model.predict(video, tokens), NumericError);
  CHECK_THROWS_AS(model.predict(std::vector<double>(6, 0.0), std::vector<int>{42}), DataError);
}

TEST_CASE("seed-0 prediction matches the recorded value") {
  const SurrogateModel model({32, 16, 0.1, 0}, Vocabulary({"man", "runs", "red", "cup"}));
  std::vector<double> video(32);
  for (std::size_t k = 0; k < video.size(); ++k) video[k] = std::sin(0.5 * static_cast<double>(k + 1));
  const std::vector<int> tokens = {1, 2, 4};
  CHECK(model.predict(video, tokens) == doctest::Approx(0.50881481026178976).epsilon(1e-12));
}

TEST_CASE("accumulate_gradient matches finite differences") {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = small_model(seed, 0.5);
    const auto video = random_vector(rng, 6);
    const std::vector<int> tokens = {1, 3, 5, 3};
    const TokenMask mask = {true, false, true, true};
    std::vector<double> grad(model.parameter_count(), 0.0);
    const double p = model.accumulate_gradient(video, tokens, mask, 1.0, grad);
    CHECK(p == model.predict(video, tokens, mask));
    const double err = oracle::max_relative_error(model.parameters(), grad,
                                                  [&] { return model.predict(video, tokens, mask); });
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("finite differences on a ten-parameter slice") {
  auto model = small_model(2, 0.5);
  std::mt19937_64 rng(21);
  const auto video = random_vector(rng, 6);
  const std::vector<int> tokens = {2, 4};
  std::vector<double> grad(model.parameter_count(), 0.0);
  model.accumulate_gradient(video, tokens, {}, 1.0, grad);
  const std::size_t offset = model.token_embeddings().size() + 3;
  const double err = oracle::max_relative_error(model.parameters().subspan(offset, 10),
                                                std::span<const double>(grad).subspan(offset, 10),
                                                [&] { return model.predict(video, tokens); });
  CHECK(err <= 1e-4);
}

TEST_CASE("forward tape gradients are linear in the upstream") {
  auto model = small_model(4, 0.5);
  std::mt19937_64 rng(3);
  const auto video = random_vector(rng, 6);
  const std::vector<int> tokens = {1, 2};
  ForwardTape empty(model);
  CHECK_THROWS_AS(empty.parameter_gradients(std::vector<double>{}), std::logic_error);

  ForwardTape once(model);
  once.record(video, tokens);
  const auto single = once.parameter_gradients(std::vector<double>{0.7});

  ForwardTape twice(model);
  twice.record(video, tokens);
  twice.record(video, tokens);
  CHECK(twice.prediction(0) == twice.prediction(1));
  const auto doubled = twice.parameter_gradients(std::vector<double>{0.7, 0.7});
  for (std::size_t i = 0; i < single.size(); ++i) CHECK(doubled[i] == doctest::Approx(2.0 * single[i]).epsilon(1e-14));

  const auto zero = twice.parameter_gradients(std::vector<double>{0.0, 0.0});
  for (double g : zero) CHECK(g == 0.0);
  CHECK_THROWS_AS(twice.parameter_gradients(std::vector<double>{1.0}), std::logic_error);
}

TEST_CASE("checkpoints reload bitwise") {
  const auto dir = oracle::scratch_dir("model_ckpt");
  auto model = small_model(6, 0.3);
  model.bias() = -0.123456789;
  save_checkpoint(dir / "m.json", model, "abc123");
  std::string digest;
  const auto loaded = load_checkpoint(dir / "m.json", &digest);
  CHECK(digest == "abc123");
  CHECK(loaded.vocabulary().words() == model.vocabulary().words());
  CHECK(std::equal(model.parameters().begin(), model.parameters().end(), loaded.parameters().begin(),
                   loaded.parameters().end()));
  std::ofstream(dir / "bad.json") << "{\"format\": \"other\"}";
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.json"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "none.json"), DataError);
  std::filesystem::remove_all(dir);
}
