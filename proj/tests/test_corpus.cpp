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

#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "synvita/captions.hpp"
#include "synvita/corpus.hpp"
#include "synvita/errors.hpp"
#include "synvita/scoring.hpp"

using namespace synvita;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string triplet_line(const std::string& id, const std::string& type) {
  return R"({"id":")" + id + R"(","video_ref":"v/)" + id +
         R"(","caption_pos":"a man runs","caption_neg":"a man jumps","misalignment":")" + type +
         R"(","source":"unit"})" + "\n";
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

double mean_oracle_difference(const ToyCorpus& corpus) {
  OracleScorer scorer(corpus.features, corpus.concepts);
  std::map<std::string, const Triplet*> by_id;
  for (const auto& t : corpus.triplets) by_id[t.id] = &t;
  double sum = 0.0;
  for (const auto& s : corpus.synthetics) {
    const auto& t = *by_id.at(s.triplet_id);
    sum += scorer.score(s.video_ref, 0, t.caption_neg) - scorer.score(s.video_ref, 0, t.caption_pos);
  }
  return sum / static_cast<double>(corpus.synthetics.size());
}

}  // namespace

TEST_CASE("misalignment names parse case-insensitively") {
  CHECK(parse_misalignment("Object") == MisalignmentType::kObject);
  CHECK(parse_misalignment("HALLUCINATION") == MisalignmentType::kHallucination);
  CHECK(parse_misalignment("flip") == MisalignmentType::kEventOrderFlip);
  CHECK(parse_misalignment("event order flip") == MisalignmentType::kEventOrderFlip);
  CHECK_FALSE(parse_misalignment("colour").has_value());
  for (auto type : all_misalignment_types()) CHECK(parse_misalignment(to_string(type)) == type);
}

TEST_CASE("load_triplets keeps order and validates records") {
  const auto dir = oracle::scratch_dir("corpus_load");
  write_file(dir / "ok.jsonl", triplet_line("t1", "object") + triplet_line("t2", "action") + "\n" +
                                   triplet_line("t3", "counting"));
  const auto triplets = load_triplets(dir / "ok.jsonl");
  REQUIRE(triplets.size() == 3);
  CHECK(triplets[0].id == "t1");
  CHECK(triplets[2].misalignment == MisalignmentType::kCounting);

  write_file(dir / "colour.jsonl", triplet_line("t1", "object") + triplet_line("t2", "colour"));
  const auto colour = error_of([&] { load_triplets(dir / "colour.jsonl"); });
  CHECK(colour.find("unknown misalignment") != std::string::npos);
  CHECK(colour.find("line 2") != std::string::npos);

  write_file(dir / "dup.jsonl", triplet_line("t1", "object") + triplet_line("t1", "action"));
  CHECK(error_of([&] { load_triplets(dir / "dup.jsonl"); }).find("duplicate") != std::string::npos);

  write_file(dir / "same.jsonl",
             R"({"id":"x","video_ref":"v","caption_pos":"a","caption_neg":"a","misalignment":"object"})"
             "\n");
  CHECK_THROWS_AS(load_triplets(dir / "same.jsonl"), DataError);
  CHECK_THROWS_AS(load_triplets(dir / "absent.jsonl"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("synthetic manifest resolves triplet ids") {
  const auto dir = oracle::scratch_dir("corpus_syn");
  write_file(dir / "t.jsonl", triplet_line("t1", "object") + triplet_line("t2", "action"));
  const auto triplets = load_triplets(dir / "t.jsonl");

  write_file(dir / "ok.jsonl", R"({"triplet_id":"t1","generator_id":"g1","video_ref":"s/1"})"
                               "\n"
                               R"({"triplet_id":"t2","generator_id":"g1","video_ref":"s/2"})"
                               "\n");
  CHECK(load_synthetic_manifest(dir / "ok.jsonl", triplets).size() == 2);

  write_file(dir / "ghost.jsonl", R"({"triplet_id":"ghost","generator_id":"g1","video_ref":"s/g"})"
                                  "\n");
  CHECK(error_of([&] { load_synthetic_manifest(dir / "ghost.jsonl", triplets); }).find("ghost") !=
        std::string::npos);

  write_file(dir / "empty.jsonl", "");
  CHECK(load_synthetic_manifest(dir / "empty.jsonl", triplets).empty());
  fs::remove_all(dir);
}

TEST_CASE("join_samples arithmetic") {
  std::vector<Triplet> triplets = {{"t1", "v1", "a b", "a c", MisalignmentType::kObject, ""},
                                   {"t2", "v2", "d e", "d f", MisalignmentType::kAction, ""}};
  std::vector<SyntheticVideo> synthetics = {
      {"t1", "cogvideox", "s1"}, {"t1", "lavie", "s2"}, {"t1", "videocrafter2", "s3"}};
  const auto samples = join_samples(triplets, synthetics);
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].synthetic->generator_id == "cogvideox");
  CHECK(samples[2].synthetic->generator_id == "videocrafter2");
  CHECK_FALSE(samples[3].has_synthetic());
  CHECK(samples[3].triplet.id == "t2");

  CHECK(join_samples(triplets, {}).size() == 2);
  CHECK(join_samples(std::span(triplets).first(1), synthetics).size() == 3);
}

TEST_CASE("join_samples emits one sample per synthetic or one per bare triplet") {
  ToyCorpusConfig config;
  config.n_triplets = 40;
  config.n_generators = 3;
  const auto corpus = make_toy_corpus(config);
  std::vector<SyntheticVideo> partial;
  std::map<std::string, std::size_t> per_triplet;
  for (std::size_t i = 0; i < corpus.synthetics.size(); i += 2) {
    partial.push_back(corpus.synthetics[i]);
    ++per_triplet[corpus.synthetics[i].triplet_id];
  }
  std::size_t expected = 0;
  for (const auto& t : corpus.triplets) expected += std::max<std::size_t>(1, per_triplet[t.id]);
  CHECK(join_samples(corpus.triplets, partial).size() == expected);
}

TEST_CASE("toy corpus is seeded and byte-identical across runs") {
  const auto dir = oracle::scratch_dir("corpus_toy");
  ToyCorpusConfig config;
  config.n_triplets = 50;
  config.n_generators = 2;
  for (const char* name : {"a", "b"}) {
    const auto corpus = make_toy_corpus(config);
    save_triplets(dir / (std::string(name) + "_t.jsonl"), corpus.triplets);
    save_synthetic_manifest(dir / (std::string(name) + "_s.jsonl"), corpus.synthetics);
    save_embeddings(dir / (std::string(name) + "_f.jsonl"), corpus.features);
  }
  CHECK(read_file(dir / "a_t.jsonl") == read_file(dir / "b_t.jsonl"));
  CHECK(read_file(dir / "a_s.jsonl") == read_file(dir / "b_s.jsonl"));
  CHECK(read_file(dir / "a_f.jsonl") == read_file(dir / "b_f.jsonl"));

  config.seed = 1;
  save_triplets(dir / "c_t.jsonl", make_toy_corpus(config).triplets);
  CHECK(read_file(dir / "a_t.jsonl") != read_file(dir / "c_t.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("toy corpus structure") {
  ToyCorpusConfig config;
  config.n_triplets = 60;
  config.n_generators = 3;
  config.n_heldout = 20;
  const auto corpus = make_toy_corpus(config);
  CHECK(corpus.triplets.size() == 60);
  CHECK(corpus.heldout.size() == 20);
  CHECK(corpus.synthetics.size() == 180);
  CHECK(corpus.ground_truth.size() == 180);
  CHECK(corpus.synthetics[0].generator_id == "cogvideox");
  CHECK(corpus.synthetics[1].generator_id == "lavie");
  CHECK(corpus.synthetics[2].generator_id == "videocrafter2");
  CHECK(corpus.concepts.size() == config.vocab_size);
  for (const auto& t : corpus.triplets) {
    const auto pos = tokenize(t.caption_pos);
    const auto neg = tokenize(t.caption_neg);
    REQUIRE(pos.size() == config.caption_length);
    REQUIRE(neg.size() == config.caption_length);
    CHECK(shared_caption(t.caption_pos, t.caption_neg).length() == pos.size() - 1);
    CHECK(corpus.features.contains(t.video_ref));
  }
  for (const auto& t : corpus.heldout) CHECK(corpus.features.contains(t.video_ref));
}

TEST_CASE("unit fidelity without noise reproduces the negative caption embedding") {
  ToyCorpusConfig config;
  config.n_triplets = 30;
  config.noise_sigma = 0.0;
  config.fidelity = 1.0;
  const auto corpus = make_toy_corpus(config);
  std::map<std::string, const Triplet*> by_id;
  for (const auto& t : corpus.triplets) by_id[t.id] = &t;
  for (const auto& s : corpus.synthetics) {
    CHECK(corpus.features.at(s.video_ref) == caption_embedding(corpus.concepts, by_id.at(s.triplet_id)->caption_neg));
  }
  for (const auto& t : corpus.triplets) {
    CHECK(corpus.features.at(t.video_ref) == caption_embedding(corpus.concepts, t.caption_pos));
  }
}

TEST_CASE("oracle score difference grows with fidelity") {
  ToyCorpusConfig config;
  config.n_triplets = 500;
  std::vector<double> means;
  for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    config.fidelity = rho;
    means.push_back(mean_oracle_difference(make_toy_corpus(config)));
  }
  CHECK(means[0] < 0.0);
  CHECK(std::abs(means[2]) < 0.02);
  CHECK(means[4] > 0.0);
  for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] > means[i - 1]);
}

TEST_CASE("low-fidelity share and per-type overrides") {
  ToyCorpusConfig config;
  config.n_triplets = 100;
  config.n_generators = 3;
  config.low_fidelity_fraction = 0.5;
  config.low_fidelity = 0.0;
  auto corpus = make_toy_corpus(config);
  std::size_t low = 0;
  for (const auto& row : corpus.ground_truth) low += row.fidelity == 0.0;
  CHECK(low == 150);

  config.low_fidelity_fraction = 0.0;
  config.fidelity = 0.9;
  config.fidelity_by_type = {{MisalignmentType::kHallucination, 0.4}};
  corpus = make_toy_corpus(config);
  for (const auto& row : corpus.ground_truth) {
    CHECK(row.fidelity == (row.misalignment == MisalignmentType::kHallucination ? 0.4 : 0.9));
  }
}

TEST_CASE("toy config validation") {
  ToyCorpusConfig config;
  CHECK_NOTHROW(config.validate());
  config.fidelity = 1.5;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.vocab_size = config.caption_length;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = {};
  config.n_triplets = 0;
  CHECK_THROWS_AS(make_toy_corpus(config), ConfigError);
}

TEST_CASE("manifests round-trip losslessly") {
  const auto dir = oracle::scratch_dir("corpus_roundtrip");
  ToyCorpusConfig config;
  config.n_triplets = 25;
  config.n_generators = 2;
  const auto corpus = make_toy_corpus(config);
  save_triplets(dir / "t.jsonl", corpus.triplets);
  save_synthetic_manifest(dir / "s.jsonl", corpus.synthetics);
  save_embeddings(dir / "f.jsonl", corpus.features);
  save_embeddings(dir / "c.jsonl", corpus.concepts, "token");
  save_ground_truth(dir / "g.jsonl", corpus.ground_truth);

  const auto triplets = load_triplets(dir / "t.jsonl");
  CHECK(triplets == corpus.triplets);
  CHECK(load_synthetic_manifest(dir / "s.jsonl", triplets) == corpus.synthetics);
  const auto features = load_embeddings(dir / "f.jsonl");
  CHECK(features.keys() == corpus.features.keys());
  for (const auto& key : features.keys()) CHECK(features.at(key) == corpus.features.at(key));
  const auto concepts = load_embeddings(dir / "c.jsonl", "token");
  CHECK(concepts.keys() == corpus.concepts.keys());
  CHECK(load_ground_truth(dir / "g.jsonl").size() == corpus.ground_truth.size());

  save_triplets(dir / "t2.jsonl", triplets);
  CHECK(read_file(dir / "t.jsonl") == read_file(dir / "t2.jsonl"));
  fs::remove_all(dir);
}

TEST_CASE("embeddings reject inconsistent rows") {
  Embeddings e(3);
  e.insert("a", {1, 2, 3});
  CHECK_THROWS_AS(e.insert("a", {1, 2, 3}), DataError);
  CHECK_THROWS_AS(e.insert("b", {1, 2}), DataError);
  CHECK_THROWS_AS(e.at("missing"), DataError);
  CHECK(e.find("missing") == nullptr);
}
