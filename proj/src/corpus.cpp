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

#include "synvita/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "synvita/captions.hpp"
#include "synvita/errors.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace {

using jsonl::Json;

constexpr std::array<std::string_view, 7> kTypeNames = {
    "object", "action", "attribute", "counting", "relation", "hallucination", "event_order_flip"};

constexpr std::array<std::string_view, 48> kToyWords = {
    "man",     "woman",  "dog",    "horse",   "ball",    "door",   "cup",    "car",
    "runs",    "jumps",  "opens",  "pours",   "throws",  "watches", "holds", "drops",
    "red",     "blue",   "small",  "large",   "wooden",  "bright", "empty",  "full",
    "two",     "three",  "four",   "several", "above",   "behind", "inside", "beside",
    "slowly",  "quickly", "then",  "after",   "kitchen", "street", "field",  "table",
    "guitar",  "bottle", "window", "bicycle", "singing", "laughing", "folding", "cutting"};

std::string toy_word(std::size_t index) {
  if (index < kToyWords.size()) return std::string(kToyWords[index]);
  return "w" + std::to_string(index);
}

std::string padded_id(char prefix, std::size_t index) {
  std::ostringstream os;
  os << prefix << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

std::string generator_name(std::size_t index) {
  static const std::array<std::string_view, 3> names = {"cogvideox", "lavie", "videocrafter2"};
  if (index < names.size()) return std::string(names[index]);
  return "generator" + std::to_string(index);
}

Json triplet_to_json(const Triplet& t) {
  Json j;
  j["id"] = t.id;
  j["video_ref"] = t.video_ref;
  j["caption_pos"] = t.caption_pos;
  j["caption_neg"] = t.caption_neg;
  j["misalignment"] = std::string(to_string(t.misalignment));
  j["source"] = t.source;
  return j;
}

}  // namespace

const std::vector<MisalignmentType>& all_misalignment_types() {
  static const std::vector<MisalignmentType> types = {
      MisalignmentType::kObject,   MisalignmentType::kAction,        MisalignmentType::kAttribute,
      MisalignmentType::kCounting, MisalignmentType::kRelation,      MisalignmentType::kHallucination,
      MisalignmentType::kEventOrderFlip};
  return types;
}

std::string_view to_string(MisalignmentType type) {
  return kTypeNames[static_cast<std::size_t>(type)];
}

std::optional<MisalignmentType> parse_misalignment(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == ' ' || c == '-') c = '_';
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "flip") key = "event_order_flip";
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (key == kTypeNames[i]) return static_cast<MisalignmentType>(i);
  }
  return std::nullopt;
}

void Embeddings::insert(std::string key, std::vector<double> values) {
  if (rows_.empty() && dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) {
    throw DataError("vector for \"" + key + "\" has length " + std::to_string(values.size()) +
                    ", expected " + std::to_string(dim_));
  }
  auto [it, inserted] = rows_.try_emplace(key, std::move(values));
  if (!inserted) throw DataError("duplicate vector key \"" + key + "\"");
  order_.push_back(std::move(key));
}

const std::vector<double>& Embeddings::at(const std::string& key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) throw DataError("no vector for \"" + key + "\"");
  return it->second;
}

const std::vector<double>* Embeddings::find(const std::string& key) const {
  auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  std::vector<Triplet> out;
  std::set<std::string> seen;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    Triplet t;
    t.id = jsonl::string_field(r, "id", line);
    t.video_ref = jsonl::string_field(r, "video_ref", line);
    t.caption_pos = jsonl::string_field(r, "caption_pos", line);
    t.caption_neg = jsonl::string_field(r, "caption_neg", line);
    t.source = r.contains("source") ? jsonl::string_field(r, "source", line) : std::string();
    const auto type_text = jsonl::string_field(r, "misalignment", line);
    auto type = parse_misalignment(type_text);
    if (!type) {
      throw DataError("unknown misalignment \"" + type_text + "\" at line " + std::to_string(line));
    }
    t.misalignment = *type;
    if (t.caption_pos == t.caption_neg) {
      throw DataError("identical positive and negative captions at line " + std::to_string(line));
    }
    if (!seen.insert(t.id).second) {
      throw DataError("duplicate triplet id \"" + t.id + "\" at line " + std::to_string(line));
    }
    out.push_back(std::move(t));
  });
  return out;
}

void save_triplets(const std::filesystem::path& path, std::span<const Triplet> triplets) {
  auto out = jsonl::open_for_write(path);
  for (const auto& t : triplets) jsonl::write(out, triplet_to_json(t));
}

std::vector<SyntheticVideo> load_synthetic_manifest(const std::filesystem::path& path,
                                                    std::span<const Triplet> triplets) {
  std::set<std::string> known;
  for (const auto& t : triplets) known.insert(t.id);

  std::vector<SyntheticVideo> out;
  std::set<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> dangling;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    SyntheticVideo s;
    s.triplet_id = jsonl::string_field(r, "triplet_id", line);
    s.generator_id = jsonl::string_field(r, "generator_id", line);
    s.video_ref = jsonl::string_field(r, "video_ref", line);
    if (!known.count(s.triplet_id)) {
      dangling.push_back(s.triplet_id);
      return;
    }
    if (!pairs.emplace(s.triplet_id, s.generator_id).second) {
      throw DataError("duplicate synthetic video (" + s.triplet_id + ", " + s.generator_id +
                      ") at line " + std::to_string(line));
    }
    out.push_back(std::move(s));
  });
  if (!dangling.empty()) {
    std::string ids;
    for (const auto& id : dangling) ids += (ids.empty() ? "" : ", ") + id;
    throw DataError("synthetic manifest references unknown triplets: " + ids);
  }
  return out;
}

void save_synthetic_manifest(const std::filesystem::path& path,
                             std::span<const SyntheticVideo> synthetics) {
  auto out = jsonl::open_for_write(path);
  for (const auto& s : synthetics) {
    Json j;
    j["triplet_id"] = s.triplet_id;
    j["generator_id"] = s.generator_id;
    j["video_ref"] = s.video_ref;
    jsonl::write(out, j);
  }
}

Embeddings load_embeddings(const std::filesystem::path& path, std::string_view key_field) {
  Embeddings table;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    auto key = jsonl::string_field(r, key_field, line);
    auto it = r.find("features");
    if (it == r.end() || !it->is_array()) {
      throw DataError("missing \"features\" array at line " + std::to_string(line));
    }
    std::vector<double> values;
    values.reserve(it->size());
    for (const auto& v : *it) {
      if (!v.is_number()) throw DataError("non-numeric feature at line " + std::to_string(line));
      values.push_back(v.get<double>());
    }
    try {
      table.insert(std::move(key), std::move(values));
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " + std::to_string(line));
    }
  });
  return table;
}

void save_embeddings(const std::filesystem::path& path, const Embeddings& embeddings,
                     std::string_view key_field) {
  auto out = jsonl::open_for_write(path);
  for (const auto& key : embeddings.keys()) {
    Json j;
    j[std::string(key_field)] = key;
    j["features"] = embeddings.at(key);
    jsonl::write(out, j);
  }
}

std::vector<TrainingSample> join_samples(std::span<const Triplet> triplets,
                                         std::span<const SyntheticVideo> synthetics) {
  std::unordered_map<std::string, std::vector<const SyntheticVideo*>> by_triplet;
  for (const auto& s : synthetics) by_triplet[s.triplet_id].push_back(&s);

  std::vector<TrainingSample> out;
  for (const auto& t : triplets) {
    auto it = by_triplet.find(t.id);
    if (it == by_triplet.end()) {
      out.push_back(TrainingSample{t, std::nullopt, std::nullopt});
      continue;
    }
    for (const auto* s : it->second) out.push_back(TrainingSample{t, *s, std::nullopt});
  }
  return out;
}

void ToyCorpusConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (n_triplets == 0) throw ConfigError("toy corpus: n_triplets must be positive");
  if (feature_dim < 2) throw ConfigError("toy corpus: feature_dim must be >= 2");
  if (vocab_size < 4) throw ConfigError("toy corpus: vocab_size must be >= 4");
  if (!in_unit(fidelity)) throw ConfigError("toy corpus: fidelity must lie in [0, 1]");
  if (!(noise_sigma >= 0.0)) throw ConfigError("toy corpus: noise_sigma must be >= 0");
  if (caption_length == 0) throw ConfigError("toy corpus: caption_length must be positive");
  if (caption_length >= vocab_size) {
    throw ConfigError("toy corpus: vocab_size must exceed caption_length");
  }
  if (!in_unit(low_fidelity_fraction) || !in_unit(low_fidelity)) {
    throw ConfigError("toy corpus: low_fidelity settings must lie in [0, 1]");
  }
  for (const auto& [type, rho] : fidelity_by_type) {
    if (!in_unit(rho)) {
      throw ConfigError("toy corpus: fidelity for " + std::string(to_string(type)) +
                        " must lie in [0, 1]");
    }
  }
}

std::vector<double> caption_embedding(const Embeddings& concepts, std::string_view caption) {
  const auto seq = tokenize(caption);
  std::vector<double> out(concepts.dim(), 0.0);
  if (seq.empty()) return out;
  for (const auto& token : seq.tokens) {
    const auto& row = concepts.at(token);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[k];
  }
  for (auto& v : out) v /= static_cast<double>(seq.size());
  return out;
}

ToyCorpus make_toy_corpus(const ToyCorpusConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> concept_dist(0.0, 1.0 / std::sqrt(static_cast<double>(config.feature_dim)));
  std::normal_distribution<double> noise_dist(0.0, 1.0);

  ToyCorpus corpus;
  corpus.concepts = Embeddings(config.feature_dim);
  corpus.features = Embeddings(config.feature_dim);
  std::vector<std::vector<double>> matrix(config.vocab_size);
  for (std::size_t v = 0; v < config.vocab_size; ++v) {
    matrix[v].resize(config.feature_dim);
    for (auto& x : matrix[v]) x = concept_dist(rng);
    corpus.concepts.insert(toy_word(v), matrix[v]);
  }

  auto mean_of = [&](const std::vector<std::size_t>& tokens) {
    std::vector<double> out(config.feature_dim, 0.0);
    for (auto t : tokens) {
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += matrix[t][k];
    }
    for (auto& x : out) x /= static_cast<double>(tokens.size());
    return out;
  };
  auto add_noise = [&](std::vector<double> v) {
    for (auto& x : v) x += config.noise_sigma * noise_dist(rng);
    return v;
  };
  auto render = [](const std::vector<std::size_t>& tokens) {
    std::string out;
    for (auto t : tokens) out += (out.empty() ? "" : " ") + toy_word(t);
    return out;
  };

  std::vector<std::size_t> pool(config.vocab_size);
  struct Draw {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    MisalignmentType type;
  };
  auto draw_triplet = [&]() {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates: the first caption_length entries become the caption
    for (std::size_t i = 0; i < config.caption_length; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    Draw d;
    d.pos.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(config.caption_length));
    d.neg = d.pos;
    std::uniform_int_distribution<std::size_t> position(0, config.caption_length - 1);
    std::uniform_int_distribution<std::size_t> replacement(config.caption_length, pool.size() - 1);
    d.neg[position(rng)] = pool[replacement(rng)];
    std::uniform_int_distribution<std::size_t> type(0, kNumMisalignmentTypes - 1);
    d.type = static_cast<MisalignmentType>(type(rng));
    return d;
  };

  std::vector<Draw> draws;
  draws.reserve(config.n_triplets);
  for (std::size_t i = 0; i < config.n_triplets; ++i) {
    Draw d = draw_triplet();
    Triplet t;
    t.id = padded_id('t', i);
    t.video_ref = "real/" + t.id;
    t.caption_pos = render(d.pos);
    t.caption_neg = render(d.neg);
    t.misalignment = d.type;
    t.source = "toy";
    corpus.features.insert(t.video_ref, add_noise(mean_of(d.pos)));
    corpus.triplets.push_back(std::move(t));
    draws.push_back(std::move(d));
  }

  // Which synthetic videos are drawn at low fidelity: an exact count, chosen
  // by a seeded permutation over (triplet, generator) slots.
  const std::size_t n_slots = config.n_triplets * config.n_generators;
  std::vector<bool> low(n_slots, false);
  {
    const auto n_low = static_cast<std::size_t>(std::llround(config.low_fidelity_fraction * n_slots));
    std::vector<std::size_t> order(n_slots);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n_low; ++i) low[order[i]] = true;
  }

  for (std::size_t i = 0; i < config.n_triplets; ++i) {
    const auto& t = corpus.triplets[i];
    const auto e_pos = mean_of(draws[i].pos);
    const auto e_neg = mean_of(draws[i].neg);
    for (std::size_t g = 0; g < config.n_generators; ++g) {
      double rho = low[i * config.n_generators + g] ? config.low_fidelity : config.fidelity;
      if (auto it = config.fidelity_by_type.find(t.misalignment); it != config.fidelity_by_type.end()) {
        rho = it->second;
      }
      SyntheticVideo s;
      s.triplet_id = t.id;
      s.generator_id = generator_name(g);
      s.video_ref = "syn/" + s.generator_id + "/" + t.id;
      std::vector<double> v(config.feature_dim);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] = rho * e_neg[k] + (1.0 - rho) * e_pos[k];
      corpus.features.insert(s.video_ref, add_noise(std::move(v)));
      corpus.ground_truth.push_back({t.id, s.generator_id, t.misalignment, rho});
      corpus.synthetics.push_back(std::move(s));
    }
  }

  for (std::size_t i = 0; i < config.n_heldout; ++i) {
    Draw d = draw_triplet();
    Triplet t;
    t.id = padded_id('h', i);
    t.video_ref = "real/" + t.id;
    t.caption_pos = render(d.pos);
    t.caption_neg = render(d.neg);
    t.misalignment = d.type;
    t.source = "toy-heldout";
    corpus.features.insert(t.video_ref, add_noise(mean_of(d.pos)));
    corpus.heldout.push_back(std::move(t));
  }
  return corpus;
}

void save_ground_truth(const std::filesystem::path& path, std::span<const GroundTruthRow> rows) {
  auto out = jsonl::open_for_write(path);
  for (const auto& r : rows) {
    Json j;
    j["triplet_id"] = r.triplet_id;
    j["generator_id"] = r.generator_id;
    j["misalignment"] = std::string(to_string(r.misalignment));
    j["fidelity"] = r.fidelity;
    jsonl::write(out, j);
  }
}

std::vector<GroundTruthRow> load_ground_truth(const std::filesystem::path& path) {
  std::vector<GroundTruthRow> rows;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    GroundTruthRow row;
    row.triplet_id = jsonl::string_field(r, "triplet_id", line);
    row.generator_id = jsonl::string_field(r, "generator_id", line);
    auto type = parse_misalignment(jsonl::string_field(r, "misalignment", line));
    if (!type) throw DataError("unknown misalignment at line " + std::to_string(line));
    row.misalignment = *type;
    row.fidelity = jsonl::number_field(r, "fidelity", line);
    rows.push_back(std::move(row));
  });
  return rows;
}

}  // namespace synvita
