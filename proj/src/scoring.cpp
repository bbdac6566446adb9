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

#include "synvita/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "synvita/captions.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace {

using jsonl::Json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

ScorerError::ScorerError(std::string scorer_id, std::size_t frame_index, const std::string& what)
    : DataError("scorer \"" + scorer_id + "\" failed on frame " + std::to_string(frame_index) +
                ": " + what),
      scorer_id_(std::move(scorer_id)),
      frame_index_(frame_index) {}

OracleScorer::OracleScorer(const Embeddings& features, const Embeddings& concepts, Params params,
                           std::string id)
    : features_(features), concepts_(concepts), params_(params), id_(std::move(id)) {
  if (features_.size() > 0 && concepts_.size() > 0 && features_.dim() != concepts_.dim()) {
    throw ConfigError("oracle scorer: feature and concept dimensions differ");
  }
}

double OracleScorer::score(const std::string& video_ref, std::size_t /*frame_index*/,
                           std::string_view caption) const {
  const auto& v = features_.at(video_ref);
  const auto e = caption_embedding(concepts_, caption);
  double dot = 0.0;
  double nv = 0.0;
  double ne = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    dot += v[k] * e[k];
    nv += v[k] * v[k];
    ne += e[k] * e[k];
  }
  const double cosine = (nv > 0.0 && ne > 0.0) ? dot / std::sqrt(nv * ne) : 0.0;
  return sigmoid(params_.temperature * (cosine - params_.offset));
}

std::vector<std::size_t> sample_frame_indices(std::size_t frame_count, std::size_t n_frames) {
  if (n_frames == 0) throw ConfigError("n_frames must be >= 1");
  if (frame_count == 0) throw DataError("video has no frames");
  std::vector<std::size_t> out(n_frames, 0);
  if (n_frames == 1) return out;
  const double step = static_cast<double>(frame_count - 1) / static_cast<double>(n_frames - 1);
  for (std::size_t k = 0; k < n_frames; ++k) {
    out[k] = static_cast<std::size_t>(std::llround(static_cast<double>(k) * step));
  }
  return out;
}

std::string caption_key(std::string_view caption) {
  const std::string normalized = tokenize(caption).joined();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(normalized.data(), normalized.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

ScoreCache::ScoreCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    // A crash can leave a torn final line; it is dropped and rewritten later.
    std::ifstream in(path_);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      Json r;
      try {
        r = Json::parse(text);
      } catch (const nlohmann::json::parse_error&) {
        if (in.peek() == std::char_traits<char>::eof()) break;
        throw DataError(path_.string() + ": malformed score record at line " + std::to_string(line));
      }
      const auto score = jsonl::number_field(r, "score", line);
      const auto frame = jsonl::number_field(r, "frame_index", line);
      index_[index_key(jsonl::string_field(r, "video_ref", line),
                       jsonl::string_field(r, "caption_key", line),
                       jsonl::string_field(r, "scorer_id", line),
                       static_cast<std::size_t>(frame))] = score;
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  log_.open(path_, std::ios::app);
  if (!log_) throw DataError("cannot open score cache " + path_.string());
}

std::string ScoreCache::index_key(const std::string& video_ref, const std::string& caption_key,
                                  const std::string& scorer_id, std::size_t frame_index) {
  std::string key;
  key.reserve(video_ref.size() + caption_key.size() + scorer_id.size() + 24);
  key += video_ref;
  key += '\x1f';
  key += caption_key;
  key += '\x1f';
  key += scorer_id;
  key += '\x1f';
  key += std::to_string(frame_index);
  return key;
}

std::optional<double> ScoreCache::lookup(const std::string& video_ref,
                                         const std::string& caption_key,
                                         const std::string& scorer_id,
                                         std::size_t frame_index) const {
  const auto key = index_key(video_ref, caption_key, scorer_id, frame_index);
  std::shared_lock lock(mutex_);
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool ScoreCache::append(const ScoreRecord& record) {
  const auto key = index_key(record.video_ref, record.caption_key, record.scorer_id, record.frame_index);
  std::unique_lock lock(mutex_);
  if (!index_.emplace(key, record.score).second) return false;
  if (log_.is_open()) {
    Json j;
    j["video_ref"] = record.video_ref;
    j["caption_key"] = record.caption_key;
    j["scorer_id"] = record.scorer_id;
    j["frame_index"] = record.frame_index;
    j["score"] = record.score;
    log_ << j.dump() << '\n';
    log_.flush();
  }
  return true;
}

std::size_t ScoreCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

double ensemble_score(const std::string& video_ref, std::string_view caption,
                      std::span<const FrameScorer* const> scorers, std::size_t n_frames,
                      std::size_t frame_count_of_video, ScoreCache* cache) {
  if (scorers.empty()) throw ConfigError("ensemble_score: no scorers");
  const auto frames = sample_frame_indices(frame_count_of_video, n_frames);
  const std::string key = cache ? caption_key(caption) : std::string();
  double total = 0.0;
  for (const FrameScorer* scorer : scorers) {
    const std::string sid = scorer->id();
    for (std::size_t frame : frames) {
      if (cache) {
        if (auto hit = cache->lookup(video_ref, key, sid, frame)) {
          total += *hit;
          continue;
        }
      }
      double s = 0.0;
      try {
        s = scorer->score(video_ref, frame, caption);
      } catch (const ScorerError&) {
        throw;
      } catch (const std::exception& e) {
        throw ScorerError(sid, frame, e.what());
      }
      if (!(s >= 0.0 && s <= 1.0)) throw ScorerError(sid, frame, "score outside [0, 1]");
      if (cache) cache->append({video_ref, key, sid, frame, s});
      total += s;
    }
  }
  return total / static_cast<double>(scorers.size() * frames.size());
}

void ScoreTable::add(SampleScores row) {
  auto key = std::make_pair(row.triplet_id, row.generator_id);
  if (index_.count(key)) {
    throw DataError("duplicate scores for (" + row.triplet_id + ", " + row.generator_id + ")");
  }
  index_.emplace(std::move(key), rows_.size());
  rows_.push_back(std::move(row));
}

const SampleScores* ScoreTable::find(const std::string& triplet_id,
                                     const std::string& generator_id) const {
  auto it = index_.find({triplet_id, generator_id});
  return it == index_.end() ? nullptr : &rows_[it->second];
}

bool ScoreTable::operator==(const ScoreTable& other) const {
  if (rows_.size() != other.rows_.size()) return false;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& a = rows_[i];
    const auto& b = other.rows_[i];
    if (a.triplet_id != b.triplet_id || a.generator_id != b.generator_id ||
        a.video_ref != b.video_ref || a.misalignment != b.misalignment || a.s_pos != b.s_pos ||
        a.s_neg != b.s_neg) {
      return false;
    }
  }
  return true;
}

void save_score_table(const std::filesystem::path& path, const ScoreTable& table) {
  auto out = jsonl::open_for_write(path);
  for (const auto& r : table.rows()) {
    Json j;
    j["triplet_id"] = r.triplet_id;
    j["generator_id"] = r.generator_id;
    j["video_ref"] = r.video_ref;
    j["misalignment"] = std::string(to_string(r.misalignment));
    j["s_pos"] = r.s_pos;
    j["s_neg"] = r.s_neg;
    jsonl::write(out, j);
  }
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  ScoreTable table;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    SampleScores s;
    s.triplet_id = jsonl::string_field(r, "triplet_id", line);
    s.generator_id = jsonl::string_field(r, "generator_id", line);
    s.video_ref = jsonl::string_field(r, "video_ref", line);
    auto type = parse_misalignment(jsonl::string_field(r, "misalignment", line));
    if (!type) throw DataError("unknown misalignment at line " + std::to_string(line));
    s.misalignment = *type;
    s.s_pos = jsonl::number_field(r, "s_pos", line);
    s.s_neg = jsonl::number_field(r, "s_neg", line);
    table.add(std::move(s));
  });
  return table;
}

ScoreTable score_corpus(std::span<const TrainingSample> samples,
                        std::span<const FrameScorer* const> scorers, ScoreCache& cache,
                        const ScoringOptions& options) {
  std::vector<const TrainingSample*> todo;
  for (const auto& s : samples) {
    if (s.has_synthetic()) todo.push_back(&s);
  }
  std::vector<SampleScores> rows(todo.size());

  auto score_one = [&](std::size_t i) {
    const auto& sample = *todo[i];
    const auto& video = sample.synthetic->video_ref;
    const std::size_t frames =
        options.frame_count_of ? options.frame_count_of(video) : options.default_frame_count;
    SampleScores row;
    row.triplet_id = sample.triplet.id;
    row.generator_id = sample.synthetic->generator_id;
    row.video_ref = video;
    row.misalignment = sample.triplet.misalignment;
    try {
      row.s_pos = ensemble_score(video, sample.triplet.caption_neg, scorers, options.n_frames,
                                 frames, &cache);
      row.s_neg = ensemble_score(video, sample.triplet.caption_pos, scorers, options.n_frames,
                                 frames, &cache);
    } catch (const DataError& e) {
      throw DataError("scoring sample (" + row.triplet_id + ", " + row.generator_id +
                      "): " + e.what());
    }
    rows[i] = std::move(row);
  };

  const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.threads, todo.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < todo.size(); ++i) score_one(i);
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    {
      std::vector<std::jthread> workers;
      for (std::size_t w = 0; w < n_threads; ++w) {
        workers.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < todo.size(); i += n_threads) score_one(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ScoreTable table;
  for (auto& row : rows) table.add(std::move(row));
  return table;
}

namespace {
constexpr std::array<std::string_view, 5> kStrategyNames = {"fixed", "pos_only", "product",
                                                            "indicator", "clamped_diff"};
}

std::string_view to_string(WeightStrategy strategy) {
  return kStrategyNames[static_cast<std::size_t>(strategy)];
}

WeightStrategy parse_weight_strategy(std::string_view name) {
  for (std::size_t i = 0; i < kStrategyNames.size(); ++i) {
    if (name == kStrategyNames[i]) return static_cast<WeightStrategy>(i);
  }
  throw ConfigError("unknown weighting strategy \"" + std::string(name) + "\"");
}

const std::vector<WeightStrategy>& all_weight_strategies() {
  static const std::vector<WeightStrategy> all = {WeightStrategy::kFixed, WeightStrategy::kPosOnly,
                                                  WeightStrategy::kProduct, WeightStrategy::kIndicator,
                                                  WeightStrategy::kClampedDiff};
  return all;
}

double compute_weight(WeightStrategy strategy, double s_pos, double s_neg) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(s_pos) || !in_unit(s_neg)) {
    throw DataError("alignment scores must lie in [0, 1], got (" + std::to_string(s_pos) + ", " +
                    std::to_string(s_neg) + ")");
  }
  switch (strategy) {
    case WeightStrategy::kFixed:
      return 1.0;
    case WeightStrategy::kPosOnly:
      return s_pos;
    case WeightStrategy::kProduct:
      return s_pos * (1.0 - s_neg);
    case WeightStrategy::kIndicator:
      return s_pos > s_neg ? 1.0 : 0.0;
    case WeightStrategy::kClampedDiff:
      return std::max(0.0, s_pos - s_neg);
  }
  throw ConfigError("unhandled weighting strategy");
}

std::vector<WeightRecord> weigh_samples(std::span<const TrainingSample> samples,
                                        const ScoreTable& scores, WeightStrategy strategy) {
  std::vector<WeightRecord> out;
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    if (!s.has_synthetic()) continue;
    const auto* row = scores.find(s.triplet.id, s.synthetic->generator_id);
    if (!row) {
      missing.push_back(s.triplet.id + "/" + s.synthetic->generator_id);
      continue;
    }
    out.push_back({s.triplet.id, s.synthetic->generator_id, strategy, row->s_pos, row->s_neg,
                   compute_weight(strategy, row->s_pos, row->s_neg)});
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
    throw DataError("no alignment scores for samples: " + ids);
  }
  return out;
}

void apply_weights(std::span<TrainingSample> samples, std::span<const WeightRecord> weights) {
  std::map<std::pair<std::string, std::string>, double> by_key;
  for (const auto& w : weights) by_key[{w.triplet_id, w.generator_id}] = w.omega;
  std::vector<std::string> missing;
  for (auto& s : samples) {
    if (!s.has_synthetic()) continue;
    auto it = by_key.find({s.triplet.id, s.synthetic->generator_id});
    if (it == by_key.end()) {
      missing.push_back(s.triplet.id + "/" + s.synthetic->generator_id);
      continue;
    }
    s.weight = it->second;
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& m : missing) ids += (ids.empty() ? "" : ", ") + m;
    throw DataError("no weight for samples: " + ids);
  }
}

void save_weights(const std::filesystem::path& path, std::span<const WeightRecord> weights) {
  auto out = jsonl::open_for_write(path);
  for (const auto& w : weights) {
    Json j;
    j["triplet_id"] = w.triplet_id;
    j["generator_id"] = w.generator_id;
    j["strategy"] = std::string(to_string(w.strategy));
    j["s_pos"] = w.s_pos;
    j["s_neg"] = w.s_neg;
    j["omega"] = w.omega;
    jsonl::write(out, j);
  }
}

std::vector<WeightRecord> load_weights(const std::filesystem::path& path) {
  std::vector<WeightRecord> out;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    WeightRecord w;
    w.triplet_id = jsonl::string_field(r, "triplet_id", line);
    w.generator_id = jsonl::string_field(r, "generator_id", line);
    try {
      w.strategy = parse_weight_strategy(jsonl::string_field(r, "strategy", line));
    } catch (const ConfigError& e) {
      throw DataError(std::string(e.what()) + " at line " + std::to_string(line));
    }
    w.s_pos = jsonl::number_field(r, "s_pos", line);
    w.s_neg = jsonl::number_field(r, "s_neg", line);
    w.omega = jsonl::number_field(r, "omega", line);
    if (compute_weight(w.strategy, w.s_pos, w.s_neg) != w.omega) {
      throw DataError("weight at line " + std::to_string(line) +
                      " does not match its strategy and scores");
    }
    out.push_back(std::move(w));
  });
  return out;
}

}  // namespace synvita
