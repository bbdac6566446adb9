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

#include "synvita/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "synvita/captions.hpp"
#include "synvita/errors.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace {

using jsonl::Json;

std::string join_words(const std::vector<std::string>& vocab, const std::vector<std::size_t>& ids) {
  std::string out;
  for (auto id : ids) out += (out.empty() ? "" : " ") + vocab[id];
  return out;
}

}  // namespace

void RetrievalTask::validate() const {
  const std::set<std::string> in_pool(pool.begin(), pool.end());
  for (const auto& c : classes) {
    if (c.relevant.empty()) throw DataError("retrieval class \"" + c.caption + "\" has no relevant videos");
    for (const auto& v : c.relevant) {
      if (!in_pool.count(v)) {
        throw DataError("relevant video \"" + v + "\" of class \"" + c.caption + "\" is not in the pool");
      }
    }
  }
}

void VqaItem::validate() const {
  if (candidates.size() < 2) throw DataError("VQA item for " + video_ref + " has fewer than 2 candidates");
  const auto correct = std::count_if(candidates.begin(), candidates.end(),
                                     [](const VqaCandidate& c) { return c.is_correct; });
  if (correct != 1) throw DataError("VQA item for " + video_ref + " must have exactly one correct candidate");
}

VideoCaptionScorer model_scorer(const AlignmentModel& model, const Embeddings& features) {
  return [&model, &features](const std::string& video_ref, const std::string& caption) {
    const auto ids = model.token_ids(tokenize(caption).tokens);
    return model.predict(features.at(video_ref), ids);
  };
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("auc_roc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("auc_roc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("AUC undefined: need both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of mid-ranks (1-based) of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) rank_sum += mid_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double average_precision(std::span<const std::string> ranking, std::span<const std::string> relevant) {
  if (relevant.empty()) throw DataError("average precision undefined without relevant items");
  const std::set<std::string> wanted(relevant.begin(), relevant.end());
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (!wanted.count(ranking[i])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(wanted.size());
}

double retrieval_map(const RetrievalTask& task, const RetrievalScoreFn& scores) {
  task.validate();
  if (task.classes.empty()) throw DataError("retrieval task has no classes");
  double total = 0.0;
  std::vector<double> values(task.pool.size());
  std::vector<std::size_t> order(task.pool.size());
  std::vector<std::string> ranking(task.pool.size());
  for (std::size_t c = 0; c < task.classes.size(); ++c) {
    for (std::size_t v = 0; v < task.pool.size(); ++v) {
      auto s = scores(c, task.pool[v]);
      if (!s) {
        throw DataError("no retrieval score for class \"" + task.classes[c].caption + "\" and video \"" +
                        task.pool[v] + "\"");
      }
      values[v] = *s;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) ranking[r] = task.pool[order[r]];
    total += average_precision(ranking, task.classes[c].relevant);
  }
  return total / static_cast<double>(task.classes.size());
}

double vqa_accuracy(std::span<const VqaItem> items, const VideoCaptionScorer& scorer) {
  if (items.empty()) throw DataError("vqa_accuracy: no items");
  std::size_t correct = 0;
  for (const auto& item : items) {
    item.validate();
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < item.candidates.size(); ++i) {
      const double s = scorer(item.video_ref, item.candidates[i].text);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (item.candidates[best].is_correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

std::vector<MisalignmentRow> misalignment_analysis(const ScoreTable& scores,
                                                   std::span<const Triplet> triplets) {
  std::unordered_map<std::string, MisalignmentType> type_of;
  for (const auto& t : triplets) type_of.emplace(t.id, t.misalignment);

  std::vector<std::vector<double>> groups(kNumMisalignmentTypes);
  for (const auto& row : scores.rows()) {
    auto it = type_of.find(row.triplet_id);
    if (it == type_of.end()) throw DataError("scores reference unknown triplet \"" + row.triplet_id + "\"");
    groups[static_cast<std::size_t>(it->second)].push_back(row.difference());
  }

  std::vector<MisalignmentRow> out;
  for (auto type : all_misalignment_types()) {
    const auto& diffs = groups[static_cast<std::size_t>(type)];
    MisalignmentRow row;
    row.type = type;
    row.count = diffs.size();
    if (!diffs.empty()) {
      const double n = static_cast<double>(diffs.size());
      const double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
      double var = 0.0;
      for (double d : diffs) var += (d - mean) * (d - mean);
      row.mean = mean;
      row.stddev = std::sqrt(var / n);
      for (double d : diffs) {
        auto bin = static_cast<std::ptrdiff_t>(std::floor((d + 1.0) / 2.0 * kHistogramBins));
        bin = std::clamp<std::ptrdiff_t>(bin, 0, kHistogramBins - 1);
        ++row.histogram[static_cast<std::size_t>(bin)];
      }
    }
    out.push_back(row);
  }
  return out;
}

void save_analysis_csv(const std::filesystem::path& path, std::span<const MisalignmentRow> rows) {
  auto out = jsonl::open_for_write(path);
  out.precision(17);
  out << "misalignment,count,mean,std";
  for (std::size_t b = 0; b < kHistogramBins; ++b) out << ",bin" << b;
  out << '\n';
  for (const auto& r : rows) {
    out << to_string(r.type) << ',' << r.count << ',';
    if (r.mean) out << *r.mean;
    out << ',';
    if (r.stddev) out << *r.stddev;
    for (auto c : r.histogram) out << ',' << c;
    out << '\n';
  }
}

void save_analysis_plots(const std::filesystem::path& dir, std::span<const MisalignmentRow> rows) {
  std::filesystem::create_directories(dir);
  constexpr double kWidth = 400.0;
  constexpr double kHeight = 200.0;
  for (const auto& r : rows) {
    auto out = jsonl::open_for_write(dir / ("hist_" + std::string(to_string(r.type)) + ".svg"));
    const auto peak = std::max<std::size_t>(1, *std::max_element(r.histogram.begin(), r.histogram.end()));
    const double bar = kWidth / kHistogramBins;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight + 20
        << "\">\n";
    out << "<text x=\"4\" y=\"14\" font-size=\"12\">" << to_string(r.type) << " (n=" << r.count
        << ")</text>\n";
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      const double h = kHeight * static_cast<double>(r.histogram[b]) / static_cast<double>(peak);
      out << "<rect x=\"" << b * bar << "\" y=\"" << kHeight + 20 - h << "\" width=\"" << bar - 1
          << "\" height=\"" << h << "\" fill=\"" << (b < kHistogramBins / 2 ? "#c0392b" : "#2e86c1")
          << "\"/>\n";
    }
    out << "<line x1=\"" << kWidth / 2 << "\" y1=\"20\" x2=\"" << kWidth / 2 << "\" y2=\"" << kHeight + 20
        << "\" stroke=\"black\"/>\n</svg>\n";
  }

  auto out = jsonl::open_for_write(dir / "means.svg");
  const double row_h = 24.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << row_h * static_cast<double>(rows.size()) << "\">\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = row_h * static_cast<double>(i);
    const double mean = rows[i].mean.value_or(0.0);
    const double len = std::abs(mean) * kWidth / 2.0;
    const double x = mean < 0 ? kWidth / 2 - len : kWidth / 2;
    out << "<rect x=\"" << x << "\" y=\"" << y + 4 << "\" width=\"" << len << "\" height=\"" << row_h - 8
        << "\" fill=\"" << (mean < 0 ? "#c0392b" : "#2e86c1") << "\"/>\n";
    out << "<text x=\"4\" y=\"" << y + 16 << "\" font-size=\"11\">" << to_string(rows[i].type) << "</text>\n";
  }
  out << "</svg>\n";
}

void save_task_report(const std::filesystem::path& path, const TaskReport& report) {
  Json j;
  j["task"] = report.task;
  j["metric"] = report.metric;
  j["value"] = report.value;
  j["n_items"] = report.n_items;
  j["config_digest"] = report.config_digest;
  auto out = jsonl::open_for_write(path);
  out << j.dump(2) << '\n';
}

TaskReport load_task_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  try {
    const auto j = Json::parse(in);
    TaskReport r;
    r.task = j.at("task").get<std::string>();
    r.metric = j.at("metric").get<std::string>();
    r.value = j.at("value").get<double>();
    r.n_items = j.at("n_items").get<std::size_t>();
    r.config_digest = j.at("config_digest").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed report " + path.string() + ": " + e.what());
  }
}

double evaluate_entailment(std::span<const EntailmentExample> examples, const VideoCaptionScorer& scorer) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& e : examples) {
    scores.push_back(scorer(e.video_ref, e.caption));
    labels.push_back(e.label);
  }
  return auc_roc(scores, labels);
}

double evaluate_retrieval(const RetrievalTask& task, const VideoCaptionScorer& scorer) {
  return retrieval_map(task, [&](std::size_t c, const std::string& video) -> std::optional<double> {
    return scorer(video, task.classes[c].caption);
  });
}

std::vector<EntailmentExample> load_entailment(const std::filesystem::path& path) {
  std::vector<EntailmentExample> out;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    EntailmentExample e;
    e.video_ref = jsonl::string_field(r, "video_ref", line);
    e.caption = jsonl::string_field(r, "caption", line);
    const double label = jsonl::number_field(r, "label", line);
    if (label != 0.0 && label != 1.0) throw DataError("label must be 0 or 1 at line " + std::to_string(line));
    e.label = static_cast<int>(label);
    out.push_back(std::move(e));
  });
  return out;
}

void save_entailment(const std::filesystem::path& path, std::span<const EntailmentExample> data) {
  auto out = jsonl::open_for_write(path);
  for (const auto& e : data) {
    Json j;
    j["video_ref"] = e.video_ref;
    j["caption"] = e.caption;
    j["label"] = e.label;
    jsonl::write(out, j);
  }
}

RetrievalTask load_retrieval(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  RetrievalTask task;
  try {
    const auto j = Json::parse(in);
    for (const auto& c : j.at("classes")) {
      task.classes.push_back({c.at("caption").get<std::string>(), c.at("relevant").get<std::vector<std::string>>()});
    }
    task.pool = j.at("pool").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed retrieval task " + path.string() + ": " + e.what());
  }
  task.validate();
  return task;
}

void save_retrieval(const std::filesystem::path& path, const RetrievalTask& task) {
  Json j;
  j["classes"] = Json::array();
  for (const auto& c : task.classes) j["classes"].push_back({{"caption", c.caption}, {"relevant", c.relevant}});
  j["pool"] = task.pool;
  auto out = jsonl::open_for_write(path);
  out << j.dump(1) << '\n';
}

std::vector<VqaItem> load_vqa(const std::filesystem::path& path) {
  std::vector<VqaItem> out;
  jsonl::for_each(path, [&](const Json& r, std::size_t line) {
    VqaItem item;
    item.video_ref = jsonl::string_field(r, "video_ref", line);
    auto it = r.find("candidates");
    if (it == r.end() || !it->is_array()) throw DataError("missing candidates at line " + std::to_string(line));
    for (const auto& c : *it) {
      if (!c.is_object() || !c.contains("text") || !c.contains("is_correct")) {
        throw DataError("malformed candidate at line " + std::to_string(line));
      }
      item.candidates.push_back({c["text"].get<std::string>(), c["is_correct"].get<bool>()});
    }
    item.validate();
    out.push_back(std::move(item));
  });
  return out;
}

void save_vqa(const std::filesystem::path& path, std::span<const VqaItem> items) {
  auto out = jsonl::open_for_write(path);
  for (const auto& item : items) {
    Json j;
    j["video_ref"] = item.video_ref;
    j["candidates"] = Json::array();
    for (const auto& c : item.candidates) j["candidates"].push_back({{"text", c.text}, {"is_correct", c.is_correct}});
    jsonl::write(out, j);
  }
}

std::vector<EntailmentExample> entailment_examples(std::span<const Triplet> triplets) {
  std::vector<EntailmentExample> out;
  for (const auto& t : triplets) {
    out.push_back({t.video_ref, t.caption_pos, 1});
    out.push_back({t.video_ref, t.caption_neg, 0});
  }
  return out;
}

ToyEvalSets make_toy_eval_sets(ToyCorpus& corpus, const ToyCorpusConfig& corpus_config,
                               const ToyEvalConfig& config) {
  const auto& vocab = corpus.concepts.keys();
  const std::size_t length = corpus_config.caption_length;
  if (config.vqa_candidates < 2) throw ConfigError("vqa_candidates must be >= 2");
  if (config.vqa_candidates - 1 > length * (vocab.size() - length)) {
    throw ConfigError("vocabulary too small for the requested VQA distractors");
  }
  std::unordered_map<std::string, std::size_t> id_of;
  for (std::size_t i = 0; i < vocab.size(); ++i) id_of.emplace(vocab[i], i);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t dim = corpus.concepts.dim();

  auto realize = [&](const std::vector<std::size_t>& ids) {
    std::vector<double> v(dim, 0.0);
    for (auto id : ids) {
      const auto& row = corpus.concepts.at(vocab[id]);
      for (std::size_t k = 0; k < dim; ++k) v[k] += row[k];
    }
    for (auto& x : v) x = x / static_cast<double>(ids.size()) + corpus_config.noise_sigma * noise(rng);
    return v;
  };
  // One token replaced by a token absent from `ids`.
  auto edit = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> out = ids;
    std::uniform_int_distribution<std::size_t> position(0, ids.size() - 1);
    std::vector<std::size_t> absent;
    for (std::size_t v = 0; v < vocab.size(); ++v) {
      if (std::find(ids.begin(), ids.end(), v) == ids.end()) absent.push_back(v);
    }
    std::uniform_int_distribution<std::size_t> pick(0, absent.size() - 1);
    out[position(rng)] = absent[pick(rng)];
    return out;
  };
  auto random_caption = [&]() {
    std::vector<std::size_t> all(vocab.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(length);
    return all;
  };

  ToyEvalSets sets;
  sets.entailment = entailment_examples(corpus.heldout);

  std::vector<std::vector<std::size_t>> class_ids;
  while (class_ids.size() < config.retrieval_classes) {
    auto base = random_caption();
    class_ids.push_back(base);
    if (class_ids.size() < config.retrieval_classes) class_ids.push_back(edit(base));
  }
  for (std::size_t c = 0; c < class_ids.size(); ++c) {
    RetrievalClass cls;
    cls.caption = join_words(vocab, class_ids[c]);
    for (std::size_t k = 0; k < config.videos_per_class; ++k) {
      std::string ref = "retrieval/c" + std::to_string(c) + "_v" + std::to_string(k);
      corpus.features.insert(ref, realize(class_ids[c]));
      cls.relevant.push_back(ref);
      sets.retrieval.pool.push_back(ref);
    }
    sets.retrieval.classes.push_back(std::move(cls));
  }
  std::shuffle(sets.retrieval.pool.begin(), sets.retrieval.pool.end(), rng);

  for (const auto& t : corpus.heldout) {
    std::vector<std::size_t> truth;
    for (const auto& w : tokenize(t.caption_pos).tokens) truth.push_back(id_of.at(w));
    std::set<std::vector<std::size_t>> used = {truth};
    VqaItem item;
    item.video_ref = t.video_ref;
    while (item.candidates.size() + 1 < config.vqa_candidates) {
      auto distractor = edit(truth);
      if (!used.insert(distractor).second) continue;
      item.candidates.push_back({join_words(vocab, distractor), false});
    }
    std::uniform_int_distribution<std::size_t> slot(0, item.candidates.size());
    item.candidates.insert(item.candidates.begin() + static_cast<std::ptrdiff_t>(slot(rng)),
                           {t.caption_pos, true});
    sets.vqa.push_back(std::move(item));
  }
  return sets;
}

}  // namespace synvita
