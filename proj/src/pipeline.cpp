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

#include "synvita/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "synvita/captions.hpp"
#include "synvita/errors.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string hex_digest(const unsigned char* data, unsigned int length) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < length; ++i) os << std::setw(2) << static_cast<int>(data[i]);
  return os.str();
}

std::string sha256_text(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr);
  return hex_digest(digest, length);
}

// Dispatches each key of `j` to its handler; unknown keys are config errors.
void read_object(const Json& j, const std::string& what,
                 const std::map<std::string, std::function<void(const Json&)>>& handlers) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ConfigError("unknown key \"" + key + "\" in " + what);
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid value for \"" + key + "\" in " + what + ": " + e.what());
    }
  }
}

Json toy_to_json(const ToyCorpusConfig& t) {
  Json j;
  j["n_triplets"] = t.n_triplets;
  j["feature_dim"] = t.feature_dim;
  j["vocab_size"] = t.vocab_size;
  j["fidelity"] = t.fidelity;
  j["noise_sigma"] = t.noise_sigma;
  j["caption_length"] = t.caption_length;
  j["n_generators"] = t.n_generators;
  j["n_heldout"] = t.n_heldout;
  j["low_fidelity_fraction"] = t.low_fidelity_fraction;
  j["low_fidelity"] = t.low_fidelity;
  Json by_type = Json::object();
  for (const auto& [type, rho] : t.fidelity_by_type) by_type[std::string(to_string(type))] = rho;
  j["fidelity_by_type"] = by_type;
  return j;
}

ToyCorpusConfig toy_from_json(const Json& j) {
  ToyCorpusConfig t;
  read_object(j, "toy", {
      {"n_triplets", [&](const Json& v) { t.n_triplets = v.get<std::size_t>(); }},
      {"feature_dim", [&](const Json& v) { t.feature_dim = v.get<std::size_t>(); }},
      {"vocab_size", [&](const Json& v) { t.vocab_size = v.get<std::size_t>(); }},
      {"fidelity", [&](const Json& v) { t.fidelity = v.get<double>(); }},
      {"noise_sigma", [&](const Json& v) { t.noise_sigma = v.get<double>(); }},
      {"caption_length", [&](const Json& v) { t.caption_length = v.get<std::size_t>(); }},
      {"n_generators", [&](const Json& v) { t.n_generators = v.get<std::size_t>(); }},
      {"n_heldout", [&](const Json& v) { t.n_heldout = v.get<std::size_t>(); }},
      {"low_fidelity_fraction", [&](const Json& v) { t.low_fidelity_fraction = v.get<double>(); }},
      {"low_fidelity", [&](const Json& v) { t.low_fidelity = v.get<double>(); }},
      {"fidelity_by_type", [&](const Json& v) {
         if (!v.is_object()) throw ConfigError("fidelity_by_type must be an object");
         for (const auto& [name, rho] : v.items()) {
           auto type = parse_misalignment(name);
           if (!type) throw ConfigError("unknown misalignment \"" + name + "\" in fidelity_by_type");
           t.fidelity_by_type[*type] = rho.get<double>();
         }
       }},
  });
  return t;
}

Json paths_to_json(const RunPaths& p) {
  return Json{{"triplets", p.triplets.string()},
              {"synthetics", p.synthetics.string()},
              {"features", p.features.string()},
              {"concepts", p.concepts.string()},
              {"ground_truth", p.ground_truth.string()},
              {"cache", p.cache.string()},
              {"scores", p.scores.string()},
              {"weights", p.weights.string()},
              {"checkpoint", p.checkpoint.string()},
              {"trace", p.trace.string()},
              {"entailment", p.entailment.string()},
              {"retrieval", p.retrieval.string()},
              {"vqa", p.vqa.string()},
              {"report", p.report.string()},
              {"retrieval_report", p.retrieval_report.string()},
              {"vqa_report", p.vqa_report.string()},
              {"analysis", p.analysis.string()},
              {"plots", p.plots.string()}};
}

RunPaths paths_from_json(const Json& j) {
  RunPaths p;
  std::map<std::string, fs::path*> fields = {
      {"triplets", &p.triplets},     {"synthetics", &p.synthetics},
      {"features", &p.features},     {"concepts", &p.concepts},
      {"ground_truth", &p.ground_truth}, {"cache", &p.cache},
      {"scores", &p.scores},         {"weights", &p.weights},
      {"checkpoint", &p.checkpoint}, {"trace", &p.trace},
      {"entailment", &p.entailment}, {"retrieval", &p.retrieval},
      {"vqa", &p.vqa},               {"report", &p.report},
      {"retrieval_report", &p.retrieval_report}, {"vqa_report", &p.vqa_report},
      {"analysis", &p.analysis},     {"plots", &p.plots}};
  std::map<std::string, std::function<void(const Json&)>> handlers;
  for (auto& [key, target] : fields) {
    handlers[key] = [target](const Json& v) { *target = v.get<std::string>(); };
  }
  read_object(j, "paths", handlers);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ToyEvalSets load_eval_sets(const RunConfig& c) {
  ToyEvalSets sets;
  if (fs::exists(c.resolve(c.paths.entailment))) sets.entailment = load_entailment(c.resolve(c.paths.entailment));
  if (fs::exists(c.resolve(c.paths.retrieval))) sets.retrieval = load_retrieval(c.resolve(c.paths.retrieval));
  if (fs::exists(c.resolve(c.paths.vqa))) sets.vqa = load_vqa(c.resolve(c.paths.vqa));
  return sets;
}

Metrics evaluate(const AlignmentModel& model, const Embeddings& features, const ToyEvalSets& eval) {
  Metrics m;
  const auto scorer = model_scorer(model, features);
  if (!eval.entailment.empty()) m.auc = evaluate_entailment(eval.entailment, scorer);
  if (!eval.retrieval.classes.empty()) m.map = evaluate_retrieval(eval.retrieval, scorer);
  if (!eval.vqa.empty()) m.accuracy = vqa_accuracy(eval.vqa, scorer);
  return m;
}

}  // namespace

void RunConfig::propagate_seed() {
  if (toy) toy->seed = seed;
  toy_eval.seed = seed + 1;
  model.seed = seed;
  loss.seed = seed;
}

fs::path RunConfig::resolve(const fs::path& p) const { return p.is_absolute() ? p : work_dir / p; }

void RunConfig::validate() const {
  if (toy) toy->validate();
  loss.validate();
  if (scorers.empty()) throw ConfigError("at least one scorer is required");
  if (scoring.n_frames == 0 || scoring.frame_count == 0) throw ConfigError("frame settings must be positive");
  if (toy && toy->feature_dim != model.feature_dim) {
    throw ConfigError("model.feature_dim must equal toy.feature_dim");
  }
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["work_dir"] = c.work_dir.string();
  j["paths"] = paths_to_json(c.paths);
  j["toy"] = c.toy ? toy_to_json(*c.toy) : Json(nullptr);
  j["toy_eval"] = {{"retrieval_classes", c.toy_eval.retrieval_classes},
                   {"videos_per_class", c.toy_eval.videos_per_class},
                   {"vqa_candidates", c.toy_eval.vqa_candidates}};
  j["model"] = {{"feature_dim", c.model.feature_dim}, {"embed_dim", c.model.embed_dim},
                {"init_std", c.model.init_std}};
  Json loss = to_json(c.loss);
  loss.erase("seed");
  j["loss"] = loss;
  j["strategy"] = std::string(to_string(c.strategy));
  j["scorers"] = c.scorers;
  j["scoring"] = {{"n_frames", c.scoring.n_frames},       {"frame_count", c.scoring.frame_count},
                  {"temperature", c.scoring.temperature}, {"offset", c.scoring.offset},
                  {"threads", c.scoring.threads}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  read_object(j, "config", {
      {"seed", [&](const Json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"work_dir", [&](const Json& v) { c.work_dir = v.get<std::string>(); }},
      {"paths", [&](const Json& v) { c.paths = paths_from_json(v); }},
      {"toy", [&](const Json& v) {
         if (v.is_null()) c.toy.reset();
         else c.toy = toy_from_json(v);
       }},
      {"toy_eval", [&](const Json& v) {
         read_object(v, "toy_eval", {
             {"retrieval_classes", [&](const Json& x) { c.toy_eval.retrieval_classes = x.get<std::size_t>(); }},
             {"videos_per_class", [&](const Json& x) { c.toy_eval.videos_per_class = x.get<std::size_t>(); }},
             {"vqa_candidates", [&](const Json& x) { c.toy_eval.vqa_candidates = x.get<std::size_t>(); }},
         });
       }},
      {"model", [&](const Json& v) {
         read_object(v, "model", {
             {"feature_dim", [&](const Json& x) { c.model.feature_dim = x.get<std::size_t>(); }},
             {"embed_dim", [&](const Json& x) { c.model.embed_dim = x.get<std::size_t>(); }},
             {"init_std", [&](const Json& x) { c.model.init_std = x.get<double>(); }},
         });
       }},
      {"loss", [&](const Json& v) { c.loss = loss_config_from_json(v); }},
      {"strategy", [&](const Json& v) { c.strategy = parse_weight_strategy(v.get<std::string>()); }},
      {"scorers", [&](const Json& v) { c.scorers = v.get<std::vector<std::string>>(); }},
      {"scoring", [&](const Json& v) {
         read_object(v, "scoring", {
             {"n_frames", [&](const Json& x) { c.scoring.n_frames = x.get<std::size_t>(); }},
             {"frame_count", [&](const Json& x) { c.scoring.frame_count = x.get<std::size_t>(); }},
             {"temperature", [&](const Json& x) { c.scoring.temperature = x.get<double>(); }},
             {"offset", [&](const Json& x) { c.scoring.offset = x.get<double>(); }},
             {"threads", [&](const Json& x) { c.scoring.threads = x.get<std::size_t>(); }},
         });
       }},
  });
  c.propagate_seed();
  c.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const fs::path& path, const RunConfig& config) {
  auto out = jsonl::open_for_write(path);
  out << to_json(config).dump(2) << '\n';
}

std::string config_digest(const RunConfig& config) {
  Json j = to_json(config);
  j.erase("work_dir");
  j["scoring"].erase("threads");
  return sha256_text(j.dump()).substr(0, 16);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buffer[1 << 15];
  while (in) {
    in.read(buffer, sizeof(buffer));
    EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest, &length);
  EVP_MD_CTX_free(ctx);
  return hex_digest(digest, length);
}

std::vector<std::unique_ptr<FrameScorer>> make_scorers(const std::vector<std::string>& names,
                                                       const Embeddings& features,
                                                       const Embeddings& concepts,
                                                       const ScoringConfig& scoring) {
  std::vector<std::unique_ptr<FrameScorer>> out;
  for (const auto& name : names) {
    OracleScorer::Params params{scoring.temperature, scoring.offset};
    if (name == "oracle") {
      out.push_back(std::make_unique<OracleScorer>(features, concepts, params, name));
    } else if (name.rfind("oracle:", 0) == 0) {
      try {
        params.temperature = std::stod(name.substr(7));
      } catch (const std::exception&) {
        throw ConfigError("bad oracle temperature in scorer \"" + name + "\"");
      }
      out.push_back(std::make_unique<OracleScorer>(features, concepts, params, name));
    } else {
      throw ConfigError("unknown scorer \"" + name + "\"");
    }
  }
  return out;
}

Vocabulary build_vocabulary(std::span<const Triplet> triplets) {
  std::vector<std::string> words;
  for (const auto& t : triplets) {
    for (auto& w : tokenize(t.caption_pos).tokens) words.push_back(std::move(w));
    for (auto& w : tokenize(t.caption_neg).tokens) words.push_back(std::move(w));
  }
  return Vocabulary(words);
}

TrainOutcome train_and_evaluate(std::span<const TrainingSample> samples, std::span<const Triplet> triplets,
                                const Embeddings& features, const ToyEvalSets& eval,
                                const SurrogateConfig& model_config, const LossConfig& loss,
                                const FitOptions& options) {
  TrainOutcome out{SurrogateModel(model_config, build_vocabulary(triplets)), {}, {}};
  const auto prepared = prepare_samples(samples, features, out.model);
  out.trace = fit(out.model, prepared, loss, options);
  out.metrics = evaluate(out.model, features, eval);
  return out;
}

void stage_toygen(const RunConfig& c) {
  if (!c.toy) throw ConfigError("toygen needs a \"toy\" section in the config");
  auto corpus = make_toy_corpus(*c.toy);
  const auto eval = make_toy_eval_sets(corpus, *c.toy, c.toy_eval);
  save_triplets(c.resolve(c.paths.triplets), corpus.triplets);
  save_synthetic_manifest(c.resolve(c.paths.synthetics), corpus.synthetics);
  save_embeddings(c.resolve(c.paths.features), corpus.features, "video_ref");
  save_embeddings(c.resolve(c.paths.concepts), corpus.concepts, "token");
  save_ground_truth(c.resolve(c.paths.ground_truth), corpus.ground_truth);
  save_entailment(c.resolve(c.paths.entailment), eval.entailment);
  save_retrieval(c.resolve(c.paths.retrieval), eval.retrieval);
  save_vqa(c.resolve(c.paths.vqa), eval.vqa);
}

void stage_score(const RunConfig& c) {
  const auto triplets = load_triplets(c.resolve(c.paths.triplets));
  const auto synthetics = load_synthetic_manifest(c.resolve(c.paths.synthetics), triplets);
  const auto features = load_embeddings(c.resolve(c.paths.features), "video_ref");
  const auto concepts = load_embeddings(c.resolve(c.paths.concepts), "token");
  const auto samples = join_samples(triplets, synthetics);
  const auto owned = make_scorers(c.scorers, features, concepts, c.scoring);
  std::vector<const FrameScorer*> scorers;
  for (const auto& s : owned) scorers.push_back(s.get());
  ScoreCache cache(c.resolve(c.paths.cache));
  ScoringOptions options;
  options.n_frames = c.scoring.n_frames;
  options.default_frame_count = c.scoring.frame_count;
  options.threads = c.scoring.threads;
  save_score_table(c.resolve(c.paths.scores), score_corpus(samples, scorers, cache, options));
}

void stage_weigh(const RunConfig& c) {
  const auto triplets = load_triplets(c.resolve(c.paths.triplets));
  const auto synthetics = load_synthetic_manifest(c.resolve(c.paths.synthetics), triplets);
  const auto scores = load_score_table(c.resolve(c.paths.scores));
  const auto samples = join_samples(triplets, synthetics);
  save_weights(c.resolve(c.paths.weights), weigh_samples(samples, scores, c.strategy));
}

void stage_train(const RunConfig& c) {
  const auto triplets = load_triplets(c.resolve(c.paths.triplets));
  const auto synthetics = load_synthetic_manifest(c.resolve(c.paths.synthetics), triplets);
  const auto features = load_embeddings(c.resolve(c.paths.features), "video_ref");
  const auto weights = load_weights(c.resolve(c.paths.weights));
  auto samples = join_samples(triplets, synthetics);
  apply_weights(samples, weights);

  SurrogateModel model(c.model, build_vocabulary(triplets));
  const auto prepared = prepare_samples(samples, features, model);
  FitOptions options;
  options.checkpoint = c.resolve(c.paths.checkpoint);
  options.config_digest = config_digest(c);
  const auto trace = fit(model, prepared, c.loss, options);
  save_loss_trace(c.resolve(c.paths.trace), trace);
}

void stage_eval(const RunConfig& c) {
  std::string digest;
  const auto model = load_checkpoint(c.resolve(c.paths.checkpoint), &digest);
  const auto expected = config_digest(c);
  if (digest != expected) {
    throw ConfigError("checkpoint was produced under config " + digest + ", current config is " + expected);
  }
  const auto features = load_embeddings(c.resolve(c.paths.features), "video_ref");
  const auto eval = load_eval_sets(c);
  const auto m = evaluate(model, features, eval);
  if (m.auc) save_task_report(c.resolve(c.paths.report), {"entailment", "auc", *m.auc, eval.entailment.size(), digest});
  if (m.map) {
    save_task_report(c.resolve(c.paths.retrieval_report),
                     {"retrieval", "map", *m.map, eval.retrieval.classes.size(), digest});
  }
  if (m.accuracy) {
    save_task_report(c.resolve(c.paths.vqa_report), {"vqa", "accuracy", *m.accuracy, eval.vqa.size(), digest});
  }
}

void stage_analyze(const RunConfig& c) {
  const auto triplets = load_triplets(c.resolve(c.paths.triplets));
  const auto scores = load_score_table(c.resolve(c.paths.scores));
  const auto rows = misalignment_analysis(scores, triplets);
  save_analysis_csv(c.resolve(c.paths.analysis), rows);
  save_analysis_plots(c.resolve(c.paths.plots), rows);
}

namespace {

struct StageSpec {
  std::string name;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::function<void(const RunConfig&)> run;
};

std::vector<StageSpec> plan(const RunConfig& c) {
  auto r = [&](const fs::path& p) { return c.resolve(p); };
  const auto& p = c.paths;
  std::vector<StageSpec> stages;
  if (c.toy) {
    stages.push_back({"toygen", {},
                      {r(p.triplets), r(p.synthetics), r(p.features), r(p.concepts), r(p.ground_truth),
                       r(p.entailment), r(p.retrieval), r(p.vqa)},
                      stage_toygen});
  }
  stages.push_back({"score", {r(p.triplets), r(p.synthetics), r(p.features), r(p.concepts)}, {r(p.scores)}, stage_score});
  stages.push_back({"weigh", {r(p.triplets), r(p.synthetics), r(p.scores)}, {r(p.weights)}, stage_weigh});
  stages.push_back({"train", {r(p.triplets), r(p.synthetics), r(p.features), r(p.weights)},
                    {r(p.checkpoint), r(p.trace)}, stage_train});
  stages.push_back({"eval", {r(p.checkpoint), r(p.features), r(p.entailment)}, {r(p.report)}, stage_eval});
  stages.push_back({"analyze", {r(p.triplets), r(p.scores)}, {r(p.analysis)}, stage_analyze});
  return stages;
}

bool up_to_date(const StageSpec& stage) {
  std::optional<fs::file_time_type> oldest_output;
  for (const auto& out : stage.outputs) {
    if (!fs::exists(out)) return false;
    const auto t = fs::last_write_time(out);
    if (!oldest_output || t < *oldest_output) oldest_output = t;
  }
  for (const auto& in : stage.inputs) {
    if (fs::exists(in) && fs::last_write_time(in) > *oldest_output) return false;
  }
  return true;
}

}  // namespace

std::vector<StageOutcome> run_pipeline(const RunConfig& config, const PipelineOptions& options) {
  config.validate();
  fs::create_directories(config.work_dir);
  const auto digest = config_digest(config);
  const fs::path manifest_path = config.work_dir / "run_manifest.json";

  Json manifest;
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      manifest = Json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError("corrupt run manifest " + manifest_path.string());
    }
  }
  if (!manifest.is_object()) manifest = Json::object();
  if (!manifest.contains("stages")) manifest["stages"] = Json::object();

  std::vector<StageOutcome> outcomes;
  bool wrote_anything = false;
  const auto stages = plan(config);
  const std::set<std::string> produced_here = [&] {
    std::set<std::string> s;
    for (const auto& st : stages) {
      for (const auto& o : st.outputs) s.insert(o.string());
    }
    return s;
  }();

  for (const auto& stage : stages) {
    const auto& record = manifest["stages"].contains(stage.name) ? manifest["stages"][stage.name] : Json();
    const std::string recorded = record.is_object() ? record.value("config_digest", std::string()) : std::string();
    const bool any_output = std::any_of(stage.outputs.begin(), stage.outputs.end(),
                                        [](const fs::path& o) { return fs::exists(o); });
    if (!options.force && any_output && recorded != digest) {
      throw ConfigError("stage " + stage.name + ": existing artifacts in " + config.work_dir.string() +
                        " were not produced by config " + digest + " (use --force to overwrite)");
    }
    if (!options.force && recorded == digest && up_to_date(stage)) {
      outcomes.push_back({stage.name, false, 0.0});
      continue;
    }
    for (const auto& in : stage.inputs) {
      if (!fs::exists(in) && !produced_here.count(in.string())) {
        throw DependencyError("stage " + stage.name + " needs " + in.string());
      }
      if (!fs::exists(in)) throw DependencyError("stage " + stage.name + " needs " + in.string());
    }

    const fs::path marker = config.work_dir / (stage.name + ".failed");
    const auto start = std::chrono::steady_clock::now();
    try {
      stage.run(config);
    } catch (const std::exception& e) {
      std::ofstream(marker) << e.what() << '\n';
      manifest["stages"][stage.name] = {{"status", "failed"}, {"config_digest", digest}};
      std::ofstream(manifest_path) << manifest.dump(2) << '\n';
      throw;
    }
    fs::remove(marker);
    const double seconds = seconds_since(start);
    Json artifacts = Json::object();
    for (const auto& o : stage.outputs) artifacts[o.string()] = sha256_file(o);
    manifest["stages"][stage.name] = {
        {"status", "ran"}, {"config_digest", digest}, {"seconds", seconds}, {"artifacts", artifacts}};
    wrote_anything = true;
    outcomes.push_back({stage.name, true, seconds});
  }

  if (wrote_anything) {
    manifest["config_digest"] = digest;
    manifest["version"] = std::string(kVersion);
    manifest["config"] = to_json(config);
    std::ofstream(manifest_path) << manifest.dump(2) << '\n';
  }
  return outcomes;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SweepRow> ablation_sweep(const RunConfig& config, std::span<const WeightStrategy> strategies,
                                     std::span<const std::uint64_t> seeds) {
  if (strategies.empty()) throw ConfigError("nothing to sweep");
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  config.validate();

  std::vector<Triplet> triplets;
  std::vector<SyntheticVideo> synthetics;
  Embeddings features;
  Embeddings concepts;
  ToyEvalSets eval;
  if (config.toy) {
    auto corpus = make_toy_corpus(*config.toy);
    eval = make_toy_eval_sets(corpus, *config.toy, config.toy_eval);
    triplets = std::move(corpus.triplets);
    synthetics = std::move(corpus.synthetics);
    features = std::move(corpus.features);
    concepts = std::move(corpus.concepts);
  } else {
    triplets = load_triplets(config.resolve(config.paths.triplets));
    synthetics = load_synthetic_manifest(config.resolve(config.paths.synthetics), triplets);
    features = load_embeddings(config.resolve(config.paths.features), "video_ref");
    concepts = load_embeddings(config.resolve(config.paths.concepts), "token");
    eval = load_eval_sets(config);
  }
  const auto base_samples = join_samples(triplets, synthetics);

  const auto owned = make_scorers(config.scorers, features, concepts, config.scoring);
  std::vector<const FrameScorer*> scorers;
  for (const auto& s : owned) scorers.push_back(s.get());
  fs::create_directories(config.work_dir);
  ScoreCache cache(config.resolve(config.paths.cache));
  ScoringOptions scoring;
  scoring.n_frames = config.scoring.n_frames;
  scoring.default_frame_count = config.scoring.frame_count;
  scoring.threads = config.scoring.threads;
  const auto scores = score_corpus(base_samples, scorers, cache, scoring);

  std::vector<SweepRow> rows;
  for (auto strategy : strategies) {
    SweepRow row;
    row.strategy = strategy;
    try {
      auto samples = base_samples;
      apply_weights(samples, weigh_samples(samples, scores, strategy));
      std::vector<double> maps;
      std::vector<double> accs;
      for (auto seed : seeds) {
        auto model_config = config.model;
        auto loss = config.loss;
        model_config.seed = seed;
        loss.seed = seed;
        const auto outcome = train_and_evaluate(samples, triplets, features, eval, model_config, loss);
        if (outcome.metrics.auc) row.aucs.push_back(*outcome.metrics.auc);
        if (outcome.metrics.map) maps.push_back(*outcome.metrics.map);
        if (outcome.metrics.accuracy) accs.push_back(*outcome.metrics.accuracy);
      }
      if (!row.aucs.empty()) row.auc = median(row.aucs);
      if (!maps.empty()) row.map = median(maps);
      if (!accs.empty()) row.accuracy = median(accs);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_sweep_csv(const fs::path& path, std::span<const SweepRow> rows) {
  auto out = jsonl::open_for_write(path);
  out.precision(17);
  out << "strategy,n_seeds,auc,map,accuracy,seed_aucs,error\n";
  for (const auto& r : rows) {
    out << to_string(r.strategy) << ',' << r.aucs.size() << ',';
    if (r.auc) out << *r.auc;
    out << ',';
    if (r.map) out << *r.map;
    out << ',';
    if (r.accuracy) out << *r.accuracy;
    out << ',';
    for (std::size_t i = 0; i < r.aucs.size(); ++i) out << (i ? ";" : "") << r.aucs[i];
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << ',' << error << '\n';
  }
}

}  // namespace synvita
