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

#include "synvita/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "synvita/captions.hpp"
#include "synvita/errors.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace {

using Json = nlohmann::ordered_json;
using SampleRefs = std::span<const PreparedSample* const>;

std::vector<const PreparedSample*> refs_of(std::span<const PreparedSample> batch) {
  std::vector<const PreparedSample*> out;
  out.reserve(batch.size());
  for (const auto& s : batch) out.push_back(&s);
  return out;
}

// Accumulates a scalar loss over tape entries: the value as a plain sum and
// d value / d prediction per entry.
struct Accumulator {
  explicit Accumulator(const AlignmentModel& model) : tape(model) {}

  std::size_t record(std::span<const double> video, std::span<const int> tokens,
                     const TokenMask* mask = nullptr) {
    const auto e = tape.record(video, tokens, mask);
    upstream.push_back(0.0);
    return e;
  }

  // weight * -[log f(video, positive) + log(1 - f(video, negative))]
  void cross_entropy(std::span<const double> video, std::span<const int> positive,
                     std::span<const int> negative, double weight, double epsilon) {
    const auto a = record(video, positive);
    const auto b = record(video, negative);
    const double pa = tape.prediction(a);
    const double pb = tape.prediction(b);
    const double ca = std::clamp(pa, epsilon, 1.0 - epsilon);
    const double cb = std::clamp(pb, epsilon, 1.0 - epsilon);
    sum += weight * -(std::log(ca) + std::log(1.0 - cb));
    if (pa > epsilon && pa < 1.0 - epsilon) upstream[a] += -weight / ca;
    if (pb > epsilon && pb < 1.0 - epsilon) upstream[b] += weight / (1.0 - cb);
  }

  // weight * max(0, gamma + f(raised) - f(lowered)); zero subgradient at the kink.
  bool hinge(std::size_t raised, std::size_t lowered, double gamma, double weight) {
    const double h = gamma + tape.prediction(raised) - tape.prediction(lowered);
    if (!(h > 0.0)) return false;
    sum += weight * h;
    upstream[raised] += weight;
    upstream[lowered] -= weight;
    return true;
  }

  LossValue finish(std::size_t parameter_count, std::size_t denominator) {
    LossValue out;
    out.value = denominator ? sum / static_cast<double>(denominator) : 0.0;
    if (tape.size() == 0 || denominator == 0) {
      out.gradient.assign(parameter_count, 0.0);
      return out;
    }
    for (auto& u : upstream) u /= static_cast<double>(denominator);
    out.gradient = tape.parameter_gradients(upstream);
    return out;
  }

  ForwardTape tape;
  std::vector<double> upstream;
  double sum = 0.0;
};

std::string sample_name(const PreparedSample& s) {
  return s.generator_id.empty() ? s.triplet_id : s.triplet_id + "/" + s.generator_id;
}

void require_weighted_synthetic(const PreparedSample& s, const char* loss) {
  if (!s.has_synthetic()) {
    throw DataError(std::string(loss) + ": sample " + sample_name(s) + " has no synthetic video");
  }
  if (!s.weight) throw DataError(std::string(loss) + ": sample " + sample_name(s) + " has no weight");
}

LossValue real_term(const AlignmentModel& model, SampleRefs batch, double epsilon) {
  Accumulator acc(model);
  for (const auto* s : batch) {
    acc.cross_entropy(s->real_video, s->pos_tokens, s->neg_tokens, s->real_share, epsilon);
  }
  return acc.finish(model.parameter_count(), batch.size());
}

// Synthetic video: t^s is its positive caption and t^r its negative.
LossValue syn_term(const AlignmentModel& model, SampleRefs batch, std::size_t denominator,
                   double epsilon) {
  Accumulator acc(model);
  for (const auto* s : batch) {
    acc.cross_entropy(s->synthetic_video, s->neg_tokens, s->pos_tokens, *s->weight, epsilon);
  }
  return acc.finish(model.parameter_count(), denominator);
}

LossValue scr_term(const AlignmentModel& model, SampleRefs batch, std::size_t denominator,
                   double gamma, std::vector<std::array<bool, 4>>* flags) {
  Accumulator acc(model);
  for (const auto* s : batch) {
    std::array<bool, 4> active{};
    const double w = *s->weight;
    // z = s then z = r
    const std::span<const double> videos[2] = {s->synthetic_video, s->real_video};
    const std::vector<int>* own[2] = {&s->neg_tokens, &s->pos_tokens};
    const std::vector<int>* other[2] = {&s->pos_tokens, &s->neg_tokens};
    for (int z = 0; z < 2; ++z) {
      const auto shared = acc.record(videos[z], s->pos_tokens, &s->shared_mask);
      const auto own_e = acc.record(videos[z], *own[z]);
      const auto other_e = acc.record(videos[z], *other[z]);
      active[2 * z] = acc.hinge(shared, own_e, gamma, w);
      active[2 * z + 1] = acc.hinge(other_e, shared, gamma, w);
    }
    if (flags) flags->push_back(active);
  }
  return acc.finish(model.parameter_count(), denominator);
}

TotalLoss total_loss_refs(const AlignmentModel& model, SampleRefs batch, const LossConfig& config) {
  std::vector<const PreparedSample*> synthetic;
  std::vector<const PreparedSample*> consistent;
  for (const auto* s : batch) {
    if (!s->has_synthetic()) continue;
    require_weighted_synthetic(*s, "total_loss");
    synthetic.push_back(s);
    if (s->has_shared()) consistent.push_back(s);
  }

  auto real = real_term(model, batch, config.epsilon);
  auto syn = syn_term(model, synthetic, batch.size(), config.epsilon);
  std::vector<std::array<bool, 4>> flags;
  auto scr = scr_term(model, consistent, batch.size(), config.gamma, &flags);

  TotalLoss out;
  out.report.l_real = real.value;
  out.report.l_syn = syn.value;
  out.report.l_scr = scr.value;
  out.report.total = real.value + syn.value + config.lambda_scr * scr.value;
  out.gradient = std::move(real.gradient);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    out.gradient[i] += syn.gradient[i] + config.lambda_scr * scr.gradient[i];
  }

  std::size_t next_flag = 0;
  for (const auto* s : batch) {
    SampleDiagnostics d;
    d.triplet_id = s->triplet_id;
    d.generator_id = s->generator_id;
    d.omega = s->weight;
    if (s->has_synthetic() && s->has_shared()) d.hinge_active = flags[next_flag++];
    out.report.samples.push_back(std::move(d));
  }
  return out;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (!(lambda_scr >= 0.0)) throw ConfigError("lambda_scr must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

Json to_json(const LossConfig& c) {
  Json j;
  j["gamma"] = c.gamma;
  j["lambda_scr"] = c.lambda_scr;
  j["epsilon"] = c.epsilon;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["warmup_steps"] = c.warmup_steps;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["optimizer"] = c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd";
  return j;
}

LossConfig loss_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("loss config must be a JSON object");
  LossConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "lambda_scr") c.lambda_scr = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "adam") c.optimizer = OptimizerKind::kAdam;
        else if (name == "sgd") c.optimizer = OptimizerKind::kSgd;
        else throw ConfigError("unknown optimizer \"" + name + "\"");
      } else {
        throw ConfigError("unknown loss config key \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid loss config: ") + e.what());
  }
  c.validate();
  return c;
}

bool PreparedSample::has_shared() const {
  return std::find(shared_mask.begin(), shared_mask.end(), true) != shared_mask.end();
}

std::vector<PreparedSample> prepare_samples(std::span<const TrainingSample> samples,
                                            const Embeddings& features,
                                            const AlignmentModel& model) {
  std::unordered_map<std::string, std::size_t> per_triplet;
  for (const auto& s : samples) ++per_triplet[s.triplet.id];

  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    PreparedSample p;
    p.triplet_id = s.triplet.id;
    p.real_video = features.at(s.triplet.video_ref);
    const auto pos = tokenize(s.triplet.caption_pos);
    const auto neg = tokenize(s.triplet.caption_neg);
    p.pos_tokens = model.token_ids(pos.tokens);
    p.neg_tokens = model.token_ids(neg.tokens);
    p.shared_mask = lcs(pos, neg).mask_pos;
    if (s.synthetic) {
      p.generator_id = s.synthetic->generator_id;
      p.synthetic_video = features.at(s.synthetic->video_ref);
      p.weight = s.weight;
    }
    p.real_share = 1.0 / static_cast<double>(per_triplet[s.triplet.id]);
    out.push_back(std::move(p));
  }
  return out;
}

LossValue loss_real(const AlignmentModel& model, std::span<const PreparedSample> batch,
                    double epsilon) {
  if (batch.empty()) throw DataError("loss_real: empty batch");
  const auto refs = refs_of(batch);
  return real_term(model, refs, epsilon);
}

LossValue loss_syn_weighted(const AlignmentModel& model, std::span<const PreparedSample> batch,
                            double epsilon) {
  for (const auto& s : batch) require_weighted_synthetic(s, "loss_syn_weighted");
  const auto refs = refs_of(batch);
  return syn_term(model, refs, batch.size(), epsilon);
}

LossValue loss_scr(const AlignmentModel& model, std::span<const PreparedSample> batch,
                   double gamma) {
  for (const auto& s : batch) {
    require_weighted_synthetic(s, "loss_scr");
    if (!s.has_shared()) {
      throw DataError("loss_scr: sample " + sample_name(s) + " has no shared-caption mask");
    }
  }
  const auto refs = refs_of(batch);
  return scr_term(model, refs, batch.size(), gamma, nullptr);
}

TotalLoss total_loss(const AlignmentModel& model, std::span<const PreparedSample> batch,
                     const LossConfig& config) {
  if (batch.empty()) throw DataError("total_loss: empty batch");
  const auto refs = refs_of(batch);
  return total_loss_refs(model, refs, config);
}

Optimizer::Optimizer(const LossConfig& config, std::size_t parameter_count,
                     std::size_t total_steps)
    : config_(config), total_steps_(std::max<std::size_t>(1, total_steps)) {
  if (config_.optimizer == OptimizerKind::kAdam) {
    m_.assign(parameter_count, 0.0);
    v_.assign(parameter_count, 0.0);
  }
}

double Optimizer::learning_rate_at(std::size_t step) const {
  const double warm =
      config_.warmup_steps == 0
          ? 1.0
          : std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(config_.warmup_steps));
  const double progress =
      std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps_));
  return config_.learning_rate * warm * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void Optimizer::step(std::span<double> parameters, std::span<const double> gradient) {
  const double lr = learning_rate_at(step_);
  ++step_;
  if (config_.optimizer == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < parameters.size(); ++i) parameters[i] -= lr * gradient[i];
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  constexpr double kAdamEps = 1e-8;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * gradient[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * gradient[i] * gradient[i];
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    parameters[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
  }
}

std::vector<EpochReport> fit(SurrogateModel& model, std::span<const PreparedSample> samples,
                             const LossConfig& config, const FitOptions& options) {
  config.validate();
  if (samples.empty()) throw DataError("fit: no training samples");
  const std::size_t n = samples.size();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  Optimizer optimizer(config, model.parameter_count(), config.epochs * batches_per_epoch);

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const PreparedSample*> batch;
  std::vector<EpochReport> trace;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochReport report;
    report.epoch = epoch;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      batch.clear();
      const std::size_t end = std::min(n, (b + 1) * config.batch_size);
      for (std::size_t i = b * config.batch_size; i < end; ++i) batch.push_back(&samples[order[i]]);

      auto loss = total_loss_refs(model, batch, config);
      if (!std::isfinite(loss.report.total) || !all_finite(loss.gradient)) {
        std::string ids;
        for (const auto* s : batch) ids += (ids.empty() ? "" : ", ") + sample_name(*s);
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + " (samples: " + ids + ")");
      }
      const double share = static_cast<double>(batch.size()) / static_cast<double>(n);
      report.l_real += share * loss.report.l_real;
      report.l_syn += share * loss.report.l_syn;
      report.l_scr += share * loss.report.l_scr;
      report.total += share * loss.report.total;
      optimizer.step(model.parameters(), loss.gradient);
    }
    if (options.on_epoch) options.on_epoch(report);
    trace.push_back(report);
  }
  if (options.checkpoint) save_checkpoint(*options.checkpoint, model, options.config_digest);
  return trace;
}

void save_loss_trace(const std::filesystem::path& path, std::span<const EpochReport> trace) {
  auto out = jsonl::open_for_write(path);
  out.precision(17);
  out << "epoch,l_real,l_syn,l_scr,total\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.l_real << ',' << r.l_syn << ',' << r.l_scr << ',' << r.total << '\n';
  }
}

}  // namespace synvita
