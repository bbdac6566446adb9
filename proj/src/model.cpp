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

#include "synvita/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "synvita/errors.hpp"
#include "synvita/jsonl.hpp"

namespace synvita {

namespace {

using jsonl::Json;

const TokenMask kNoMask;

bool selected(const TokenMask& mask, std::size_t i) { return mask.empty() || mask[i]; }

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
  }
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    if (lookup_.count(w)) continue;
    lookup_.emplace(w, static_cast<int>(words_.size()) + 1);
    words_.push_back(w);
  }
}

int Vocabulary::index(const std::string& word) const {
  auto it = lookup_.find(word);
  return it == lookup_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::indices(const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(index(w));
  return out;
}

SurrogateModel::SurrogateModel(SurrogateConfig config, Vocabulary vocabulary)
    : config_(config), vocab_(std::move(vocabulary)) {
  if (config_.feature_dim == 0 || config_.embed_dim == 0) {
    throw ConfigError("surrogate model dimensions must be positive");
  }
  params_.assign(embeddings_size() + projection_size() + interaction_size() + 1, 0.0);
  std::mt19937_64 rng(config_.seed);
  std::normal_distribution<double> init(0.0, config_.init_std);
  for (std::size_t i = 0; i + 1 < params_.size(); ++i) params_[i] = init(rng);
  params_.back() = 0.0;
}

std::vector<double> SurrogateModel::encode_caption(std::span<const int> tokens,
                                                   const TokenMask& mask) const {
  if (!mask.empty() && mask.size() != tokens.size()) {
    throw DataError("token mask has length " + std::to_string(mask.size()) + " for " +
                    std::to_string(tokens.size()) + " tokens");
  }
  const std::size_t d = config_.embed_dim;
  std::vector<double> out(d, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!selected(mask, i)) continue;
    const auto row = static_cast<std::size_t>(tokens[i]);
    if (row >= vocab_.size()) throw DataError("token id out of range");
    const double* e = params_.data() + row * d;
    for (std::size_t k = 0; k < d; ++k) out[k] += e[k];
    ++count;
  }
  if (count > 0) {
    for (auto& v : out) v /= static_cast<double>(count);
  }
  return out;
}

SurrogateModel::Forward SurrogateModel::forward(std::span<const double> video,
                                                std::span<const int> tokens,
                                                const TokenMask& mask) const {
  const std::size_t d = config_.embed_dim;
  const std::size_t f = config_.feature_dim;
  if (video.size() != f) {
    throw DataError("video features have length " + std::to_string(video.size()) + ", expected " +
                    std::to_string(f));
  }
  check_finite(video, "video features");

  Forward fw;
  fw.caption = encode_caption(tokens, mask);
  for (std::size_t i = 0; i < tokens.size(); ++i) fw.selected += selected(mask, i) ? 1 : 0;

  const double* proj = params_.data() + embeddings_size();
  fw.projected.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < f; ++k) acc += proj[i * f + k] * video[k];
    fw.projected[i] = acc;
  }
  const double* w = proj + projection_size();
  fw.mixed.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += w[i * d + j] * fw.caption[j];
    fw.mixed[i] = acc;
  }
  double logit = params_.back();
  for (std::size_t i = 0; i < d; ++i) logit += fw.projected[i] * fw.mixed[i];
  if (!std::isfinite(logit)) throw NumericError("non-finite logit");
  fw.prob = 1.0 / (1.0 + std::exp(-logit));
  return fw;
}

double SurrogateModel::predict(std::span<const double> video, std::span<const int> tokens,
                               const TokenMask& mask) const {
  return forward(video, tokens, mask).prob;
}

double SurrogateModel::accumulate_gradient(std::span<const double> video,
                                           std::span<const int> tokens, const TokenMask& mask,
                                           double upstream, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw std::logic_error("gradient buffer has wrong length");
  const Forward fw = forward(video, tokens, mask);
  const double g = upstream * fw.prob * (1.0 - fw.prob);  // d loss / d logit
  if (g == 0.0) return fw.prob;

  const std::size_t d = config_.embed_dim;
  const std::size_t f = config_.feature_dim;
  double* g_embed = grad.data();
  double* g_proj = g_embed + embeddings_size();
  double* g_inter = g_proj + projection_size();
  const double* w = params_.data() + embeddings_size() + projection_size();

  // d logit / d W_ij = p_i c_j
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) g_inter[i * d + j] += g * fw.projected[i] * fw.caption[j];
  }
  // d logit / d P_ik = (W c)_i v_k
  for (std::size_t i = 0; i < d; ++i) {
    const double gi = g * fw.mixed[i];
    for (std::size_t k = 0; k < f; ++k) g_proj[i * f + k] += gi * video[k];
  }
  // d logit / d c = W^T p, spread evenly over the selected tokens
  if (fw.selected > 0) {
    std::vector<double> back(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) back[j] += w[i * d + j] * fw.projected[i];
    }
    const double scale = g / static_cast<double>(fw.selected);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (!selected(mask, t)) continue;
      double* row = g_embed + static_cast<std::size_t>(tokens[t]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += scale * back[j];
    }
  }
  grad.back() += g;
  return fw.prob;
}

std::size_t ForwardTape::record(std::span<const double> video, std::span<const int> tokens,
                                const TokenMask* mask) {
  const TokenMask& m = mask ? *mask : kNoMask;
  entries_.push_back({video, tokens, &m, model_.predict(video, tokens, m)});
  return entries_.size() - 1;
}

std::vector<double> ForwardTape::parameter_gradients(std::span<const double> upstream) const {
  if (entries_.empty()) throw std::logic_error("no forward pass recorded");
  if (upstream.size() != entries_.size()) {
    throw std::logic_error("upstream gradient count does not match recorded predictions");
  }
  std::vector<double> grad(model_.parameter_count(), 0.0);
  for (std::size_t e = 0; e < entries_.size(); ++e) {
    if (upstream[e] == 0.0) continue;
    const auto& entry = entries_[e];
    model_.accumulate_gradient(entry.video, entry.tokens, *entry.mask, upstream[e], grad);
  }
  return grad;
}

void save_checkpoint(const std::filesystem::path& path, const SurrogateModel& model,
                     const std::string& config_digest) {
  Json j;
  j["format"] = "synvita-surrogate";
  j["version"] = 1;
  j["config_digest"] = config_digest;
  const auto& c = model.config();
  j["config"] = {{"feature_dim", c.feature_dim},
                 {"embed_dim", c.embed_dim},
                 {"init_std", c.init_std},
                 {"seed", c.seed}};
  j["vocabulary"] = model.vocabulary().words();
  const auto params = model.parameters();
  j["parameters"] = std::vector<double>(params.begin(), params.end());
  auto out = jsonl::open_for_write(path);
  out << j.dump(1) << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

SurrogateModel load_checkpoint(const std::filesystem::path& path, std::string* config_digest) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  Json j;
  try {
    j = Json::parse(in);
    if (j.at("format") != "synvita-surrogate") throw DataError("not a surrogate checkpoint");
    SurrogateConfig c;
    const auto& cfg = j.at("config");
    c.feature_dim = cfg.at("feature_dim").get<std::size_t>();
    c.embed_dim = cfg.at("embed_dim").get<std::size_t>();
    c.init_std = cfg.at("init_std").get<double>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    SurrogateModel model(c, Vocabulary(j.at("vocabulary").get<std::vector<std::string>>()));
    const auto values = j.at("parameters").get<std::vector<double>>();
    if (values.size() != model.parameter_count()) {
      throw DataError("checkpoint parameter count does not match its config");
    }
    std::copy(values.begin(), values.end(), model.parameters().begin());
    if (config_digest) *config_digest = j.value("config_digest", std::string());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace synvita
