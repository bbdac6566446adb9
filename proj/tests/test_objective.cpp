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
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "synvita/captions.hpp"
#include "synvita/corpus.hpp"
#include "synvita/errors.hpp"
#include "synvita/model.hpp"
#include "synvita/objective.hpp"

using namespace synvita;

namespace {

// Predictions looked up by (video kind, caption role): video[0] is 0 for the
// real video and 1 for the synthetic one; a partial mask marks t', and the
// last token tells t^r (3) from t^s (4).
class TableModel : public AlignmentModel {
 public:
  enum Role { kShared, kPos, kNeg };
  double table[2][3] = {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};

  std::size_t feature_dim() const override { return 1; }
  std::vector<int> token_ids(const std::vector<std::string>&) const override { return {}; }
  double predict(std::span<const double> video, std::span<const int> tokens, const TokenMask& mask) const override {
    return table[video[0] > 0.5 ? 1 : 0][role(tokens, mask)];
  }
  double accumulate_gradient(std::span<const double> video, std::span<const int> tokens, const TokenMask& mask,
                             double, std::span<double>) const override {
    return predict(video, tokens, mask);
  }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

 private:
  static Role role(std::span<const int> tokens, const TokenMask& mask) {
    if (!mask.empty() && std::find(mask.begin(), mask.end(), false) != mask.end()) return kShared;
    return tokens.back() == 3 ? kPos : kNeg;
  }
  std::vector<double> params_ = std::vector<double>(1, 0.0);
};

const std::vector<double> kRealVideo = {0.0};
const std::vector<double> kSynVideo = {1.0};

PreparedSample table_sample(double omega) {
  PreparedSample s;
  s.triplet_id = "t";
  s.generator_id = "g";
  s.real_video = kRealVideo;
  s.synthetic_video = kSynVideo;
  s.pos_tokens = {1, 2, 3};
  s.neg_tokens = {1, 2, 4};
  s.shared_mask = {true, true, false};
  s.weight = omega;
  return s;
}

// Direct evaluation of the three terms from model predictions.
struct OracleLoss {
  double real = 0.0, syn = 0.0, scr = 0.0;
};

OracleLoss oracle_loss(const AlignmentModel& model, std::span<const PreparedSample> batch, double gamma) {
  OracleLoss out;
  for (const auto& s : batch) {
    out.real += s.real_share * -(std::log(model.predict(s.real_video, s.pos_tokens)) +
                                 std::log(1.0 - model.predict(s.real_video, s.neg_tokens)));
    if (!s.has_synthetic()) continue;
    const double w = *s.weight;
    out.syn += w * -(std::log(model.predict(s.synthetic_video, s.neg_tokens)) +
                     std::log(1.0 - model.predict(s.synthetic_video, s.pos_tokens)));
    if (!s.has_shared()) continue;
    auto hinge = [](double x) { return std::max(0.0, x); };
    const double fs_shared = model.predict(s.synthetic_video, s.pos_tokens, s.shared_mask);
    const double fr_shared = model.predict(s.real_video, s.pos_tokens, s.shared_mask);
    out.scr += w * (hinge(gamma + fs_shared - model.predict(s.synthetic_video, s.neg_tokens)) +
                    hinge(gamma + model.predict(s.synthetic_video, s.pos_tokens) - fs_shared) +
                    hinge(gamma + fr_shared - model.predict(s.real_video, s.pos_tokens)) +
                    hinge(gamma + model.predict(s.real_video, s.neg_tokens) - fr_shared));
  }
  const double n = static_cast<double>(batch.size());
  out.real /= n;
  out.syn /= n;
  out.scr /= n;
  return out;
}

std::vector<PreparedSample> synthetic_only(const std::vector<PreparedSample>& all) {
  std::vector<PreparedSample> out;
  for (const auto& s : all) {
    if (s.has_synthetic()) out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("prepare_samples resolves captions and real-term shares") {
  fixtures::LossFixture f(0);
  REQUIRE(f.prepared.size() == 12);
  for (const auto& p : f.prepared) {
    CHECK(p.real_share == 0.5);
    CHECK(p.has_synthetic());
    CHECK(p.shared_mask.size() == p.pos_tokens.size());
    CHECK(std::count(p.shared_mask.begin(), p.shared_mask.end(), true) == 2);
  }
}

TEST_CASE("loss values on hand-set predictions") {
  TableModel model;
  const std::vector<PreparedSample> one = {table_sample(0.5)};
  CHECK(loss_real(model, one).value == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(loss_syn_weighted(model, one).value == doctest::Approx(std::log(2.0)));

  const double eps = 1e-7;
  model.table[0][TableModel::kPos] = 1.0 - eps;
  model.table[0][TableModel::kNeg] = eps;
  CHECK(loss_real(model, one, eps).value == doctest::Approx(0.0).epsilon(1e-6));

  model.table[0][TableModel::kShared] = 0.5;
  model.table[0][TableModel::kPos] = 0.9;
  model.table[0][TableModel::kNeg] = 0.1;
  model.table[1][TableModel::kShared] = 0.5;
  model.table[1][TableModel::kNeg] = 0.9;
  model.table[1][TableModel::kPos] = 0.1;
  const std::vector<PreparedSample> unit = {table_sample(1.0)};
  CHECK(loss_scr(model, unit, 0.2).value == 0.0);

  model.table[1][TableModel::kShared] = 0.95;
  CHECK(loss_scr(model, unit, 0.2).value == doctest::Approx(0.25));
  LossConfig config;
  const auto total = total_loss(model, unit, config);
  CHECK(total.report.samples[0].hinge_active == std::array<bool, 4>{true, false, false, false});
}

TEST_CASE("cross-entropy clamps saturated predictions") {
  TableModel model;
  model.table[0][TableModel::kPos] = 0.0;
  const std::vector<PreparedSample> one = {table_sample(1.0)};
  const auto value = loss_real(model, one, 1e-7).value;
  CHECK(std::isfinite(value));
  CHECK(value == doctest::Approx(-std::log(1e-7) - std::log(0.5)));
}

TEST_CASE("loss terms agree with direct evaluation") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    fixtures::LossFixture f(seed);
    LossConfig config;
    const auto expected = oracle_loss(*f.model, f.prepared, config.gamma);
    const auto total = total_loss(*f.model, f.prepared, config);
    CHECK(total.report.l_real == doctest::Approx(expected.real).epsilon(1e-12));
    CHECK(total.report.l_syn == doctest::Approx(expected.syn).epsilon(1e-12));
    CHECK(total.report.l_scr == doctest::Approx(expected.scr).epsilon(1e-12));
    CHECK(total.report.total == total.report.l_real + total.report.l_syn + config.lambda_scr * total.report.l_scr);
    CHECK(loss_real(*f.model, f.prepared).value == total.report.l_real);
    CHECK(loss_syn_weighted(*f.model, f.prepared).value == total.report.l_syn);
    CHECK(loss_scr(*f.model, f.prepared, config.gamma).value == total.report.l_scr);
  }
}

TEST_CASE("unit weights reduce the weighted synthetic loss to the unweighted one") {
  fixtures::LossFixture f(1);
  auto batch = f.prepared;
  std::vector<PreparedSample> swapped;
  for (auto& s : batch) {
    s.weight = 1.0;
    PreparedSample r = s;
    r.real_video = s.synthetic_video;
    r.pos_tokens = s.neg_tokens;
    r.neg_tokens = s.pos_tokens;
    r.real_share = 1.0;
    swapped.push_back(r);
  }
  const auto weighted = loss_syn_weighted(*f.model, batch);
  const auto plain = loss_real(*f.model, swapped);
  CHECK(weighted.value == plain.value);
  CHECK(weighted.gradient == plain.gradient);
}

TEST_CASE("zero-weight samples contribute nothing") {
  fixtures::LossFixture f(2);
  auto batch = f.prepared;
  for (auto& s : batch) s.weight = 0.0;
  const auto syn = loss_syn_weighted(*f.model, batch);
  const auto scr = loss_scr(*f.model, batch, 0.2);
  CHECK(syn.value == 0.0);
  CHECK(scr.value == 0.0);
  for (double g : syn.gradient) CHECK(g == 0.0);
  for (double g : scr.gradient) CHECK(g == 0.0);

  LossConfig config;
  const auto total = total_loss(*f.model, batch, config);
  const auto real = loss_real(*f.model, batch);
  CHECK(total.report.total == real.value);
  CHECK(total.gradient == real.gradient);
}

TEST_CASE("composition identities") {
  fixtures::LossFixture f(3);
  LossConfig config;
  config.lambda_scr = 0.0;
  auto total = total_loss(*f.model, f.prepared, config);
  CHECK(total.report.total == total.report.l_real + total.report.l_syn);

  std::vector<PreparedSample> bare;
  for (auto s : f.prepared) {
    s.synthetic_video = {};
    s.weight.reset();
    s.generator_id.clear();
    bare.push_back(s);
  }
  config.lambda_scr = 1e-2;
  total = total_loss(*f.model, bare, config);
  CHECK(total.report.l_syn == 0.0);
  CHECK(total.report.l_scr == 0.0);
  CHECK(total.report.total == total.report.l_real);

  auto unweighted = f.prepared;
  unweighted[0].weight.reset();
  CHECK_THROWS_AS(total_loss(*f.model, unweighted, config), DataError);
  CHECK_THROWS_AS(loss_syn_weighted(*f.model, bare), DataError);
  CHECK_THROWS_AS(loss_real(*f.model, std::vector<PreparedSample>{}), DataError);
}

TEST_CASE("gradients match central differences at random parameter points") {
  LossConfig config;
  int points = 0;
  for (std::uint64_t seed = 0; points < 20; ++seed) {
    fixtures::LossFixture f(seed);
    if (fixtures::kink_distance(*f.model, f.prepared, config.gamma) < 1e-3) continue;
    ++points;
    auto& model = *f.model;
    const auto syn_batch = synthetic_only(f.prepared);
    const auto real = loss_real(model, f.prepared);
    CHECK(oracle::max_relative_error(model.parameters(), real.gradient,
                                     [&] { return loss_real(model, f.prepared).value; }) <= 1e-4);
    const auto syn = loss_syn_weighted(model, syn_batch);
    CHECK(oracle::max_relative_error(model.parameters(), syn.gradient,
                                     [&] { return loss_syn_weighted(model, syn_batch).value; }) <= 1e-4);
    const auto scr = loss_scr(model, syn_batch, config.gamma);
    CHECK(oracle::max_relative_error(model.parameters(), scr.gradient,
                                     [&] { return loss_scr(model, syn_batch, config.gamma).value; }) <= 1e-4);
    const auto total = total_loss(model, f.prepared, config);
    CHECK(oracle::max_relative_error(model.parameters(), total.gradient,
                                     [&] { return total_loss(model, f.prepared, config).report.total; }) <= 1e-4);
  }
}

TEST_CASE("seed-0 total loss matches the recorded value") {
  fixtures::LossFixture f(0, 0.1);
  LossConfig config;
  CHECK(total_loss(*f.model, f.prepared, config).report.total == doctest::Approx(1.5971427364634398).epsilon(1e-12));
}

TEST_CASE("learning-rate schedule") {
  LossConfig config;
  config.learning_rate = 1.0;
  config.warmup_steps = 10;
  Optimizer opt(config, 1, 100);
  CHECK(opt.learning_rate_at(0) == doctest::Approx(0.1 * 0.5 * (1 + std::cos(0.0))));
  CHECK(opt.learning_rate_at(9) == doctest::Approx(0.5 * (1 + std::cos(M_PI * 0.09))));
  CHECK(opt.learning_rate_at(50) == doctest::Approx(0.5));
  CHECK(opt.learning_rate_at(100) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adam step follows the bias-corrected update") {
  LossConfig config;
  config.learning_rate = 0.1;
  config.warmup_steps = 0;
  Optimizer opt(config, 2, 1000000);
  std::vector<double> params = {1.0, -1.0};
  const std::vector<double> grad = {0.5, -2.0};
  opt.step(params, grad);
  const double lr = 0.1 * 0.5 * (1.0 + std::cos(0.0));
  CHECK(params[0] == doctest::Approx(1.0 - lr * 0.5 / (0.5 + 1e-8)));
  CHECK(params[1] == doctest::Approx(-1.0 + lr * 2.0 / (2.0 + 1e-8)));
}

TEST_CASE("fit is deterministic and inert at zero learning rate") {
  fixtures::LossFixture f(4, 0.1);
  LossConfig config;
  config.epochs = 5;
  config.batch_size = 4;
  config.learning_rate = 0.0;
  const std::vector<double> before(f.model->parameters().begin(), f.model->parameters().end());
  fit(*f.model, f.prepared, config);
  CHECK(std::equal(before.begin(), before.end(), f.model->parameters().begin()));

  config.learning_rate = 1e-2;
  fixtures::LossFixture a(4, 0.1), b(4, 0.1);
  const auto ta = fit(*a.model, a.prepared, config);
  const auto tb = fit(*b.model, b.prepared, config);
  REQUIRE(ta.size() == 5);
  for (std::size_t e = 0; e < ta.size(); ++e) CHECK(ta[e].total == tb[e].total);
  CHECK(std::equal(a.model->parameters().begin(), a.model->parameters().end(), b.model->parameters().begin()));
}

TEST_CASE("fit reports non-finite losses with their batch") {
  fixtures::LossFixture f(5, 0.1);
  std::vector<double> poisoned(6, std::numeric_limits<double>::infinity());
  f.prepared[3].real_video = poisoned;
  LossConfig config;
  config.epochs = 1;
  CHECK_THROWS_AS(fit(*f.model, f.prepared, config), NumericError);
}

TEST_CASE("training loss decreases after warmup on a clean corpus") {
  ToyCorpusConfig corpus_config;
  corpus_config.n_triplets = 200;
  corpus_config.n_heldout = 0;
  const auto corpus = make_toy_corpus(corpus_config);
  auto samples = join_samples(corpus.triplets, corpus.synthetics);
  for (auto& s : samples) s.weight = 1.0;
  std::vector<std::string> words;
  for (const auto& t : corpus.triplets) {
    for (const auto& w : tokenize(t.caption_pos + " " + t.caption_neg).tokens) words.push_back(w);
  }
  SurrogateModel model({}, Vocabulary(words));
  const auto prepared = prepare_samples(samples, corpus.features, model);
  LossConfig config;
  config.epochs = 60;
  const auto trace = fit(model, prepared, config);
  const std::size_t warmup_epochs = config.warmup_steps / ((prepared.size() + config.batch_size - 1) / config.batch_size) + 1;
  double best = trace[warmup_epochs].total;
  for (std::size_t e = warmup_epochs + 1; e < trace.size(); ++e) {
    CHECK(trace[e].total <= 1.05 * best);
    best = std::min(best, trace[e].total);
  }
  CHECK(trace.back().total < trace.front().total);
}

TEST_CASE("loss config serialization") {
  LossConfig config;
  config.gamma = 0.3;
  config.optimizer = OptimizerKind::kSgd;
  const auto back = loss_config_from_json(to_json(config));
  CHECK(back.gamma == 0.3);
  CHECK(back.optimizer == OptimizerKind::kSgd);
  CHECK(to_json(back) == to_json(config));
  CHECK_THROWS_AS(loss_config_from_json(nlohmann::ordered_json{{"gama", 0.2}}), ConfigError);
  CHECK_THROWS_AS(loss_config_from_json(nlohmann::ordered_json{{"batch_size", 0}}), ConfigError);
  CHECK_THROWS_AS(loss_config_from_json(nlohmann::ordered_json{{"gamma", "high"}}), ConfigError);
}
