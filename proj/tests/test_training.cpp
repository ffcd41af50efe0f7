/*
 * Copyright 2026 The kwslim Authors
 *
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License"); you may
 * not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
 * WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gradcheck.hpp"
#include "kws/error.hpp"
#include "kws/training.hpp"
#include "test_support.hpp"

using namespace kws;
using namespace kws::train;

namespace {

data::DatasetManifest small_tones(const std::string& name, int per_class = 6)
{
    data::ToneDatasetConfig cfg;
    cfg.train_per_class = per_class;
    cfg.val_per_class = 2;
    cfg.test_per_class = 2;
    return data::write_tone_dataset(test::scratch_dir(name), cfg);
}

TrainConfig quick_config(int epochs)
{
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.seed = 3;
    return cfg;
}

std::vector<float> flat_params(const nn::Model& m)
{
    std::vector<float> out;
    for (const auto& ref : nn::model_tensors(m)) {
        out.insert(out.end(), ref.tensor->values().begin(), ref.tensor->values().end());
    }
    return out;
}

}  // namespace

TEST(CrossEntropy, ReferenceValues)
{
    EXPECT_NEAR(cross_entropy(std::vector<double>(12, 0.7), 4), std::log(12.0), 1e-12);
    EXPECT_NEAR(std::log(12.0), 2.48491, 1e-5);
    std::vector<double> onehot(12, 0.0);
    onehot[3] = 100.0;
    EXPECT_LT(cross_entropy(onehot, 3), 1e-6);
    std::vector<double> first(12, 0.0);
    first[0] = 1.0;
    EXPECT_NEAR(cross_entropy(first, 0), std::log(11.0 * std::exp(-1.0) + 1.0), 1e-12);
    EXPECT_NEAR(cross_entropy(first, 0), 1.61873, 1e-5);
    EXPECT_THROW(cross_entropy(first, 12), ContractError);
    EXPECT_THROW(cross_entropy(first, -1), ContractError);
}

TEST(ModelBackward, BiasGradientIsSoftmaxMinusOneHot)
{
    auto c = test::tiny_case(1, 2, false, 1);
    const auto r = model_backward(c.model, c.batch, std::nullopt);
    const auto p = nn::softmax(r.logits[0]);
    const auto& db = r.grads["fc.bias"];
    for (std::size_t k = 0; k < 12; ++k) {
        EXPECT_NEAR(db[k], p[k] - (static_cast<int>(k) == c.batch[0].label ? 1.0 : 0.0), 1e-14);
    }
    EXPECT_NEAR(r.loss, cross_entropy(r.logits[0], c.batch[0].label), 1e-14);
}

TEST(ModelBackward, MatchesFiniteDifferences)
{
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        const auto c = test::tiny_case(seed, 2, seed % 2 == 1);
        const auto r = test::gradient_check(c.model, c.batch);
        EXPECT_EQ(r.failed, 0u) << "seed " << seed << " worst " << r.worst << " rel " << r.max_rel;
        EXPECT_GT(r.checked, 100u);
        EXPECT_LT(r.refined * 4, r.checked);  // most elements use the full step
    }
}

TEST(FiniteDifference, StepPairsBracketTheParameter)
{
    for (float p : {0.37f, -1.25f, 1e-6f, -3e-5f, 0.0f, 1.0f}) {
        const auto [up, down] = test::symmetric_pair(p, 1e-3);
        EXPECT_GT(up, p);
        EXPECT_LT(down, p);
        const double centre = (static_cast<double>(up) + static_cast<double>(down)) / 2.0;
        EXPECT_NEAR(centre, p, 1e-9) << p;
        if (std::abs(p) >= 1e-3f) EXPECT_EQ(centre, static_cast<double>(p)) << p;
    }
}

TEST(ModelBackward, DuplicatedSampleGivesSingleSampleGradients)
{
    auto c = test::tiny_case(21, 3, true, 1);
    const std::vector<Sample> twice = {c.batch[0], c.batch[0]};
    auto m1 = c.model, m2 = c.model;
    const auto a = model_backward(m1, c.batch, std::nullopt);
    const auto b = model_backward(m2, twice, std::nullopt);
    EXPECT_NEAR(a.loss, b.loss, 1e-12);
    ASSERT_EQ(a.grads.names, b.grads.names);
    for (std::size_t t = 0; t < a.grads.grads.size(); ++t) {
        for (std::size_t i = 0; i < a.grads.grads[t].size(); ++i) {
            ASSERT_NEAR(a.grads.grads[t][i], b.grads.grads[t][i], 1e-9 * (1.0 + std::abs(a.grads.grads[t][i])))
                << a.grads.names[t];
        }
    }
}

TEST(ModelBackward, EmptyBatchIsContractError)
{
    auto c = test::tiny_case(1);
    EXPECT_THROW(model_backward(c.model, std::vector<Sample>{}), ContractError);
    EXPECT_THROW(batch_loss(c.model, std::vector<Sample>{}), ContractError);
}

TEST(RunningStats, ConvergeGeometrically)
{
    auto c = test::tiny_case(31, 2, false, 4);
    const double mom = 0.1;
    const double r0 = c.model.blocks[0].bn1.running_mean[0];
    model_backward(c.model, c.batch, mom);
    // r1 = (1 - m) r0 + m mu reveals the batch mean.
    const double r1 = c.model.blocks[0].bn1.running_mean[0];
    const double mu = (r1 - (1.0 - mom) * r0) / mom;
    for (int t = 2; t <= 30; ++t) {
        model_backward(c.model, c.batch, mom);
        const double expect = mu + std::pow(1.0 - mom, t) * (r0 - mu);
        ASSERT_NEAR(c.model.blocks[0].bn1.running_mean[0], expect, 1e-5 * (1.0 + std::abs(mu))) << t;
    }
}

TEST(L1Subgradient, SignRule)
{
    auto c = test::tiny_case(41, 2, true, 1);
    auto& g = *c.model.blocks[0].bn1.gamma;
    g[0] = 0.5f;
    g[1] = 0.0f;
    (*c.model.blocks[1].bn1.gamma)[0] = -2.0f;
    const auto base = model_backward(c.model, c.batch, std::nullopt).grads;

    auto same = base;
    l1_subgrad_gammas(c.model, 0.0, same);
    for (std::size_t t = 0; t < base.grads.size(); ++t) EXPECT_EQ(same.grads[t], base.grads[t]);

    auto inc = base;
    l1_subgrad_gammas(c.model, 0.1, inc);
    EXPECT_NEAR(inc["block0.bn1.gamma"][0] - base["block0.bn1.gamma"][0], 0.1, 1e-15);
    EXPECT_EQ(inc["block0.bn1.gamma"][1], base["block0.bn1.gamma"][1]);
    EXPECT_NEAR(inc["block1.bn1.gamma"][0] - base["block1.bn1.gamma"][0], -0.1, 1e-15);
    EXPECT_EQ(inc["conv0.weight"], base["conv0.weight"]);

    auto plain = test::tiny_case(41, 2, false, 1);
    auto pg = model_backward(plain.model, plain.batch, std::nullopt).grads;
    EXPECT_THROW(l1_subgrad_gammas(plain.model, 0.1, pg), ContractError);
}

TEST(Sgd, ReferenceSteps)
{
    std::vector<float> p = {1.0f};
    std::vector<double> v = {0.0};
    const std::vector<double> g = {1.0};
    sgd_update(p, g, v, 0.0, 0.9);
    EXPECT_EQ(p[0], 1.0f);
    sgd_update(p, g, v, 0.1, 0.0);
    EXPECT_FLOAT_EQ(p[0], 0.9f);

    std::vector<float> q = {0.0f};
    std::vector<double> w = {0.0};
    sgd_update(q, g, w, 0.1, 0.9);
    sgd_update(q, g, w, 0.1, 0.9);
    EXPECT_NEAR(q[0], -0.29, 1e-7);

    std::vector<double> g2 = {1.0, 2.0};
    EXPECT_THROW(sgd_update(q, g2, w, 0.1, 0.9), ContractError);
}

TEST(TrainConfig, Validation)
{
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate(nn::ModelSpec::res8_narrow()));
    cfg.lambda_l1 = 1e-4;
    EXPECT_THROW(cfg.validate(nn::ModelSpec::res8_narrow()), ConfigError);
    EXPECT_NO_THROW(cfg.validate(nn::ModelSpec::res8_narrow(true)));
    cfg = {};
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(nn::ModelSpec::res8()), ConfigError);
    cfg = {};
    cfg.momentum = 1.0;
    EXPECT_THROW(cfg.validate(nn::ModelSpec::res8()), ConfigError);
}

TEST(Train, EmptyTrainSplitIsContractError)
{
    auto m = small_tones("train_empty", 2);
    std::erase_if(m.entries, [](const auto& e) { return e.split == data::Split::train; });
    EXPECT_THROW(train::train(nn::ModelSpec::res8_narrow(), m, quick_config(1)), ContractError);
}

TEST(Train, SameSeedSameBytesAnyWorkerCount)
{
    const auto m = small_tones("train_det", 4);
    auto cfg = quick_config(2);
    const auto a = train::train(nn::ModelSpec::res8_narrow(true), m, cfg);
    const auto b = train::train(nn::ModelSpec::res8_narrow(true), m, cfg);
    cfg.workers = 3;
    const auto c = train::train(nn::ModelSpec::res8_narrow(true), m, cfg);
    EXPECT_EQ(flat_params(a.model), flat_params(b.model));
    EXPECT_EQ(flat_params(a.model), flat_params(c.model));
    ASSERT_EQ(a.history.size(), 2u);
    EXPECT_EQ(a.history[1].train_loss, c.history[1].train_loss);
}

TEST(Train, FirstEpochBeatsUniformBaseline)
{
    const auto m = small_tones("train_epoch1", 16);
    auto cfg = quick_config(3);
    cfg.batch_size = 16;
    std::ostringstream log;
    const auto r = train::train(nn::ModelSpec::res8_narrow(), m, cfg, &log);
    ASSERT_EQ(r.history.size(), 3u);
    EXPECT_LT(r.history[0].train_loss, std::log(12.0));
    for (const auto& ref : nn::model_tensors(r.model)) {
        for (float v : ref.tensor->values()) ASSERT_TRUE(std::isfinite(v));
    }
    // One JSON object per epoch with the documented keys.
    std::istringstream lines(log.str());
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("epoch").get<int>(), ++n);
        EXPECT_TRUE(j.contains("train_loss") && j.contains("val_accuracy") && j.contains("gamma_below_0p01_fraction"));
        EXPECT_TRUE(j["gamma_below_0p01_fraction"].is_null());
    }
    EXPECT_EQ(n, 3);
}

TEST(Train, BestEpochTiesKeepEarlier)
{
    const auto m = small_tones("train_best", 4);
    const auto r = train::train(nn::ModelSpec::res8_narrow(), m, quick_config(3));
    double best = -1;
    int best_epoch = 0;
    for (const auto& s : r.history) {
        if (*s.val_accuracy > best) {
            best = *s.val_accuracy;
            best_epoch = s.epoch;
        }
    }
    EXPECT_EQ(r.best_epoch, best_epoch);
}

TEST(GammaFraction, CountsSmallMagnitudes)
{
    auto m = nn::make_model(nn::ModelSpec::res8_narrow(true), 1);
    EXPECT_EQ(gamma_fraction_below(m, 0.01), 0.0);
    (*m.blocks[2].bn1.gamma)[5] = -0.001f;
    EXPECT_NEAR(*gamma_fraction_below(m, 0.01), 1.0 / 57.0, 1e-15);
    EXPECT_FALSE(gamma_fraction_below(nn::make_model(nn::ModelSpec::res8_narrow(), 1), 0.01).has_value());
}
