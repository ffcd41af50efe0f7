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

#include "kws/error.hpp"
#include "kws/model.hpp"
#include "test_support.hpp"

using namespace kws;
using namespace kws::nn;

namespace {

std::int64_t trainable_size(const Model& m)
{
    std::int64_t n = 0;
    for (const auto& ref : model_tensors(m)) {
        if (ref.trainable) n += static_cast<std::int64_t>(ref.tensor->size());
    }
    return n;
}

using Planes = std::vector<std::vector<std::vector<double>>>;  // [C][H][W]

// Straight-line res8 inference over nested vectors: explicit padding checks,
// explicit batchnorm formula, explicit window averaging.
std::vector<double> oracle_logits(const Model& m, const features::FeatureMatrix& f)
{
    auto conv = [](const Planes& x, const Tensor& w) {
        const std::size_t co = w.dim(0), ci = w.dim(1), h = x[0].size(), wd = x[0][0].size();
        Planes y(co, std::vector<std::vector<double>>(h, std::vector<double>(wd, 0.0)));
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < wd; ++j)
                    for (std::size_t c = 0; c < ci; ++c)
                        for (std::size_t a = 0; a < 3; ++a)
                            for (std::size_t b = 0; b < 3; ++b) {
                                const long ii = static_cast<long>(i + a) - 1, jj = static_cast<long>(j + b) - 1;
                                if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(wd))
                                    continue;
                                y[o][i][j] += x[c][static_cast<std::size_t>(ii)][static_cast<std::size_t>(jj)] *
                                              w[((o * ci + c) * 3 + a) * 3 + b];
                            }
        return y;
    };
    auto bn = [](Planes x, const BatchNormParams& p) {
        for (std::size_t c = 0; c < x.size(); ++c) {
            const double g = p.gamma ? (*p.gamma)[c] : 1.0;
            for (auto& r : x[c])
                for (auto& v : r) v = g * (v - p.running_mean[c]) / std::sqrt(p.running_var[c] + 1e-5);
        }
        return x;
    };
    auto relu_ = [](Planes x) {
        for (auto& p : x)
            for (auto& r : p)
                for (auto& v : r) v = std::max(v, 0.0);
        return x;
    };

    Planes x(1, std::vector<std::vector<double>>(f.frames, std::vector<double>(f.coeffs)));
    for (std::size_t t = 0; t < f.frames; ++t)
        for (std::size_t k = 0; k < f.coeffs; ++k) x[0][t][k] = f.at(t, k);
    x = relu_(conv(x, m.conv0));
    const std::size_t ph = f.frames / 4, pw = f.coeffs / 3;
    Planes pooled(x.size(), std::vector<std::vector<double>>(ph, std::vector<double>(pw, 0.0)));
    for (std::size_t c = 0; c < x.size(); ++c)
        for (std::size_t i = 0; i < ph; ++i)
            for (std::size_t j = 0; j < pw; ++j) {
                for (std::size_t a = 0; a < 4; ++a)
                    for (std::size_t b = 0; b < 3; ++b) pooled[c][i][j] += x[c][4 * i + a][3 * j + b];
                pooled[c][i][j] /= 12.0;
            }
    x = pooled;
    for (const auto& blk : m.blocks) {
        Planes h = bn(conv(relu_(bn(conv(x, blk.conv1), blk.bn1)), blk.conv2), blk.bn2);
        for (std::size_t c = 0; c < h.size(); ++c)
            for (std::size_t i = 0; i < ph; ++i)
                for (std::size_t j = 0; j < pw; ++j) h[c][i][j] += x[c][i][j];
        x = relu_(h);
    }
    std::vector<double> feat(x.size(), 0.0);
    for (std::size_t c = 0; c < x.size(); ++c) {
        for (const auto& r : x[c])
            for (double v : r) feat[c] += v;
        feat[c] /= static_cast<double>(ph * pw);
    }
    std::vector<double> logits(12);
    for (std::size_t k = 0; k < 12; ++k) {
        logits[k] = m.fc_bias[k];
        for (std::size_t c = 0; c < feat.size(); ++c) logits[k] += m.fc_weight[k * feat.size() + c] * feat[c];
    }
    return logits;
}

}  // namespace

TEST(ParamCount, PublishedArchitectures)
{
    EXPECT_EQ(count_params(ModelSpec::res8()), 110307);
    EXPECT_EQ(count_params(ModelSpec::res8_narrow()), 19905);
    EXPECT_EQ(count_params(ModelSpec::res8_narrow(true)), 19905 + 3 * 19);
}

TEST(ParamCount, NarrowWidthFourWithGammas)
{
    auto spec = ModelSpec::res8_narrow(true);
    spec.inner_widths = {4, 4, 4};
    EXPECT_EQ(count_params(spec), 4527);
}

TEST(ParamCount, ClosedFormMatchesTensorSizes)
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> width(1, 24);
    for (int trial = 0; trial < 50; ++trial) {
        auto spec = ModelSpec::with_width("res8", width(rng), trial % 2 == 0);
        for (auto& k : spec.inner_widths) k = std::uniform_int_distribution<int>(1, spec.base_channels)(rng);
        const auto m = make_model(spec, static_cast<std::uint64_t>(trial));
        ASSERT_EQ(count_params(spec), trainable_size(m));
    }
}

TEST(MultiplyCount, ConventionAndRatio)
{
    EXPECT_EQ(count_multiplies(ModelSpec::res8()), 37175490);
    EXPECT_EQ(count_multiplies(ModelSpec::res8_narrow()), 7026618);
    const double ratio = static_cast<double>(count_multiplies(ModelSpec::res8())) /
                         static_cast<double>(count_multiplies(ModelSpec::res8_narrow()));
    EXPECT_NEAR(ratio, 5.29, 0.01);
    EXPECT_LT(std::abs(ratio / (30.0 / 5.65) - 1.0), 0.05);
}

TEST(MultiplyCount, CountsEveryConvTap)
{
    // Enumerate layer by layer: output positions x 3x3 taps x in x out.
    auto spec = ModelSpec::with_width("res8", 7);
    spec.inner_widths = {3, 5, 7};
    std::int64_t expect = 101 * 40 * 9 * 1 * 7;
    for (int k : spec.inner_widths) expect += 25 * 13 * 9 * (7 * k + k * 7);
    expect += 7 * 12;
    EXPECT_EQ(count_multiplies(spec), expect);
}

TEST(Model, ZeroWeightsGiveUniformPosteriors)
{
    auto m = make_model(ModelSpec::res8_narrow(), 3);
    for (auto& ref : model_tensors(m)) {
        if (ref.trainable) ref.tensor->fill(0.0f);
    }
    std::mt19937_64 rng(2);
    const auto r = model_forward(m, test::random_features(rng));
    for (double p : r.posteriors) EXPECT_NEAR(p, 1.0 / 12.0, 1e-15);
}

TEST(Model, MatchesStraightLineOracle)
{
    std::mt19937_64 rng(3);
    for (bool slim : {false, true}) {
        auto spec = ModelSpec::with_width("tiny", 3, slim);
        spec.inner_widths = {2, 3, 1};
        auto m = make_model(spec, 4);
        test::randomize_model(m, rng);
        for (auto [frames, coeffs] : {std::pair<std::size_t, std::size_t>{13, 8}, {101, 40}, {9, 7}}) {
            const auto f = test::random_features(rng, frames, coeffs);
            const auto got = forward_any(m, f).logits;
            const auto want = oracle_logits(m, f);
            for (std::size_t k = 0; k < 12; ++k) ASSERT_NEAR(got[k], want[k], 1e-9 * (1.0 + std::abs(want[k])));
        }
    }
}

TEST(Model, PosteriorsAreADistribution)
{
    std::mt19937_64 rng(4);
    auto m = make_model(ModelSpec::res8_narrow(true), 5);
    test::randomize_model(m, rng);
    const auto r = model_forward(m, test::random_features(rng));
    double s = 0;
    for (double p : r.posteriors) {
        EXPECT_GE(p, 0.0);
        s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(r.argmax, static_cast<std::size_t>(std::max_element(r.posteriors.begin(), r.posteriors.end()) -
                                                 r.posteriors.begin()));
}

TEST(Model, SeededInitIsDeterministic)
{
    EXPECT_EQ(make_model(ModelSpec::res8(), 9), make_model(ModelSpec::res8(), 9));
    EXPECT_FALSE(make_model(ModelSpec::res8(), 9) == make_model(ModelSpec::res8(), 10));
}

TEST(Model, RejectsWrongInputShape)
{
    const auto m = make_model(ModelSpec::res8_narrow(), 1);
    EXPECT_THROW(model_forward(m, features::FeatureMatrix(100, 40)), ContractError);
    EXPECT_THROW(forward_any(m, features::FeatureMatrix(3, 40)), ContractError);
}

TEST(Model, ValidateCatchesShapeDrift)
{
    auto m = make_model(ModelSpec::res8_narrow(), 1);
    EXPECT_NO_THROW(validate_model(m));
    m.blocks[1].conv1 = Tensor({18, 19, 3, 3});
    EXPECT_THROW(validate_model(m), ContractError);
}

TEST(ModelSpec, NamesAndValidation)
{
    EXPECT_EQ(ModelSpec::by_name("res8").base_channels, 45);
    EXPECT_EQ(ModelSpec::by_name("res8-narrow").base_channels, 19);
    EXPECT_THROW(ModelSpec::by_name("res15"), ConfigError);
    auto s = ModelSpec::res8();
    s.inner_widths[0] = 46;
    EXPECT_THROW(s.validate(), ContractError);
}

TEST(Labels, DefaultAndPadded)
{
    const auto d = normalize_labels({});
    ASSERT_EQ(d.size(), 12u);
    EXPECT_EQ(d.front(), "yes");
    EXPECT_EQ(d[10], "unknown");
    EXPECT_EQ(d[11], "silence");
    const auto p = normalize_labels({"a", "b"});
    EXPECT_EQ(p.size(), 12u);
    EXPECT_EQ(p[1], "b");
    EXPECT_EQ(p[2], "_unused2");
}
